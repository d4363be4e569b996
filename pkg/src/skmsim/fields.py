"""Vector beams assembled from Laguerre-Gaussian modes in the circular basis.

Geometry conventions shared by the whole package:

* arrays are indexed ``[x, y]``: the first axis walks the x coordinate and
  the second walks y, with ``phi = atan2(y, x)``,
* pixels are cell centered, ``x_i = (i - n/2 + 1/2) * spacing``, so the beam
  axis r = 0 falls between pixels and the vortex azimuth is defined at every
  sample,
* component 0 of a vector field is right circular ``|R>``, component 1 is
  left circular ``|L>``; a pure ``|R>`` pixel sits at the north pole
  (0, 0, 1) of the polarization sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.special import gammaln

__all__ = [
    "SamplingError",
    "SamplingGrid",
    "LgIndex",
    "BeamSpec",
    "VectorField",
    "StokesField",
    "beam_width",
    "rayleigh_range",
    "lg_mode",
    "synthesize_vector_beam",
    "synthesize_skm_beam",
    "predicted_nsk",
    "stokes",
]


class SamplingError(ValueError):
    """A grid cannot faithfully hold the requested field or propagation step."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SamplingGrid:
    """Square, uniformly sampled, cell-centered transverse window.

    Parameters
    ----------
    n_points:
        Samples per side. Powers of two keep the FFT-based propagation fast,
        but any value >= 8 is accepted.
    spacing:
        Pixel pitch in meters (same along x and y).
    """

    n_points: int
    spacing: float

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError(f"n_points must be at least 8, got {self.n_points}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def extent(self) -> float:
        """Physical side length in meters."""
        return self.n_points * self.spacing

    @cached_property
    def axis(self) -> np.ndarray:
        """Cell-centered sample coordinates along one axis."""
        c = np.arange(self.n_points) - self.n_points / 2 + 0.5
        return _readonly(c * self.spacing)

    @cached_property
    def x(self) -> np.ndarray:
        n = self.n_points
        return np.broadcast_to(self.axis[:, None], (n, n))

    @cached_property
    def y(self) -> np.ndarray:
        n = self.n_points
        return np.broadcast_to(self.axis[None, :], (n, n))

    @cached_property
    def r(self) -> np.ndarray:
        return _readonly(np.hypot(self.x, self.y))

    @cached_property
    def phi(self) -> np.ndarray:
        return _readonly(np.arctan2(self.y, self.x))

    @cached_property
    def k_axis(self) -> np.ndarray:
        """Angular spatial frequencies in FFT order, rad/m."""
        return _readonly(2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing))

    @cached_property
    def k_perp_sq(self) -> np.ndarray:
        """|kappa|^2 on the FFT-ordered frequency grid."""
        kx = self.k_axis[:, None]
        ky = self.k_axis[None, :]
        return _readonly(kx * kx + ky * ky)


@dataclass(frozen=True)
class LgIndex:
    """Radial index p >= 0 and signed azimuthal index ell of one mode."""

    p: int
    ell: int

    def __post_init__(self):
        if self.p < 0:
            raise ValueError(f"radial index must be non-negative, got p={self.p}")


@dataclass(frozen=True)
class BeamSpec:
    """Wavelength, waist, global phase, and the two mode components.

    ``component0`` rides on |R>, ``component1`` on |L>. The global phase
    ``theta0`` multiplies the whole field and cancels in every polarization
    observable; it exists as an explicit knob and defaults to zero.
    """

    wavelength: float
    w0: float
    theta0: float = 0.0
    component0: LgIndex = LgIndex(0, 0)
    component1: LgIndex = LgIndex(0, 1)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.w0 > 0:
            raise ValueError(f"waist must be positive, got {self.w0}")

    @property
    def k(self) -> float:
        """Vacuum wavenumber, rad/m."""
        return 2.0 * math.pi / self.wavelength

    @property
    def z_r(self) -> float:
        """Rayleigh range, m."""
        return rayleigh_range(self.w0, self.wavelength)


@dataclass(frozen=True)
class VectorField:
    """Two complex field components sampled on a shared grid.

    Treated as immutable: operations return new instances rather than
    mutating the arrays in place.
    """

    grid: SamplingGrid
    e_r: np.ndarray
    e_l: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        for name, comp in (("e_r", self.e_r), ("e_l", self.e_l)):
            if comp.shape != (n, n):
                raise ValueError(f"{name} has shape {comp.shape}, expected {(n, n)}")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.e_r) ** 2 + np.abs(self.e_l) ** 2

    def power(self) -> float:
        """Discrete total power, sum |E|^2 dx dy."""
        return float(self.intensity.sum()) * self.grid.spacing**2


@dataclass(frozen=True)
class StokesField:
    """Intensity s0 plus the raw polarization 3-vector (s1, s2, s3)."""

    grid: SamplingGrid
    s0: np.ndarray
    s_vec: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        if self.s0.shape != (n, n):
            raise ValueError(f"s0 has shape {self.s0.shape}, expected {(n, n)}")
        if self.s_vec.shape != (n, n, 3):
            raise ValueError(f"s_vec has shape {self.s_vec.shape}, expected {(n, n, 3)}")

    @property
    def s1(self) -> np.ndarray:
        return self.s_vec[..., 0]

    @property
    def s2(self) -> np.ndarray:
        return self.s_vec[..., 1]

    @property
    def s3(self) -> np.ndarray:
        return self.s_vec[..., 2]


def rayleigh_range(w0: float, wavelength: float) -> float:
    """z_R = pi w0^2 / lambda."""
    if not (w0 > 0 and wavelength > 0):
        raise ValueError("waist and wavelength must be positive")
    return math.pi * w0 * w0 / wavelength


def beam_width(w0: float, z: float, wavelength: float) -> float:
    """Gaussian beam radius w(z) = w0 sqrt(1 + (z / z_R)^2)."""
    zr = rayleigh_range(w0, wavelength)
    return w0 * math.sqrt(1.0 + (z / zr) ** 2)


def _genlaguerre(p: int, alpha: float, x: np.ndarray) -> np.ndarray:
    # stable upward three-term recurrence; exact for the small p used here
    if p == 0:
        return np.ones_like(x)
    prev = np.ones_like(x)
    cur = 1.0 + alpha - x
    for m in range(2, p + 1):
        prev, cur = cur, ((2.0 * m - 1.0 + alpha - x) * cur - (m - 1.0 + alpha) * prev) / m
    return cur


def lg_mode(spec: BeamSpec, idx: LgIndex, grid: SamplingGrid, z: float = 0.0) -> np.ndarray:
    """Evaluate the normalized mode u_p^ell on the grid at distance z.

    The returned field carries the vortex phase exp(i ell phi), the
    wavefront-curvature phase, and the Gouy phase, but not the plane carrier
    exp(ikz); the split-step kernel supplies the carrier during propagation.
    The discrete L2 norm is ~1 whenever the grid comfortably contains the
    mode, which is enforced by the extent guard below.
    """
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    a = abs(idx.ell)
    w = beam_width(spec.w0, z, spec.wavelength)
    support = 3.0 * w * math.sqrt(2 * idx.p + a + 1)
    if grid.extent < support:
        raise SamplingError(
            f"grid extent {grid.extent:.4g} m cannot contain mode (p={idx.p}, "
            f"ell={idx.ell}) at z={z:.6g} m: needs at least {support:.4g} m"
        )

    zr = spec.z_r
    rho2 = (2.0 / (w * w)) * grid.r**2

    # normalization in log space; plain factorials overflow quickly
    ln_norm = 0.5 * (
        math.log(2.0) + gammaln(idx.p + 1) - math.log(math.pi) - gammaln(idx.p + a + 1)
    )
    norm = math.exp(ln_norm) / w

    if a == 0:
        envelope = np.exp(-0.5 * rho2)
    else:
        # rho^a exp(-rho^2/2) evaluated as one exponential; the log of an
        # exact zero radius maps to -inf and exponentiates back to zero
        with np.errstate(divide="ignore"):
            ln_rho2 = np.log(rho2)
        envelope = np.exp(0.5 * a * ln_rho2 - 0.5 * rho2)

    radial = envelope * _genlaguerre(idx.p, float(a), rho2)

    gouy = (2 * idx.p + a + 1) * math.atan2(z, zr)
    phase = idx.ell * grid.phi - gouy
    if z != 0.0:
        phase = phase + (spec.k * z / (2.0 * (z * z + zr * zr))) * grid.r**2
    return (norm * radial) * np.exp(1j * phase)


def synthesize_vector_beam(spec: BeamSpec, grid: SamplingGrid, z: float = 0.0) -> VectorField:
    """Equal-weight superposition of spec.component0 on |R> and component1 on |L>."""
    amp = math.sqrt(0.5) * np.exp(1j * spec.theta0)
    e_r = amp * lg_mode(spec, spec.component0, grid, z)
    e_l = amp * lg_mode(spec, spec.component1, grid, z)
    return VectorField(grid, e_r, e_l)


def synthesize_skm_beam(n_sk: int, spec: BeamSpec, grid: SamplingGrid) -> VectorField:
    """Waist-plane beam carrying topological charge n_sk.

    Puts the fundamental mode on |R> and the ell = n_sk vortex on |L>, each
    with weight 1/sqrt(2), so the total power is ~1 and the predicted charge
    equals n_sk.
    """
    if n_sk == 0:
        raise ValueError("n_sk = 0 is degenerate: both components would carry equal |ell|")
    s = replace(spec, component0=LgIndex(0, 0), component1=LgIndex(0, int(n_sk)))
    return synthesize_vector_beam(s, grid)


def predicted_nsk(ell0: int, ell1: int) -> int:
    """Topological charge of the (ell0 on |R>, ell1 on |L>) superposition.

    Equals sgn(|ell1| - |ell0|) * (ell1 - ell0); the sign factor sets the
    polarity. Undefined when |ell0| = |ell1| (the texture does not wrap the
    sphere), which is rejected.
    """
    if abs(ell0) == abs(ell1):
        raise ValueError(f"|ell0| = |ell1| = {abs(ell0)} leaves the charge undefined")
    sign = 1 if abs(ell1) > abs(ell0) else -1
    return sign * (ell1 - ell0)


def stokes(field: VectorField) -> StokesField:
    """Pointwise polarization parameters of a vector field.

    In the circular basis with |R> first: s0 = |e_r|^2 + |e_l|^2,
    s1 = 2 Re(e_r* e_l), s2 = 2 Im(e_r* e_l), s3 = |e_r|^2 - |e_l|^2.
    """
    ir = field.e_r.real**2 + field.e_r.imag**2
    il = field.e_l.real**2 + field.e_l.imag**2
    cross = np.conj(field.e_r) * field.e_l
    s_vec = np.stack([2.0 * cross.real, 2.0 * cross.imag, ir - il], axis=-1)
    return StokesField(field.grid, ir + il, s_vec)
