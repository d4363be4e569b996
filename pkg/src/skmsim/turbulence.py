"""Refractive-index spectrum, random phase screens, and strength metrics.

The spectrum is Kolmogorov with inner-scale bump and outer-scale rolloff:

    Phi_n(kappa) = 0.033 Cn2 [1 + 1.802 (kappa/kl) - 0.254 (kappa/kl)^(7/6)]
                   * exp(-kappa^2/kl^2) / (kappa^2 + k0^2)^(11/6)

with kl = 3.3/l0 and k0 = 2 pi / L0. One screen condenses the phase
perturbation of a path slab of thickness ``screen_spacing``; screens are
drawn by weighting complex circular-Gaussian spectral noise with
sqrt(2 pi k^2 dz Phi_n dkx dky) and inverse transforming.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import j0

from .fields import SamplingGrid

__all__ = [
    "TurbulenceProfile",
    "PhaseScreen",
    "kolmogorov_spectrum",
    "generate_phase_screen",
    "rytov_variance",
    "classify_regime",
    "phase_structure_function",
    "empirical_structure_function",
]


@dataclass(frozen=True)
class TurbulenceProfile:
    """Constant-strength turbulence along one link, sliced into screens.

    ``screen_spacing`` must exceed the outer scale so each slab holds many
    independent eddies and the thin-screen condensation is justified.
    """

    cn2: float
    l0: float = 5e-3
    L0: float = 20.0
    screen_spacing: float = 50.0
    n_screens: int = 20

    def __post_init__(self):
        if self.cn2 < 0:
            raise ValueError(f"cn2 must be non-negative, got {self.cn2}")
        if not 0 < self.l0 < self.L0:
            raise ValueError(f"need 0 < l0 < L0, got l0={self.l0}, L0={self.L0}")
        if not self.screen_spacing > self.L0:
            raise ValueError(
                f"screen spacing {self.screen_spacing} m must exceed the outer scale "
                f"{self.L0} m for the thin-screen split to hold"
            )
        if self.n_screens < 1:
            raise ValueError(f"n_screens must be positive, got {self.n_screens}")

    @property
    def kappa_l(self) -> float:
        return 3.3 / self.l0

    @property
    def kappa_0(self) -> float:
        return 2.0 * math.pi / self.L0

    @property
    def path_length(self) -> float:
        return self.n_screens * self.screen_spacing


@dataclass(frozen=True)
class PhaseScreen:
    """One random phase realization, radians, zero spatial mean."""

    grid: SamplingGrid
    phase: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        if self.phase.shape != (n, n):
            raise ValueError(f"phase has shape {self.phase.shape}, expected {(n, n)}")


def kolmogorov_spectrum(kappa, profile: TurbulenceProfile) -> np.ndarray:
    """Spectral density of refractive-index fluctuations at |kappa| rad/m."""
    kap = np.asarray(kappa, dtype=float)
    if np.any(kap < 0):
        raise ValueError("kappa must be non-negative")
    x = kap / profile.kappa_l
    bump = 1.0 + 1.802 * x - 0.254 * x ** (7.0 / 6.0)
    return (
        0.033
        * profile.cn2
        * bump
        * np.exp(-(x * x))
        / (kap * kap + profile.kappa_0**2) ** (11.0 / 6.0)
    )


@lru_cache(maxsize=8)
def _spectral_root(profile: TurbulenceProfile, grid: SamplingGrid, k: float) -> np.ndarray:
    # sqrt of the per-mode phase power of one slab, on the FFT frequency grid
    kmag = np.sqrt(grid.k_perp_sq)
    phi = kolmogorov_spectrum(kmag, profile)
    dk = 2.0 * math.pi / grid.extent
    root = np.sqrt(2.0 * math.pi * k * k * profile.screen_spacing * phi * dk * dk)
    root.setflags(write=False)
    return root


def generate_phase_screen(
    profile: TurbulenceProfile,
    grid: SamplingGrid,
    k: float,
    rng: np.random.Generator,
    subharmonics: int = 0,
) -> PhaseScreen:
    """Draw one phase screen from the seeded stream.

    The draw order is fixed (one (2, n, n) standard-normal block per screen)
    so a given stream state always yields the same screen. The DC bin is
    zeroed, making the spatial mean exactly zero. ``subharmonics`` adds
    low-frequency compensation levels below the FFT grid; it defaults off,
    matching the plain generator the link results are built on.
    """
    n = grid.n_points
    g = rng.standard_normal((2, n, n))
    c = (g[0] + 1j * g[1]) * _spectral_root(profile, grid, k)
    c[0, 0] = 0.0
    phase = np.fft.ifft2(c).real * (n * n)

    if subharmonics > 0:
        phase = phase + _subharmonic_layers(profile, grid, k, rng, subharmonics)
        phase -= phase.mean()

    return PhaseScreen(grid, phase)


def _subharmonic_layers(profile, grid, k, rng, levels: int) -> np.ndarray:
    # 3x3 blocks of modes at 1/3^level of the base frequency step
    dk = 2.0 * math.pi / grid.extent
    x = grid.x
    y = grid.y
    out = np.zeros((grid.n_points, grid.n_points))
    for level in range(1, levels + 1):
        step = dk / 3.0**level
        for p in (-1.0, 0.0, 1.0):
            for q in (-1.0, 0.0, 1.0):
                g = rng.standard_normal(2)
                if p == 0.0 and q == 0.0:
                    continue  # DC stays excluded; draw above keeps streams aligned
                kx = p * step
                ky = q * step
                phi = float(kolmogorov_spectrum(math.hypot(kx, ky), profile))
                amp = math.sqrt(2.0 * math.pi * k * k * profile.screen_spacing * phi) * step
                c = (g[0] + 1j * g[1]) * amp
                out += (c * np.exp(1j * (kx * x + ky * y))).real
    return out


def rytov_variance(cn2: float, wavelength: float, distance: float) -> float:
    """Plane-wave scintillation strength 1.23 Cn2 k^(7/6) L^(11/6)."""
    if cn2 < 0 or wavelength <= 0 or distance <= 0:
        raise ValueError("cn2 must be >= 0; wavelength and distance must be positive")
    k = 2.0 * math.pi / wavelength
    return 1.23 * cn2 * k ** (7.0 / 6.0) * distance ** (11.0 / 6.0)


def classify_regime(sigma_r2: float) -> str:
    """Banded strength label: weak below 0.3, strong from 3 up, moderate between."""
    if sigma_r2 < 0:
        raise ValueError(f"variance must be non-negative, got {sigma_r2}")
    if sigma_r2 < 0.3:
        return "weak"
    if sigma_r2 < 3.0:
        return "moderate"
    return "strong"


def phase_structure_function(r, profile: TurbulenceProfile, k: float) -> np.ndarray:
    """Theoretical one-slab phase structure function D(r) by quadrature.

    D(r) = 8 pi^2 k^2 dz * integral of kappa Phi_n(kappa) (1 - J0(kappa r)).
    The integration grid is dense around the outer-scale knee and extends
    well past the inner-scale cutoff, where the integrand is dead.
    """
    k0 = profile.kappa_0
    kl = profile.kappa_l
    head = np.linspace(1e-6, 20.0 * k0, 4001)
    tail = np.linspace(20.0 * k0, 8.0 * kl, 2**19 + 1)[1:]
    kappa = np.concatenate([head, tail])
    weight = kappa * kolmogorov_spectrum(kappa, profile)
    scale = 8.0 * math.pi**2 * k * k * profile.screen_spacing
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.array(
        [scale * np.trapezoid(weight * (1.0 - j0(kappa * rr)), kappa) for rr in rs]
    )
    return out if np.ndim(r) else float(out[0])


def empirical_structure_function(
    phases: np.ndarray, grid: SamplingGrid, lags: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Sample structure function of a screen ensemble at pixel lags.

    ``phases`` is stacked (n_screens, n, n). Only in-grid pixel pairs are
    differenced (no wrap-around), so the estimate stays unbiased for
    screens with added low-frequency layers, which are not periodic.
    Differences are averaged over both axes and the whole ensemble;
    returns (r, D).
    """
    ph = np.asarray(phases)
    if ph.ndim != 3:
        raise ValueError("phases must be stacked (n_screens, n, n)")
    lag_arr = np.asarray(lags, dtype=int)
    if np.any(lag_arr < 1) or np.any(lag_arr >= ph.shape[1]):
        raise ValueError(f"pixel lags must lie in [1, {ph.shape[1] - 1}]")
    d_vals = np.empty(lag_arr.shape, dtype=float)
    for i, lag in enumerate(lag_arr):
        m = int(lag)
        along_x = ph[:, m:, :] - ph[:, :-m, :]
        along_y = ph[:, :, m:] - ph[:, :, :-m]
        d_vals[i] = 0.5 * (np.mean(along_x**2) + np.mean(along_y**2))
    return lag_arr * grid.spacing, d_vals
