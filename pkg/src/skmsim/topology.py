"""Topological charge of polarization textures and receiver-side masking.

The charge is the signed number of times the normalized polarization vector
wraps the sphere over the beam cross section, (1/4pi) times the integral of
S . (dS/dx x dS/dy). Two discretizations are provided:

* ``plaquette`` (default): sums the signed spherical areas of the triangles
  spanned by the unit vectors at each cell's corners. Being geometric, it is
  exact for any texture the grid resolves and degrades gracefully when the
  polarization transition ring is only a few pixels wide.
* ``central``: the literal integrand with central finite differences in the
  interior and one-sided differences at the edges. Kept as a cross check;
  it needs noticeably finer sampling for the same accuracy.

Cells touching pixels whose raw Stokes norm fell below the validity floor
are excluded from the sum: the placeholder vector written there carries no
physical orientation, and binary masks zero those pixels anyway.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import ndimage

from .fields import SamplingGrid, StokesField

__all__ = [
    "FOUR_PI",
    "SCALED_MEAN_ALPHAS",
    "TOP_FRACTION_EPSILONS",
    "SUPER_GAUSSIAN_QS",
    "MaskSpec",
    "NormalizedStokesField",
    "SkyrmionDensityField",
    "normalize_stokes",
    "skyrmion_density",
    "build_mask",
    "top_fraction_threshold",
    "plaquette_solid_angles",
    "masked_skyrmion_number",
    "threshold_sweep",
    "optimize_mask_parameter",
]

FOUR_PI = 4.0 * np.pi

# relative cutoff defining "lit" pixels for the mean-intensity reference
NONZERO_FLOOR = 1e-12

# default parameter grids for mask tuning
SCALED_MEAN_ALPHAS = tuple(round(0.05 * i, 2) for i in range(1, 41))
TOP_FRACTION_EPSILONS = tuple(round(0.5 + 0.025 * i, 3) for i in range(21))
SUPER_GAUSSIAN_QS = (1.0, 2.0, 4.0, 8.0)

_POLE = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class MaskSpec:
    """Receiver-side intensity mask.

    kinds:
      ``none``           flat weight of one everywhere
      ``scaled-mean``    binary, keep I >= alpha * I_avg   (needs alpha)
      ``top-fraction``   binary, keep the brightest pixels that accumulate a
                         fraction epsilon of the total power, ties included
                         (needs epsilon in (0, 1])
      ``super-gaussian`` soft, W = 1 - exp(-(I / (alpha I_avg))^(2q))
                         (needs alpha and q)

    I_avg is the mean intensity over lit pixels, i.e. those above
    ``1e-12 * max(I)``; on a simulation grid every pixel is technically
    nonzero, so a relative floor makes the average well defined.
    """

    kind: str
    alpha: float | None = None
    epsilon: float | None = None
    q: float | None = None

    _REQUIRED = {
        "none": frozenset(),
        "scaled-mean": frozenset({"alpha"}),
        "top-fraction": frozenset({"epsilon"}),
        "super-gaussian": frozenset({"alpha", "q"}),
    }

    def __post_init__(self):
        if self.kind not in self._REQUIRED:
            raise ValueError(
                f"unknown mask kind {self.kind!r}; expected one of {sorted(self._REQUIRED)}"
            )
        need = self._REQUIRED[self.kind]
        given = {n for n in ("alpha", "epsilon", "q") if getattr(self, n) is not None}
        if given != need:
            raise ValueError(
                f"mask kind {self.kind!r} takes parameters {sorted(need)}, got {sorted(given)}"
            )
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.epsilon is not None and not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.q is not None and not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")

    @property
    def label(self) -> str:
        """Short stable identifier used in sample stores and reports."""
        if self.kind == "none":
            return "none"
        if self.kind == "scaled-mean":
            return f"scaled-mean:a={self.alpha:g}"
        if self.kind == "top-fraction":
            return f"top-fraction:e={self.epsilon:g}"
        return f"super-gaussian:a={self.alpha:g}:q={self.q:g}"

    @classmethod
    def from_label(cls, label: str) -> "MaskSpec":
        kind, _, rest = label.partition(":")
        params: dict[str, float] = {}
        if rest:
            for part in rest.split(":"):
                key, _, val = part.partition("=")
                name = {"a": "alpha", "e": "epsilon", "q": "q"}.get(key)
                if name is None or not val:
                    raise ValueError(f"cannot parse mask label {label!r}")
                params[name] = float(val)
        return cls(kind, **params)


@dataclass(frozen=True)
class NormalizedStokesField:
    """Unit polarization vectors plus a per-pixel validity flag."""

    grid: SamplingGrid
    s_hat: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        if self.s_hat.shape != (n, n, 3):
            raise ValueError(f"s_hat has shape {self.s_hat.shape}, expected {(n, n, 3)}")
        if self.valid.shape != (n, n):
            raise ValueError(f"valid has shape {self.valid.shape}, expected {(n, n)}")


@dataclass(frozen=True)
class SkyrmionDensityField:
    grid: SamplingGrid
    density: np.ndarray


def normalize_stokes(raw: StokesField, floor: float = 0.0) -> NormalizedStokesField:
    """Project the raw polarization vector onto the unit sphere.

    Pixels whose vector norm falls below ``floor * max(s0)`` (or is exactly
    zero) are flagged invalid and filled with the north-pole placeholder
    (0, 0, 1). Propagated fields should use a small positive floor so the
    numerically empty region around the beam, which holds only transform
    round-off, does not masquerade as polarization texture.
    """
    if floor < 0:
        raise ValueError(f"floor must be non-negative, got {floor}")
    norm = np.linalg.norm(raw.s_vec, axis=-1)
    if not np.any(norm > 0.0):
        raise ValueError("field carries no polarization texture (all-zero Stokes vector)")
    threshold = floor * float(raw.s0.max())
    valid = (norm >= threshold) & (norm > 0.0)
    s_hat = np.broadcast_to(_POLE, raw.s_vec.shape).copy()
    s_hat[valid] = raw.s_vec[valid] / norm[valid, None]
    return NormalizedStokesField(raw.grid, s_hat, valid)


def skyrmion_density(s: NormalizedStokesField) -> SkyrmionDensityField:
    """Literal charge density S . (dS/dx x dS/dy) by finite differences.

    Central differences in the grid interior, one sided at the edges. The
    density is evaluated everywhere, including placeholder pixels; consumers
    weight or exclude those as appropriate.
    """
    d = s.grid.spacing
    ds_dx = np.gradient(s.s_hat, d, axis=0)
    ds_dy = np.gradient(s.s_hat, d, axis=1)
    density = np.einsum("xyi,xyi->xy", s.s_hat, np.cross(ds_dx, ds_dy))
    return SkyrmionDensityField(s.grid, density)


def top_fraction_threshold(intensity: np.ndarray, epsilon: float) -> float:
    """Smallest intensity kept when the brightest pixels accumulate epsilon of the power."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    flat = np.sort(np.asarray(intensity, dtype=float).ravel())[::-1]
    csum = np.cumsum(flat)
    total = csum[-1]
    if total <= 0.0:
        raise ValueError("intensity is identically zero")
    k = int(np.searchsorted(csum, epsilon * total, side="left"))
    k = min(k, flat.size - 1)
    return float(flat[k])


def build_mask(intensity: np.ndarray, spec: MaskSpec) -> np.ndarray:
    """Weight array W in [0, 1] for the given mask, from measured intensity."""
    i_arr = np.asarray(intensity, dtype=float)
    if i_arr.min() < 0:
        raise ValueError("intensity must be non-negative")
    if spec.kind == "none":
        return np.ones_like(i_arr)
    peak = float(i_arr.max())
    if peak == 0.0:
        raise ValueError("intensity is identically zero")
    if spec.kind == "top-fraction":
        return (i_arr >= top_fraction_threshold(i_arr, spec.epsilon)).astype(float)
    lit = i_arr > NONZERO_FLOOR * peak
    i_avg = float(i_arr[lit].mean())
    if spec.kind == "scaled-mean":
        return (i_arr >= spec.alpha * i_avg).astype(float)
    # super-gaussian: overflow in the power ratio saturates cleanly to W = 1
    with np.errstate(over="ignore"):
        t = (i_arr / (spec.alpha * i_avg)) ** (2.0 * spec.q)
    return 1.0 - np.exp(-t)


def scaled_mean_reference(intensity: np.ndarray) -> float:
    """Mean intensity over lit pixels, the I_avg the binary thresholds scale with."""
    i_arr = np.asarray(intensity, dtype=float)
    peak = float(i_arr.max())
    if peak <= 0.0:
        raise ValueError("intensity is identically zero")
    return float(i_arr[i_arr > NONZERO_FLOOR * peak].mean())


def _triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    # signed solid angle of the spherical triangle (a, b, c)
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = (
        1.0
        + np.einsum("...i,...i->...", a, b)
        + np.einsum("...i,...i->...", b, c)
        + np.einsum("...i,...i->...", c, a)
    )
    return 2.0 * np.arctan2(num, den)


def plaquette_solid_angles(
    s: NormalizedStokesField, aperture: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Signed sphere coverage of every grid cell, plus its usability flag.

    Each cell (i, j) spans corners (i, j), (i+1, j), (i+1, j+1), (i, j+1),
    traversed counterclockwise in the (x, y) plane and split into two
    spherical triangles. Returns ``(omega, ok)`` where ``omega`` holds the
    signed solid angles, shape (n-1, n-1), and ``ok`` flags cells whose four
    corners are all valid (and inside the aperture when one is given).
    The unmasked charge is ``omega[ok].sum() / (4 pi)``.
    """
    sh = s.s_hat
    a = sh[:-1, :-1]
    b = sh[1:, :-1]
    c = sh[1:, 1:]
    d = sh[:-1, 1:]
    omega = _triangle_area(a, b, c) + _triangle_area(a, c, d)
    usable = s.valid if aperture is None else (s.valid & aperture)
    ok = usable[:-1, :-1] & usable[1:, :-1] & usable[1:, 1:] & usable[:-1, 1:]
    return omega, ok


def _corner_mean(w: np.ndarray) -> np.ndarray:
    return 0.25 * (w[:-1, :-1] + w[1:, :-1] + w[1:, 1:] + w[:-1, 1:])


def masked_skyrmion_number(
    s: NormalizedStokesField,
    w: np.ndarray | None = None,
    aperture: np.ndarray | None = None,
    method: str = "plaquette",
) -> float:
    """Weighted topological charge (1/4pi) sum of W times the charge density.

    ``w`` is a pixel weight array from :func:`build_mask` (None means no
    mask), ``aperture`` an optional boolean region restricting the
    integration, and ``method`` selects the discretization described in the
    module docstring. With no mask and the full grid this is the plain
    charge integral.
    """
    if w is not None and w.shape != s.valid.shape:
        raise ValueError(f"weight shape {w.shape} does not match grid {s.valid.shape}")
    if aperture is not None and aperture.shape != s.valid.shape:
        raise ValueError(f"aperture shape {aperture.shape} does not match grid")

    if method == "plaquette":
        omega, ok = plaquette_solid_angles(s, aperture)
        if w is None:
            return float(omega[ok].sum() / FOUR_PI)
        return float((omega * ok * _corner_mean(w)).sum() / FOUR_PI)

    if method == "central":
        density = skyrmion_density(s).density
        usable = s.valid if aperture is None else (s.valid & aperture)
        # drop pixels whose difference stencil touches an invalid neighbor;
        # outside-the-grid neighbors count as fine (one-sided stencils)
        keep = ndimage.binary_erosion(usable, structure=np.ones((3, 3)), border_value=1)
        total = density[keep].sum() if w is None else (w * density)[keep].sum()
        return float(total * s.grid.spacing**2 / FOUR_PI)

    raise ValueError(f"unknown integration method {method!r}")


def threshold_sweep(
    omega: np.ndarray,
    ok: np.ndarray,
    intensity: np.ndarray,
    thresholds: np.ndarray,
) -> np.ndarray:
    """Masked charge for a family of binary masks W = [I >= t] on one texture.

    Produces exactly the same numbers as running :func:`build_mask` plus
    :func:`masked_skyrmion_number` per threshold, but shares the solid-angle
    field across all candidates: the corner-mean weighting splits into four
    per-corner indicator sums, each of which becomes a sorted cumulative sum
    looked up per threshold. Cost is O(N^2 log N + T log N) instead of
    O(T N^2).
    """
    t = np.asarray(thresholds, dtype=float)
    base = 0.25 * (omega * ok)
    out = np.zeros(t.shape, dtype=float)
    for corner in (
        intensity[:-1, :-1],
        intensity[1:, :-1],
        intensity[1:, 1:],
        intensity[:-1, 1:],
    ):
        ci = corner.ravel()
        order = np.argsort(ci, kind="stable")
        sorted_i = ci[order]
        suffix = np.cumsum(base.ravel()[order][::-1])[::-1]
        idx = np.searchsorted(sorted_i, t, side="left")
        out += np.where(idx < sorted_i.size, suffix[np.minimum(idx, sorted_i.size - 1)], 0.0)
    return out / FOUR_PI


def optimize_mask_parameter(
    turbulent_samples: Callable[[float], Mapping[int, np.ndarray]],
    vacuum_reference: Callable[[float], Mapping[int, float]],
    search_grid: Iterable[float],
) -> float:
    """Mask parameter minimizing the mean squared deviation from vacuum.

    ``turbulent_samples(theta)`` maps each symbol to its array of masked
    charge samples under parameter theta; ``vacuum_reference(theta)`` maps
    each symbol to the masked charge of the vacuum-propagated beam under the
    same mask, so the reference carries the same mask-induced bias. Returns
    the candidate with the smallest mean over all symbols and realizations
    of (sample - reference)^2; ties go to the smallest parameter.
    """
    candidates = sorted(search_grid)
    if not candidates:
        raise ValueError("empty parameter search grid")
    best = None
    best_mse = np.inf
    for theta in candidates:
        samples = turbulent_samples(theta)
        refs = vacuum_reference(theta)
        if set(samples) != set(refs):
            raise ValueError("turbulent and vacuum evaluators disagree on the symbol set")
        if not samples:
            raise ValueError("evaluators returned no symbols")
        total = 0.0
        count = 0
        for sym, values in samples.items():
            arr = np.asarray(values, dtype=float)
            if arr.size == 0:
                raise ValueError(f"empty sample set for symbol {sym}")
            total += float(((arr - refs[sym]) ** 2).sum())
            count += arr.size
        mse = total / count
        if mse < best_mse:
            best, best_mse = theta, mse
    return best
