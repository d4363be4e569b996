"""Exhaustive capacity-maximizing constellation selection.

The alphabet has only 16 usable symbols, so every size-M subset can be
scored outright: fit thresholds, build the transition matrix, run the
capacity solver, keep the argmax. All subsets are evaluated in one batched
pass (boundaries, CDF differences, and Arimoto-Blahut sweeps stacked along
a leading axis); the winner is then rebuilt through the scalar path so the
returned model matches a standalone evaluation of that subset.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import ndtr

from .detection import SYMBOL_SET, Constellation, SymbolChannelStats
from .dmc import DmcModel, _blahut_batch, model_channel

__all__ = ["SearchSpace", "RankedSubset", "ConstellationSearch", "optimize_constellation"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchSpace:
    """Subset size M drawn from the full symbol universe."""

    m: int
    universe: tuple[int, ...] = SYMBOL_SET

    def __post_init__(self):
        if self.m < 2 or self.m & (self.m - 1):
            raise ValueError(f"subset size must be a power of two >= 2, got {self.m}")
        if self.m > len(self.universe):
            raise ValueError(
                f"subset size {self.m} exceeds the {len(self.universe)}-symbol universe"
            )

    @property
    def n_subsets(self) -> int:
        from math import comb

        return comb(len(self.universe), self.m)


@dataclass(frozen=True)
class RankedSubset:
    symbols: tuple[int, ...]
    capacity: float


@dataclass(frozen=True)
class ConstellationSearch:
    """Search outcome: the winning model plus the ranked runner-up list."""

    space: SearchSpace
    best: DmcModel
    ranked: tuple[RankedSubset, ...]
    n_evaluated: int
    skipped: tuple[tuple[int, ...], ...]


def _batched_boundaries(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Adjacent-pair density-crossing thresholds for a (B, M) stack of fits.

    Mirrors the scalar pair solver: equal spreads take the midpoint,
    otherwise the quadratic root between the two means, falling back to the
    midpoint when no root lands there.
    """
    m1, m2 = mu[:, :-1], mu[:, 1:]
    s1, s2 = sigma[:, :-1], sigma[:, 1:]
    midpoint = 0.5 * (m1 + m2)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = 1.0 / s1**2 - 1.0 / s2**2
        b = -2.0 * (m1 / s1**2 - m2 / s2**2)
        c = m1**2 / s1**2 - m2**2 / s2**2 + 2.0 * np.log(s1 / s2)
        disc = b * b - 4.0 * a * c
        root = np.sqrt(np.maximum(disc, 0.0))
        lo = (-b - root) / (2.0 * a)
        hi = (-b + root) / (2.0 * a)
    lo_ok = (m1 < lo) & (lo < m2)
    hi_ok = (m1 < hi) & (hi < m2)
    beta = np.where(lo_ok, lo, np.where(hi_ok, hi, midpoint))
    return np.where((s1 == s2) | (disc < 0), midpoint, beta)


def _batched_transitions(mu: np.ndarray, sigma: np.ndarray, edges: np.ndarray) -> np.ndarray:
    z = (edges[:, None, :] - mu[:, :, None]) / sigma[:, :, None]
    cdf = ndtr(z)
    b, m = mu.shape
    bounds = np.concatenate(
        [np.zeros((b, m, 1)), cdf, np.ones((b, m, 1))], axis=2
    )
    return np.maximum(np.diff(bounds, axis=2), 0.0)


def optimize_constellation(
    stats: SymbolChannelStats,
    m: int,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    top_n: int = 10,
) -> ConstellationSearch:
    """Score every size-m subset of the alphabet and return the best model.

    Requires fitted statistics for all 16 symbols. Subsets whose fitted
    means are not ascending cannot be separated by thresholds; they are
    skipped (scored as -inf) and reported. Capacity ties break toward the
    lexicographically smallest subset.
    """
    space = SearchSpace(m)
    missing = [n for n in SYMBOL_SET if n not in stats.symbols]
    if missing:
        raise ValueError(f"no statistics for symbols {missing}")

    ordered = stats.subset(Constellation(SYMBOL_SET))
    mu_all, sigma_all = ordered.means_stds()
    symbols_all = np.array(ordered.symbols)

    subsets = np.array(list(combinations(range(len(SYMBOL_SET)), m)), dtype=np.intp)
    mu = mu_all[subsets]
    sigma = sigma_all[subsets]
    valid = np.all(np.diff(mu, axis=1) > 0, axis=1)

    capacities = np.full(len(subsets), -np.inf)
    if valid.any():
        edges = _batched_boundaries(mu[valid], sigma[valid])
        trans = _batched_transitions(mu[valid], sigma[valid], edges)
        capacities[valid], _ = _blahut_batch(trans, tol, max_iter)

    skipped = tuple(
        tuple(int(s) for s in symbols_all[idx]) for idx in subsets[~valid]
    )
    if skipped:
        log.info(
            "skipped %d of %d size-%d subsets with non-ascending fitted means",
            len(skipped),
            len(subsets),
            m,
        )
    if not valid.any():
        raise ValueError(
            f"every size-{m} subset has non-ascending fitted means; "
            "the channel cannot support threshold detection"
        )

    # stable sort on the negated score keeps ties in enumeration order,
    # which is exactly lexicographic order of the subsets
    order = np.argsort(-capacities, kind="stable")
    ranked = tuple(
        RankedSubset(
            symbols=tuple(int(s) for s in symbols_all[subsets[idx]]),
            capacity=float(capacities[idx]),
        )
        for idx in order[: min(top_n, int(valid.sum()))]
    )
    best = model_channel(
        stats, Constellation(ranked[0].symbols), tol=tol, max_iter=max_iter
    )
    return ConstellationSearch(
        space=space,
        best=best,
        ranked=ranked,
        n_evaluated=len(subsets),
        skipped=skipped,
    )
