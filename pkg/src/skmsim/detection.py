"""Symbol statistics, decision boundaries, and hard decisions.

The measured quantity per trial is a real number clustered around the
transmitted integer. Each symbol's conditional density is modeled as a
Gaussian fitted from samples; maximum-likelihood boundaries between
adjacent symbols sit where the two fitted densities cross. A histogram of
the same samples is kept alongside the fit so non-Gaussian behavior in
strong scattering can be spotted instead of silently absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "SYMBOL_SET",
    "DegenerateStatsError",
    "MeanOrderingError",
    "Constellation",
    "SymbolStats",
    "SymbolChannelStats",
    "DecisionScheme",
    "fit_symbol_stats",
    "solve_boundaries",
    "hard_decide",
]

# modulation alphabet: every nonzero charge reachable with |ell| <= 8
SYMBOL_SET = tuple(range(-8, 0)) + tuple(range(1, 9))

_ALLOWED_SIZES = (2, 4, 8, 16)


class DegenerateStatsError(ValueError):
    """A symbol's samples have zero spread; the Gaussian fit is undefined."""


class MeanOrderingError(ValueError):
    """Fitted means are not ordered like their symbols.

    This signals a channel so degraded that the constellation cannot be
    separated by thresholds at this turbulence level.
    """


@dataclass(frozen=True)
class Constellation:
    """Strictly ascending subset of the symbol alphabet, power-of-two sized."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        symbols = tuple(int(s) for s in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if len(symbols) not in _ALLOWED_SIZES:
            raise ValueError(
                f"constellation size must be one of {_ALLOWED_SIZES}, got {len(symbols)}"
            )
        if any(s not in SYMBOL_SET for s in symbols):
            bad = [s for s in symbols if s not in SYMBOL_SET]
            raise ValueError(f"symbols {bad} lie outside the alphabet {{-8..-1, 1..8}}")
        if any(b <= a for a, b in zip(symbols, symbols[1:])):
            raise ValueError(f"symbols must be strictly ascending, got {symbols}")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def bits_per_symbol(self) -> int:
        return self.size.bit_length() - 1


@dataclass(frozen=True)
class SymbolStats:
    """Gaussian fit plus the raw samples and a histogram for one symbol."""

    symbol: int
    samples: tuple[float, ...]
    mean: float
    std: float
    hist_counts: tuple[int, ...]
    hist_edges: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SymbolChannelStats:
    """Per-symbol conditional statistics for one channel condition."""

    stats: tuple[SymbolStats, ...]

    def __post_init__(self):
        symbols = [s.symbol for s in self.stats]
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"duplicate symbols in stats: {symbols}")

    @property
    def symbols(self) -> tuple[int, ...]:
        return tuple(s.symbol for s in self.stats)

    def for_symbol(self, symbol: int) -> SymbolStats:
        for s in self.stats:
            if s.symbol == symbol:
                return s
        raise KeyError(f"no statistics recorded for symbol {symbol}")

    def subset(self, constellation: Constellation) -> "SymbolChannelStats":
        return SymbolChannelStats(tuple(self.for_symbol(n) for n in constellation.symbols))

    def means_stds(self) -> tuple[np.ndarray, np.ndarray]:
        mu = np.array([s.mean for s in self.stats])
        sigma = np.array([s.std for s in self.stats])
        return mu, sigma


@dataclass(frozen=True)
class DecisionScheme:
    """Threshold detector: region k is (boundaries[k-1], boundaries[k]].

    The first region extends to -infinity and the last to +infinity, so
    every real value decides to exactly one symbol; values landing exactly
    on a boundary belong to the lower region.
    """

    constellation: Constellation
    boundaries: tuple[float, ...]
    means: tuple[float, ...] = field(default=())
    stds: tuple[float, ...] = field(default=())

    def __post_init__(self):
        m = self.constellation.size
        if len(self.boundaries) != m - 1:
            raise ValueError(
                f"{m} symbols need {m - 1} boundaries, got {len(self.boundaries)}"
            )
        b = self.boundaries
        if any(v2 <= v1 for v1, v2 in zip(b, b[1:])):
            raise ValueError(f"boundaries must be strictly increasing, got {b}")


def _fd_histogram(x: np.ndarray) -> tuple[tuple[int, ...], tuple[float, ...]]:
    # Freedman-Diaconis width; numpy falls back sanely when IQR is tiny
    counts, edges = np.histogram(x, bins="fd")
    return tuple(int(c) for c in counts), tuple(float(e) for e in edges)


def fit_symbol_stats(samples: Mapping[int, Sequence[float]]) -> SymbolChannelStats:
    """Fit one Gaussian per symbol from its measured values.

    ``samples`` maps each symbol to its list of measurements (at least two
    per symbol). The mean is the sample mean and the spread the unbiased
    sample standard deviation; the raw values and a histogram ride along.
    """
    if not samples:
        raise ValueError("no samples given")
    fitted = []
    for symbol in sorted(samples):
        x = np.asarray(samples[symbol], dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError(
                f"symbol {symbol} needs at least 2 samples, got {x.size}"
            )
        std = float(x.std(ddof=1))
        if std == 0.0:
            raise DegenerateStatsError(
                f"symbol {symbol}: all {x.size} samples are identical; "
                "increase the trial count to estimate a spread"
            )
        counts, edges = _fd_histogram(x)
        fitted.append(
            SymbolStats(
                symbol=int(symbol),
                samples=tuple(float(v) for v in x),
                mean=float(x.mean()),
                std=std,
                hist_counts=counts,
                hist_edges=edges,
            )
        )
    return SymbolChannelStats(tuple(fitted))


def _pair_boundary(mu1: float, s1: float, mu2: float, s2: float) -> float:
    """Crossing point of two Gaussian densities between their means.

    Equal spreads give the midpoint. Otherwise the log-density equality is
    a quadratic; the root inside (mu1, mu2) is the maximum-likelihood
    threshold, and if neither root lands there the midpoint is used.
    """
    midpoint = 0.5 * (mu1 + mu2)
    if s1 == s2:
        return midpoint
    a = 1.0 / s1**2 - 1.0 / s2**2
    b = -2.0 * (mu1 / s1**2 - mu2 / s2**2)
    c = mu1**2 / s1**2 - mu2**2 / s2**2 + 2.0 * math.log(s1 / s2)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return midpoint
    root = math.sqrt(disc)
    for beta in ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a)):
        if mu1 < beta < mu2:
            return beta
    return midpoint


def solve_boundaries(
    stats: SymbolChannelStats, constellation: Constellation
) -> DecisionScheme:
    """Maximum-likelihood thresholds between adjacent fitted Gaussians.

    Symbols are taken equally probable, so each threshold solves
    f(x | n_k) = f(x | n_{k+1}) for the two adjacent fits. Fitted means
    must be ordered like the symbols; a violation raises MeanOrderingError
    because no threshold detector can separate such a channel.
    """
    sub = stats.subset(constellation)
    mu, sigma = sub.means_stds()
    if np.any(np.diff(mu) <= 0):
        order = {n: m for n, m in zip(constellation.symbols, mu)}
        raise MeanOrderingError(
            f"fitted means are not ascending with the symbols: {order}"
        )
    if np.any(sigma <= 0):
        raise DegenerateStatsError("fitted spreads must be positive")
    boundaries = tuple(
        _pair_boundary(mu[i], sigma[i], mu[i + 1], sigma[i + 1])
        for i in range(len(mu) - 1)
    )
    return DecisionScheme(
        constellation=constellation,
        boundaries=boundaries,
        means=tuple(float(m) for m in mu),
        stds=tuple(float(s) for s in sigma),
    )


def hard_decide(n_tilde, scheme: DecisionScheme):
    """Map measured values to symbols; regions are closed on the right.

    Accepts a scalar or an array and returns the matching shape. A value
    equal to a boundary decides to the lower symbol.
    """
    symbols = np.asarray(scheme.constellation.symbols)
    edges = np.asarray(scheme.boundaries)
    x = np.asarray(n_tilde, dtype=float)
    # side='left': index of first edge >= x, so x == edge stays low
    idx = np.searchsorted(edges, x, side="left")
    out = symbols[idx]
    if np.isscalar(n_tilde) or x.ndim == 0:
        return int(out)
    return out
