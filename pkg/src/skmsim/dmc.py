"""Discrete memoryless channel model of the symbol link.

Given per-symbol Gaussian fits and a threshold decision scheme, the link
collapses to an M x M transition matrix of normal-CDF differences. This
module builds that matrix, computes its capacity and capacity-achieving
input distribution by Arimoto-Blahut alternating maximization, assigns a
reflected Gray bit mapping, and evaluates the theoretical symbol and bit
error rates.

The Arimoto-Blahut core runs on a stack of channels at once; the
constellation search feeds it thousands of candidate matrices in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .detection import Constellation, DecisionScheme, SymbolChannelStats, solve_boundaries

__all__ = [
    "BitMapping",
    "DmcModel",
    "transition_matrix",
    "arimoto_blahut",
    "gray_mapping",
    "symbol_error_rate",
    "bit_error_rate",
    "model_channel",
]

# inputs whose optimal probability falls below this are effectively unused
DEACTIVATION_THRESHOLD = 1e-12

_ROW_SUM_ATOL = 1e-10
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class BitMapping:
    """Bit words assigned to symbols in sorted order."""

    word_length: int
    words: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise ValueError("bit words must be distinct")
        if len(self.words) != 2**self.word_length:
            raise ValueError(
                f"{self.word_length}-bit mapping needs {2**self.word_length} words, "
                f"got {len(self.words)}"
            )
        for a, b in zip(self.words, self.words[1:]):
            if (a ^ b).bit_count() != 1:
                raise ValueError("adjacent words must differ in exactly one bit")

    def hamming_matrix(self) -> np.ndarray:
        w = np.array(self.words, dtype=np.int64)
        return _popcount(np.bitwise_xor(w[:, None], w[None, :]))

    def word_bits(self, index: int) -> str:
        return format(self.words[index], f"0{self.word_length}b")


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += (x & 1).astype(np.int64)
        x = x >> 1
    return count


def gray_mapping(m: int) -> BitMapping:
    """Binary-reflected Gray code over the sorted symbol positions."""
    if m < 2 or m & (m - 1):
        raise ValueError(f"mapping size must be a power of two >= 2, got {m}")
    k = m.bit_length() - 1
    return BitMapping(word_length=k, words=tuple(i ^ (i >> 1) for i in range(m)))


def transition_matrix(stats: SymbolChannelStats, scheme: DecisionScheme) -> np.ndarray:
    """Row-stochastic decision probabilities under the Gaussian fits.

    Entry (i, j) is the probability that a value drawn from symbol i's
    fitted Gaussian lands in decision region j, i.e. the CDF mass of that
    Gaussian between the region's two thresholds.
    """
    sub = stats.subset(scheme.constellation)
    mu, sigma = sub.means_stds()
    m = scheme.constellation.size
    edges = np.asarray(scheme.boundaries, dtype=float)
    z = (edges[None, :] - mu[:, None]) / sigma[:, None]
    cdf = ndtr(z)
    bounds = np.concatenate(
        [np.zeros((m, 1)), cdf, np.ones((m, 1))], axis=1
    )
    return np.maximum(np.diff(bounds, axis=1), 0.0)


def _validate_stochastic(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("transition probabilities must lie in [0, 1]")
    if not np.allclose(p.sum(axis=1), 1.0, rtol=0.0, atol=_ROW_SUM_ATOL):
        raise ValueError(
            f"rows must sum to 1 within {_ROW_SUM_ATOL}; sums are {p.sum(axis=1)}"
        )
    return p


def _blahut_batch(
    p_mat: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, np.ndarray]:
    """Arimoto-Blahut on a (B, M, M) stack of row-stochastic matrices.

    Returns (capacity lower bounds (B,), input distributions (B, M)).
    Iteration stops once every channel's upper/lower capacity-bound gap
    drops below ``tol`` or after ``max_iter`` sweeps.
    """
    b, m, _ = p_mat.shape
    positive = p_mat > 0
    p_in = np.full((b, m), 1.0 / m)
    lower = np.zeros(b)
    for _ in range(max_iter):
        marginal = np.einsum("bi,bij->bj", p_in, p_mat)
        ratio = p_mat / np.maximum(marginal[:, None, :], _LOG_FLOOR)
        terms = np.where(positive, p_mat * np.log2(np.maximum(ratio, _LOG_FLOOR)), 0.0)
        divergence = terms.sum(axis=2)
        lower = np.einsum("bi,bi->b", p_in, divergence)
        upper = divergence.max(axis=1)
        if np.all(upper - lower < tol):
            break
        p_in = p_in * np.exp2(divergence - upper[:, None])
        p_in /= p_in.sum(axis=1, keepdims=True)
    return lower, p_in


def arimoto_blahut(
    p_mat: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000
) -> tuple[float, np.ndarray]:
    """Capacity (bits per use) and optimal input distribution of one DMC."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    p = _validate_stochastic(p_mat)
    capacity, p_star = _blahut_batch(p[None], tol, max_iter)
    return float(capacity[0]), p_star[0]


def symbol_error_rate(p_mat: np.ndarray, p_in: np.ndarray) -> float:
    """Probability the decided symbol differs from the transmitted one."""
    p_mat = np.asarray(p_mat, dtype=float)
    p_in = np.asarray(p_in, dtype=float)
    return float(np.dot(p_in, 1.0 - np.diag(p_mat)))


def bit_error_rate(p_mat: np.ndarray, p_in: np.ndarray, mapping: BitMapping) -> float:
    """Average fraction of wrong bits under the given bit mapping."""
    p_mat = np.asarray(p_mat, dtype=float)
    p_in = np.asarray(p_in, dtype=float)
    if len(mapping.words) != p_mat.shape[0]:
        raise ValueError("bit mapping size does not match the transition matrix")
    distance = _popcount(
        np.bitwise_xor(
            np.array(mapping.words)[:, None], np.array(mapping.words)[None, :]
        )
    )
    per_symbol = (distance * p_mat).sum(axis=1)
    return float(np.dot(p_in, per_symbol) / mapping.word_length)


@dataclass(frozen=True)
class DmcModel:
    """One fitted channel: matrix, capacity, optimal input, and error rates.

    ``ser``/``ber`` are evaluated at the capacity-achieving distribution;
    the uniform-input values ride along for comparison. ``deactivated``
    lists symbols whose optimal probability is numerically zero.
    """

    constellation: Constellation
    scheme: DecisionScheme
    transition: np.ndarray
    capacity: float
    p_star: np.ndarray
    mapping: BitMapping
    ser: float
    ber: float
    ser_uniform: float
    ber_uniform: float
    deactivated: tuple[int, ...]


def model_channel(
    stats: SymbolChannelStats,
    constellation: Constellation,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> DmcModel:
    """Fit boundaries, build the matrix, and solve for capacity and rates."""
    scheme = solve_boundaries(stats, constellation)
    p_mat = transition_matrix(stats, scheme)
    capacity, p_star = arimoto_blahut(p_mat, tol=tol, max_iter=max_iter)
    mapping = gray_mapping(constellation.size)
    uniform = np.full(constellation.size, 1.0 / constellation.size)
    deactivated = tuple(
        n
        for n, weight in zip(constellation.symbols, p_star)
        if weight < DEACTIVATION_THRESHOLD
    )
    p_mat.setflags(write=False)
    p_star.setflags(write=False)
    return DmcModel(
        constellation=constellation,
        scheme=scheme,
        transition=p_mat,
        capacity=capacity,
        p_star=p_star,
        mapping=mapping,
        ser=symbol_error_rate(p_mat, p_star),
        ber=bit_error_rate(p_mat, p_star, mapping),
        ser_uniform=symbol_error_rate(p_mat, uniform),
        ber_uniform=bit_error_rate(p_mat, uniform, mapping),
        deactivated=deactivated,
    )
