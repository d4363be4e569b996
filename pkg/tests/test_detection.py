"""Gaussian symbol fits, threshold placement, and hard decisions."""
import math

import numpy as np
import pytest

from skmsim.detection import (
    Constellation,
    DecisionScheme,
    DegenerateStatsError,
    MeanOrderingError,
    SymbolChannelStats,
    SymbolStats,
    fit_symbol_stats,
    hard_decide,
    solve_boundaries,
)


def make_stats(pairs):
    """SymbolChannelStats straight from (symbol, mean, std) triples."""
    return SymbolChannelStats(
        tuple(
            SymbolStats(
                symbol=s, samples=(m, m), mean=m, std=sd, hist_counts=(2,),
                hist_edges=(m - 1.0, m + 1.0),
            )
            for s, m, sd in pairs
        )
    )


class TestFit:
    def test_two_point_sample(self):
        out = fit_symbol_stats({3: [0.0, 2.0]})
        s = out.for_symbol(3)
        assert s.mean == pytest.approx(1.0)
        assert s.std == pytest.approx(math.sqrt(2.0))  # unbiased: var = 2
        assert s.samples == (0.0, 2.0)
        assert s.count == 2
        assert sum(s.hist_counts) == 2

    def test_symbols_come_back_sorted(self):
        out = fit_symbol_stats({4: [3.9, 4.1], -2: [-2.2, -1.8], 1: [0.9, 1.1]})
        assert out.symbols == (-2, 1, 4)

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            fit_symbol_stats({1: [1.0]})

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            fit_symbol_stats({})

    def test_zero_spread_is_degenerate(self):
        with pytest.raises(DegenerateStatsError):
            fit_symbol_stats({2: [2.0, 2.0, 2.0]})

    def test_unknown_symbol_lookup(self):
        out = fit_symbol_stats({1: [0.9, 1.1]})
        with pytest.raises(KeyError):
            out.for_symbol(5)

    def test_duplicate_symbols_rejected(self):
        s = fit_symbol_stats({1: [0.9, 1.1]}).stats[0]
        with pytest.raises(ValueError):
            SymbolChannelStats((s, s))


class TestConstellation:
    def test_properties(self):
        c = Constellation((1, 2, 3, 4, 5, 6, 7, 8))
        assert c.size == 8
        assert c.bits_per_symbol == 3

    def test_size_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            Constellation((1, 2, 3))
        with pytest.raises(ValueError):
            Constellation(tuple())

    def test_alphabet_membership(self):
        with pytest.raises(ValueError):
            Constellation((0, 1, 2, 3))
        with pytest.raises(ValueError):
            Constellation((1, 2, 3, 9))

    def test_strict_ascent(self):
        with pytest.raises(ValueError):
            Constellation((1, 2, 2, 4))
        with pytest.raises(ValueError):
            Constellation((4, 3, 2, 1))


class TestBoundaries:
    def test_equal_spreads_give_midpoints(self):
        stats = make_stats([(1, 1.0, 0.5), (2, 2.0, 0.5), (3, 3.0, 0.5), (4, 4.0, 0.5)])
        scheme = solve_boundaries(stats, Constellation((1, 2, 3, 4)))
        assert scheme.boundaries == pytest.approx((1.5, 2.5, 3.5))
        assert scheme.means == pytest.approx((1.0, 2.0, 3.0, 4.0))
        assert scheme.stds == pytest.approx((0.5, 0.5, 0.5, 0.5))

    def test_unequal_spreads_match_density_crossing(self):
        stats = make_stats([(1, 0.0, 0.1), (2, 2.0, 0.3)])
        scheme = solve_boundaries(stats, Constellation((1, 2)))
        beta = scheme.boundaries[0]
        assert beta == pytest.approx(0.5163020138920636, abs=1e-12)

        # independent oracle: bisection on the log-density difference
        def diff(x):
            return (
                -((x - 0.0) ** 2) / (2 * 0.1**2)
                - math.log(0.1)
                + (x - 2.0) ** 2 / (2 * 0.3**2)
                + math.log(0.3)
            )

        lo, hi = 1e-9, 2.0 - 1e-9
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if diff(lo) * diff(mid) <= 0:
                hi = mid
            else:
                lo = mid
        assert beta == pytest.approx(0.5 * (lo + hi), abs=1e-9)
        # both densities really are equal there
        f1 = math.exp(-((beta - 0.0) ** 2) / (2 * 0.1**2)) / 0.1
        f2 = math.exp(-((beta - 2.0) ** 2) / (2 * 0.3**2)) / 0.3
        assert f1 == pytest.approx(f2, rel=1e-9)

    def test_boundary_lies_between_the_means(self):
        stats = make_stats([(1, 1.0, 2.0), (4, 1.5, 0.05)])
        scheme = solve_boundaries(stats, Constellation((1, 4)))
        assert 1.0 < scheme.boundaries[0] < 1.5

    def test_subset_selection(self):
        stats = make_stats(
            [(s, float(s), 0.2) for s in (-8, -4, -2, -1, 1, 2, 4, 8)]
        )
        scheme = solve_boundaries(stats, Constellation((-4, -1, 2, 8)))
        assert len(scheme.boundaries) == 3
        assert scheme.boundaries == pytest.approx((-2.5, 0.5, 5.0))

    def test_unordered_means_rejected(self):
        stats = make_stats([(1, 2.0, 0.1), (2, 1.0, 0.1)])
        with pytest.raises(MeanOrderingError):
            solve_boundaries(stats, Constellation((1, 2)))

    def test_nonpositive_spread_rejected(self):
        stats = make_stats([(1, 1.0, 0.0), (2, 2.0, 0.1)])
        with pytest.raises(DegenerateStatsError):
            solve_boundaries(stats, Constellation((1, 2)))

    def test_missing_symbol_rejected(self):
        stats = make_stats([(1, 1.0, 0.1), (2, 2.0, 0.1)])
        with pytest.raises(KeyError):
            solve_boundaries(stats, Constellation((1, 8)))

    def test_shift_equivariance(self):
        base = [(1, 1.0, 0.3), (2, 2.2, 0.4), (3, 3.1, 0.2), (4, 4.5, 0.6)]
        shifted = [(s, m + 7.25, sd) for s, m, sd in base]
        c = Constellation((1, 2, 3, 4))
        b0 = solve_boundaries(make_stats(base), c).boundaries
        b1 = solve_boundaries(make_stats(shifted), c).boundaries
        assert np.allclose(np.asarray(b1) - np.asarray(b0), 7.25, atol=1e-9)


class TestDecisionScheme:
    def test_boundary_count_enforced(self):
        with pytest.raises(ValueError):
            DecisionScheme(Constellation((1, 2, 3, 4)), (1.5, 2.5))

    def test_boundaries_must_increase(self):
        with pytest.raises(ValueError):
            DecisionScheme(Constellation((1, 2, 3, 4)), (1.5, 1.5, 2.5))


class TestHardDecide:
    SCHEME = DecisionScheme(Constellation((1, 2, 4, 8)), (1.5, 3.0, 6.0))

    def test_means_decide_to_their_own_symbol(self):
        got = hard_decide(np.array([1.0, 2.0, 4.0, 8.0]), self.SCHEME)
        assert np.array_equal(got, [1, 2, 4, 8])

    def test_boundary_values_go_low(self):
        assert hard_decide(1.5, self.SCHEME) == 1
        assert hard_decide(3.0, self.SCHEME) == 2
        assert hard_decide(6.0, self.SCHEME) == 4

    def test_extremes_clamp_to_end_regions(self):
        assert hard_decide(-1e9, self.SCHEME) == 1
        assert hard_decide(1e9, self.SCHEME) == 8

    def test_scalar_input_gives_python_int(self):
        out = hard_decide(2.4, self.SCHEME)
        assert isinstance(out, int) and out == 2

    def test_every_value_lands_in_exactly_one_region(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-5.0, 12.0, 1000)
        got = hard_decide(x, self.SCHEME)
        edges = np.array([-np.inf, 1.5, 3.0, 6.0, np.inf])
        symbols = np.array([1, 2, 4, 8])
        for k in range(4):
            inside = (x > edges[k]) & (x <= edges[k + 1])
            assert np.all(got[inside] == symbols[k])
