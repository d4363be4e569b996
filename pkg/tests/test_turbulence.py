"""Spectrum, phase screens, and turbulence-strength bookkeeping."""
import math

import numpy as np
import pytest

from skmsim.fields import SamplingGrid
from skmsim.turbulence import (
    PhaseScreen,
    TurbulenceProfile,
    classify_regime,
    empirical_structure_function,
    generate_phase_screen,
    kolmogorov_spectrum,
    phase_structure_function,
    rytov_variance,
)

K_NUMBER = 2.0 * math.pi / 850e-9
GRID = SamplingGrid(128, 0.08)


def profile(**kw):
    kw.setdefault("cn2", 1e-14)
    return TurbulenceProfile(**kw)


class TestProfile:
    def test_scale_wavenumbers(self):
        p = profile()
        assert p.kappa_l == pytest.approx(3.3 / 5e-3, rel=1e-12)
        assert p.kappa_0 == pytest.approx(2.0 * math.pi / 20.0, rel=1e-12)
        assert p.path_length == pytest.approx(1000.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            profile(cn2=-1e-15)
        with pytest.raises(ValueError):
            profile(l0=25.0, L0=20.0)
        with pytest.raises(ValueError):
            profile(screen_spacing=10.0)  # below the outer scale
        with pytest.raises(ValueError):
            profile(n_screens=0)


class TestSpectrum:
    def test_matches_direct_formula(self):
        p = profile(cn2=3e-15)
        for kappa in (0.5, 10.0, 200.0, 660.0):
            x = kappa * p.l0 / 3.3
            expected = (
                0.033
                * p.cn2
                * (1.0 + 1.802 * x - 0.254 * x ** (7.0 / 6.0))
                * math.exp(-(x * x))
                / (kappa**2 + (2.0 * math.pi / p.L0) ** 2) ** (11.0 / 6.0)
            )
            assert kolmogorov_spectrum(kappa, p) == pytest.approx(expected, rel=1e-12)

    def test_linear_in_strength(self):
        kappa = np.geomspace(0.1, 1000.0, 30)
        weak = kolmogorov_spectrum(kappa, profile(cn2=1e-15))
        strong = kolmogorov_spectrum(kappa, profile(cn2=5e-15))
        assert np.allclose(strong, 5.0 * weak, rtol=1e-12)

    def test_zero_strength_is_dead(self):
        kappa = np.geomspace(0.1, 1000.0, 10)
        assert np.all(kolmogorov_spectrum(kappa, profile(cn2=0.0)) == 0.0)

    def test_inner_scale_kills_high_frequencies(self):
        p = profile()
        assert kolmogorov_spectrum(5.0 * p.kappa_l, p) < 1e-6 * kolmogorov_spectrum(
            p.kappa_l, p
        )

    def test_negative_kappa_rejected(self):
        with pytest.raises(ValueError):
            kolmogorov_spectrum(np.array([1.0, -2.0]), profile())


class TestRytov:
    def test_link_strength_triple(self):
        # the three standard link strengths land on 0.04 / 1.0 / 4.0
        for cn2, target in ((1e-15, 0.04), (2.5e-14, 1.0), (1e-13, 4.0)):
            assert rytov_variance(cn2, 850e-9, 1000.0) == pytest.approx(target, rel=0.02)

    def test_matches_direct_formula(self):
        got = rytov_variance(2e-14, 1.3e-6, 750.0)
        k = 2.0 * math.pi / 1.3e-6
        assert got == pytest.approx(1.23 * 2e-14 * k ** (7.0 / 6.0) * 750.0 ** (11.0 / 6.0), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            rytov_variance(-1e-15, 850e-9, 1000.0)
        with pytest.raises(ValueError):
            rytov_variance(1e-15, 0.0, 1000.0)
        with pytest.raises(ValueError):
            rytov_variance(1e-15, 850e-9, -5.0)


class TestClassify:
    def test_bands(self):
        assert classify_regime(0.0) == "weak"
        assert classify_regime(0.04) == "weak"
        assert classify_regime(0.3) == "moderate"
        assert classify_regime(1.0) == "moderate"
        assert classify_regime(2.999) == "moderate"
        assert classify_regime(3.0) == "strong"
        assert classify_regime(40.0) == "strong"

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            classify_regime(-0.1)


class TestScreenGeneration:
    def test_deterministic_for_one_stream_state(self):
        a = generate_phase_screen(profile(), GRID, K_NUMBER, np.random.default_rng(7))
        b = generate_phase_screen(profile(), GRID, K_NUMBER, np.random.default_rng(7))
        assert np.array_equal(a.phase, b.phase)

    def test_zero_strength_gives_flat_screen(self):
        s = generate_phase_screen(profile(cn2=0.0), GRID, K_NUMBER, np.random.default_rng(1))
        assert np.all(s.phase == 0.0)

    def test_spatial_mean_is_zeroed(self):
        for seed in (0, 3, 9):
            s = generate_phase_screen(profile(), GRID, K_NUMBER, np.random.default_rng(seed))
            assert abs(s.phase.mean()) < 1e-12

    def test_strength_scaling_is_pointwise_exact(self):
        # quadrupling cn2 doubles every amplitude, bit for bit
        a = generate_phase_screen(profile(cn2=1e-14), GRID, K_NUMBER, np.random.default_rng(7))
        b = generate_phase_screen(profile(cn2=4e-14), GRID, K_NUMBER, np.random.default_rng(7))
        assert np.array_equal(b.phase, 2.0 * a.phase)

    def test_slab_thickness_scaling_is_pointwise_exact(self):
        a = generate_phase_screen(
            profile(screen_spacing=50.0), GRID, K_NUMBER, np.random.default_rng(7)
        )
        b = generate_phase_screen(
            profile(screen_spacing=200.0), GRID, K_NUMBER, np.random.default_rng(7)
        )
        assert np.array_equal(b.phase, 2.0 * a.phase)

    def test_draws_average_away(self):
        # independent draws: the 100-screen mean shrinks like 1/sqrt(100)
        rng = np.random.default_rng(5)
        screens = np.stack(
            [generate_phase_screen(profile(), GRID, K_NUMBER, rng).phase for _ in range(100)]
        )
        single = math.sqrt(float((screens**2).mean()))
        pooled = math.sqrt(float((screens.mean(axis=0) ** 2).mean()))
        assert pooled < 0.3 * single

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            PhaseScreen(GRID, np.zeros((64, 64)))


class TestStructureFunction:
    def test_white_noise_oracle(self):
        # iid pixels: D(r) = 2 var for every lag
        rng = np.random.default_rng(2)
        stack = rng.normal(0.0, 1.5, size=(60, 64, 64))
        grid = SamplingGrid(64, 0.01)
        r, d = empirical_structure_function(stack, grid, np.array([1, 5, 20]))
        assert np.allclose(r, np.array([1, 5, 20]) * 0.01)
        assert np.allclose(d, 2.0 * 1.5**2, rtol=0.05)

    def test_lag_validation(self):
        stack = np.zeros((3, 16, 16))
        grid = SamplingGrid(16, 0.01)
        with pytest.raises(ValueError):
            empirical_structure_function(stack, grid, np.array([0]))
        with pytest.raises(ValueError):
            empirical_structure_function(stack, grid, np.array([16]))
        with pytest.raises(ValueError):
            empirical_structure_function(stack[0], grid, np.array([2]))

    def test_theory_curve_shape(self):
        p = profile()
        r = np.array([0.01, 0.1, 0.5, 2.0, 10.0, 50.0, 100.0])
        d = phase_structure_function(r, p, K_NUMBER)
        assert np.all(np.diff(d) > 0.0)
        # saturates once separations dwarf the outer scale
        assert d[-1] / d[-2] < 1.05
        assert isinstance(phase_structure_function(1.0, p, K_NUMBER), float)

    def test_screens_match_theory_in_band(self):
        # one-slab screens against the quadrature prediction, mid-band lags
        rng = np.random.default_rng(11)
        stack = np.stack(
            [generate_phase_screen(profile(), GRID, K_NUMBER, rng).phase for _ in range(120)]
        )
        lags = np.array([4, 8, 16])
        r, d = empirical_structure_function(stack, GRID, lags)
        theory = phase_structure_function(r, profile(), K_NUMBER)
        assert np.all(np.abs(d / theory - 1.0) < 0.15)

    def test_subharmonics_restore_large_separations(self):
        # a 10 m grid misses outer-scale power; compensation layers put it back
        rng_plain = np.random.default_rng(11)
        rng_sub = np.random.default_rng(11)
        plain = np.stack(
            [generate_phase_screen(profile(), GRID, K_NUMBER, rng_plain).phase for _ in range(120)]
        )
        sub = np.stack(
            [
                generate_phase_screen(
                    profile(), GRID, K_NUMBER, rng_sub, subharmonics=3
                ).phase
                for _ in range(120)
            ]
        )
        lags = np.array([32, 62])
        r, d_plain = empirical_structure_function(plain, GRID, lags)
        _, d_sub = empirical_structure_function(sub, GRID, lags)
        theory = phase_structure_function(r, profile(), K_NUMBER)
        assert d_plain[-1] < 0.9 * theory[-1]  # the deficit being repaired
        assert np.all(np.abs(d_sub - theory) < np.abs(d_plain - theory))
        assert np.all(np.abs(d_sub / theory - 1.0) < 0.15)
