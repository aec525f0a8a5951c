"""Configuration types, tolerance synthesis, load derivation, clamp sizing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from dcmmc.config import (ConverterConfig, ModuleParams, ToleranceSpec,
                          apply_tolerances, derive_load,
                          peak_clamp_current_bound, size_clamping_inductor)
from dcmmc.errors import ConfigError


def rlc_peak_oracle(v_diff, l, c_e, r):
    """Brute-force series-RLC integration; returns the first current peak."""

    def rhs(_t, y):
        i, vc = y
        return [(vc - r * i) / l, -i / c_e]

    w0 = 1.0 / math.sqrt(l * c_e)
    t_end = 2.0 * math.pi / w0
    sol = solve_ivp(rhs, (0.0, t_end), [0.0, v_diff], rtol=1e-10, atol=1e-12,
                    dense_output=True)
    tt = np.linspace(0.0, t_end, 20000)
    return float(np.max(sol.sol(tt)[0]))


class TestConverterConfig:
    def test_defaults_are_the_simulation_system(self):
        cfg = ConverterConfig()
        assert cfg.n_modules_per_arm == 8
        assert cfg.v_dc == pytest.approx(9.6e3)
        assert cfg.steps_per_sample == 100

    def test_m_a_range_enforced(self):
        with pytest.raises(ConfigError, match="m_a"):
            ConverterConfig(m_a=1.2)

    def test_dt_must_resolve_carrier(self):
        with pytest.raises(ConfigError, match="dt_sim"):
            ConverterConfig(dt_sim=1e-3)

    def test_sample_period_must_be_integer_steps(self):
        with pytest.raises(ConfigError, match="integer"):
            ConverterConfig(f_sample=3000.0, dt_sim=1e-6)

    def test_vdc_mismatch_warns_not_raises(self):
        with pytest.warns(UserWarning, match="v_dc"):
            ConverterConfig(v_dc=9.0e3)

    def test_noise_defaults(self):
        cfg = ConverterConfig()
        sv, si = cfg.noise_sigmas()
        assert sv == pytest.approx(0.005 * 9.6e3 / 2.0)
        assert si == pytest.approx(0.005 * cfg.rated_arm_current())


class TestApplyTolerances:
    def test_zero_spread_gives_nominal_modules(self):
        cfg = ConverterConfig()
        upper, lower = apply_tolerances(cfg, ToleranceSpec(), seed=1)
        for mods in (upper, lower):
            assert [m.c_j for m in mods] == [pytest.approx(6e-3)] * 8
            assert [m.r_self for m in mods] == [pytest.approx(1e4)] * 8

    def test_spread_bounds_and_forced_ranking(self):
        cfg = ConverterConfig()
        spec = ToleranceSpec(spread_fraction=0.15, forced_ranking=((1, 0),))
        upper, lower = apply_tolerances(cfg, spec, seed=42)
        for mods in (upper, lower):
            caps = np.array([m.c_j for m in mods])
            assert np.all(caps >= 6e-3 * 0.85 - 1e-15)
            assert np.all(caps <= 6e-3 * 1.15 + 1e-15)
            assert caps[0] == caps.min()

    def test_same_seed_is_bitwise_identical(self):
        cfg = ConverterConfig()
        spec = ToleranceSpec(spread_fraction=0.15, distribution="uniform")
        a = apply_tolerances(cfg, spec, seed=7)
        b = apply_tolerances(cfg, spec, seed=7)
        assert a == b

    def test_discharge_boost_ranks_module_8_worst(self):
        cfg = ConverterConfig()
        spec = ToleranceSpec(discharge_boost=((2, 2.0), (4, 3.0), (7, 4.0), (8, 5.0)))
        upper, _ = apply_tolerances(cfg, spec, seed=0)
        r = [m.r_self for m in upper]
        assert r[7] == min(r)
        assert r[7] == pytest.approx(1e4 / 5.0)
        assert r[0] == pytest.approx(1e4)

    def test_conflicting_ranking_rejected(self):
        cfg = ConverterConfig()
        spec = ToleranceSpec(spread_fraction=0.1,
                             forced_ranking=((1, 0), (2, 0)))
        with pytest.raises(ConfigError, match="conflicting"):
            apply_tolerances(cfg, spec, seed=0)

    def test_module_params_validate(self):
        with pytest.raises(ConfigError):
            ModuleParams(c_j=-1.0, r_self=1e4, index=1)


class TestDeriveLoad:
    def test_simulation_column(self):
        cfg = ConverterConfig(m_a=0.9, v_dc=9.6e3, p_rated=1.14e6)
        assert derive_load(cfg) == pytest.approx((0.9 * 4800.0) ** 2 / (2 * 1.14e6))
        assert derive_load(cfg) == pytest.approx(8.19, abs=0.01)

    def test_experimental_column(self):
        cfg = ConverterConfig(m_a=0.9, v_dc=230.0, v_sm_rated=230 / 8, p_rated=2e3)
        assert derive_load(cfg) == pytest.approx(2.68, abs=0.01)

    def test_infinite_power_limit(self):
        cfg = ConverterConfig(p_rated=1e15)
        assert derive_load(cfg) == pytest.approx(0.0, abs=1e-7)


class TestPeakClampCurrent:
    def test_lossless_peak_matches_closed_form_and_oracle(self):
        peak = peak_clamp_current_bound(10.0, 10e-6, 3e-3, 0.0)
        assert peak == pytest.approx(10.0 * math.sqrt(3e-3 / 10e-6), rel=1e-12)
        assert peak == pytest.approx(173.205, abs=0.001)
        assert peak == pytest.approx(rlc_peak_oracle(10.0, 10e-6, 3e-3, 0.0), rel=1e-4)

    def test_resistive_peak_matches_oracle(self):
        peak = peak_clamp_current_bound(10.0, 10e-6, 3e-3, 5e-3)
        assert peak == pytest.approx(rlc_peak_oracle(10.0, 10e-6, 3e-3, 5e-3), rel=1e-4)

    def test_zero_difference_gives_zero(self):
        assert peak_clamp_current_bound(0.0, 10e-6, 3e-3, 1e-3) == 0.0

    def test_doubling_inductance_scales_by_inverse_sqrt2(self):
        p1 = peak_clamp_current_bound(10.0, 10e-6, 3e-3, 0.0)
        p2 = peak_clamp_current_bound(10.0, 20e-6, 3e-3, 0.0)
        assert p2 == pytest.approx(p1 / math.sqrt(2.0), rel=1e-12)

    def test_overdamped_rejected(self):
        with pytest.raises(ConfigError, match="overdamped"):
            peak_clamp_current_bound(10.0, 1e-9, 3e-3, 1.0)


class TestSizeClampingInductor:
    def test_lossless_closed_form(self):
        l_min = size_clamping_inductor(10.0, 173.2050808, 3e-3, 0.0)
        assert l_min == pytest.approx(3e-3 * (10.0 / 173.2050808) ** 2, rel=1e-12)
        assert l_min == pytest.approx(10e-6, rel=1e-6)

    def test_bisection_tightness(self):
        l_min = size_clamping_inductor(10.0, 100.0, 3e-3, 2e-3)
        peak = peak_clamp_current_bound(10.0, l_min, 3e-3, 2e-3)
        assert peak <= 100.0 * (1.0 + 1e-9)
        assert peak > 0.999 * 100.0

    def test_nonpositive_rating_rejected(self):
        with pytest.raises(ConfigError, match="i_p_max"):
            size_clamping_inductor(10.0, 0.0, 3e-3, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(v=st.floats(1.0, 1e3), ip=st.floats(1.0, 1e4),
           ce=st.floats(1e-4, 1e-2), r=st.floats(0.0, 0.05))
    def test_sizing_roundtrip_within_0p1_percent(self, v, ip, ce, r):
        l_min = size_clamping_inductor(v, ip, ce, r)
        if l_min <= r * r * ce / 4.0 * (1.0 + 1e-8):
            return  # every underdamped inductor already satisfies the rating
        peak = peak_clamp_current_bound(v, l_min, ce, r)
        assert peak == pytest.approx(ip, rel=1e-3)
