"""Scenario runner, metrics, sweeps."""

import numpy as np
import pytest

from conftest import SEED, fundamental_amplitude, imbalanced_tolerance, table3_config
from dcmmc.config import ConverterConfig, ToleranceSpec
from dcmmc.errors import ConfigError
from dcmmc.harness import (Scenario, improvement_ratio, max_error_profile,
                           run_scenario, sweep_switching)
from dcmmc.plant import PlantState


class TestMaxErrorProfile:
    def test_identical_series_zero(self):
        truth = np.random.default_rng(0).random((10, 8))
        assert np.all(max_error_profile(truth, truth.copy()) == 0.0)

    def test_single_module_deviation(self):
        truth = np.zeros((5, 8))
        est = truth.copy()
        est[2, 3] = -3.0
        prof = max_error_profile(truth, est)
        assert prof[2] == pytest.approx(3.0)
        assert prof[0] == 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            max_error_profile(np.zeros((5, 8)), np.zeros((6, 8)))


class TestImprovementRatio:
    def test_identical_series(self):
        e = np.linspace(1.0, 2.0, 100)
        assert improvement_ratio(e, e.copy(), 5e-3, 1e4) == pytest.approx(0.0)

    def test_half_error(self):
        e = np.full(100, 4.0)
        assert improvement_ratio(e, 0.5 * e, 5e-3, 1e4) == pytest.approx(0.5)

    def test_zero_conventional_is_not_applicable(self):
        z = np.zeros(10)
        assert improvement_ratio(z, z, 1e-3, 1e4) is None

    def test_window_selects_tail(self):
        # conventional error collapses in the second half: ratio must use it
        conv = np.concatenate((np.full(50, 10.0), np.full(50, 2.0)))
        comp = np.ones(100)
        r = improvement_ratio(conv, comp, window_s=50e-4, f_sample=1e4)
        assert r == pytest.approx(0.5)


class TestRunScenario:
    def test_determinism_is_bitwise(self):
        cfg = table3_config(duration=0.05, delta_a=0.02)
        s = Scenario(name="det", cfg=cfg, tolerance=imbalanced_tolerance())
        a = run_scenario(s)
        b = run_scenario(s)
        assert np.array_equal(a.vc_true_u, b.vc_true_u)
        assert np.array_equal(a.i_out, b.i_out)
        for kind in a.kinds:
            assert np.array_equal(a.est_u[kind], b.est_u[kind])
            assert np.array_equal(a.max_err[kind], b.max_err[kind])

    def test_zero_duration_gives_empty_series(self):
        cfg = table3_config(duration=0.0)
        s = Scenario(name="empty", cfg=cfg)
        res = run_scenario(s)
        assert res.t.size == 0
        for kind in res.kinds:
            assert res.est_u[kind].shape == (0, 8)
            assert res.max_err[kind].size == 0
        assert res.improvement is None

    def test_seed_changes_noise_not_truth_draws(self):
        s1 = Scenario(name="a", cfg=table3_config(duration=0.02, rng_seed=1),
                      tolerance=imbalanced_tolerance(), tolerance_seed=SEED)
        s2 = Scenario(name="b", cfg=table3_config(duration=0.02, rng_seed=2),
                      tolerance=imbalanced_tolerance(), tolerance_seed=SEED)
        a, b = run_scenario(s1), run_scenario(s2)
        assert np.array_equal(a.vc_true_u, b.vc_true_u)  # same plant
        assert not np.array_equal(a.est_u["compensated"],
                                  b.est_u["compensated"])  # different noise

    def test_metric_sanity(self, bal02_run):
        for kind in bal02_run.kinds:
            assert np.all(bal02_run.max_err[kind] >= 0.0)
        assert bal02_run.improvement is not None
        assert bal02_run.improvement <= 1.0

    def test_kind_aliases(self):
        cfg = table3_config(duration=0.01)
        s = Scenario(name="alias", cfg=cfg, kind_list=("conv",))
        res = run_scenario(s)
        assert res.kinds == ("conventional",)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            Scenario(name="x", cfg=table3_config(), kind_list=("bogus",)).kinds()


class TestEstimatorConvergenceFromWrongInit:
    def test_error_below_2pct_within_0p2s(self):
        # true voltages perturbed +/-10%, estimator started at v_dc/N
        cfg = table3_config(duration=0.3, delta_a=0.02)
        n = cfg.n_modules_per_arm
        rng = np.random.default_rng(11)
        perturb_u = 1200.0 * (1.0 + rng.uniform(-0.1, 0.1, n))
        perturb_l = 1200.0 * (1.0 + rng.uniform(-0.1, 0.1, n))
        st0 = PlantState(
            v_c_upper=perturb_u, v_c_lower=perturb_l,
            i_upper=cfg.p_rated / cfg.v_dc, i_lower=cfg.p_rated / cfg.v_dc,
            i_clamp_upper=np.zeros(n - 1), i_clamp_lower=np.zeros(n - 1))
        s = Scenario(name="wrong_init", cfg=cfg, kind_list=("compensated",))
        res = run_scenario(s, initial_state=st0)
        k02 = np.searchsorted(res.t, 0.2)
        assert res.max_err["compensated"][0] > 0.02 * 1200.0  # actually wrong at start
        assert np.all(res.max_err["compensated"][k02:] < 0.02 * 1200.0)


class TestOutputInvariance:
    def test_balancing_effort_leaves_output_unchanged(self, bal00_run, bal02_run):
        f_out = bal00_run.cfg.f_out
        a0 = fundamental_amplitude(bal00_run.i_out, bal00_run.t, f_out)
        a2 = fundamental_amplitude(bal02_run.i_out, bal02_run.t, f_out)
        assert abs(a2 - a0) / a0 < 0.01


class TestSweepSwitching:
    def test_rows_cover_carrier_and_schedule_grid(self):
        cfg = table3_config(duration=0.04, delta_a=0.02)
        s = Scenario(name="sw", cfg=cfg)
        rows = sweep_switching(s, [2000.0, 1000.0],
                               [None, [(0.0, 0.95), (0.02, 0.5)]])
        assert len(rows) == 4
        assert all(r.fault is None for r in rows)
        assert rows[0].param["f_carrier"] == 2000.0
        assert rows[1].param["m_a_schedule"][-1] == (0.02, 0.5)

    def test_faulty_row_recorded_not_raised(self):
        cfg = table3_config(duration=0.04)
        s = Scenario(name="swf", cfg=cfg)
        rows = sweep_switching(s, [2000.0, -5.0])  # negative frequency row
        assert rows[0].fault is None
        assert rows[1].fault is not None
        assert "ConfigError" in rows[1].fault
