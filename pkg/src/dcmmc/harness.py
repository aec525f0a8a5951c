"""Scenario runner: composes modulation, plant, and estimators, plus sweeps.

A scenario simulates the switched plant once, synthesizes noisy sensor samples
(arm voltage and arm current per arm), runs every requested estimator kind on
the identical measurement record, and aligns estimates with the true module
voltages on the sample grid. The post-convergence window used for steady-state
metrics is the final half of the run.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ConverterConfig, ToleranceSpec, apply_tolerances, derive_load
from .errors import ConfigError, EstimatorFault, SimulationFault
from .estimator import EstimatorSettings, SampleFrame, estimate_series
from .plant import PlantParams, SimOptions, simulate

__all__ = [
    "Scenario",
    "RunResult",
    "KindMetrics",
    "run_scenario",
    "max_error_profile",
    "improvement_ratio",
    "sweep_sampling",
    "sweep_switching",
    "SweepRow",
    "POST_CONVERGENCE_FRACTION",
    "KIND_ALIASES",
]

POST_CONVERGENCE_FRACTION = 0.5

# Short kind tokens used on the CLI and in CSV column names.
KIND_ALIASES = {"conv": "conventional", "comp": "compensated"}
KIND_TOKENS = {v: k for k, v in KIND_ALIASES.items()}


@dataclass(frozen=True)
class Scenario:
    """One named experiment: converter config, module spread, balancing effort."""

    name: str
    cfg: ConverterConfig
    tolerance: ToleranceSpec = ToleranceSpec()
    delta_a: float | None = None  # overrides cfg.delta_a when set
    kind_list: tuple[str, ...] = ("conventional", "compensated")
    ma_schedule: tuple[tuple[float, float], ...] | None = None
    tolerance_seed: int | None = None  # defaults to cfg.rng_seed
    estimator_overrides: dict = field(default_factory=dict)

    def effective_config(self) -> ConverterConfig:
        cfg = self.cfg
        if self.delta_a is not None:
            cfg = cfg.with_overrides(delta_a=self.delta_a)
        return cfg

    def kinds(self) -> tuple[str, ...]:
        out = []
        for k in self.kind_list:
            full = KIND_ALIASES.get(k, k)
            if full not in ("conventional", "compensated"):
                raise ConfigError(f"unknown estimator kind {k!r}")
            if full not in out:
                out.append(full)
        return tuple(out)


@dataclass
class KindMetrics:
    """Steady-state error metrics of one estimator kind (post-convergence window)."""

    mean_max_err: float  # mean of the max-error profile [V]
    peak_max_err: float  # max of the max-error profile [V]
    mae: float  # mean |error| over modules, arms, window samples [V]

    def accuracy(self, v_sm: float) -> float:
        return 1.0 - self.peak_max_err / v_sm


@dataclass
class RunResult:
    """Aligned truth, estimates, and metrics of one scenario run."""

    scenario_name: str
    cfg: ConverterConfig
    seed: int
    t: np.ndarray  # (K,) sample instants, first at 1/f_sample
    vc_true_u: np.ndarray  # (K, N)
    vc_true_l: np.ndarray
    duty_u: np.ndarray  # (K, N)
    duty_l: np.ndarray
    i_u: np.ndarray  # (K,)
    i_l: np.ndarray
    v_arm_u: np.ndarray
    v_arm_l: np.ndarray
    i_out: np.ndarray
    v_out: np.ndarray
    ib_u: np.ndarray  # (K, N-1) interval-mean clamp branch currents
    ib_l: np.ndarray
    est_u: dict[str, np.ndarray]  # kind -> (K, N)
    est_l: dict[str, np.ndarray]
    max_err: dict[str, np.ndarray]  # kind -> (K,)
    metrics: dict[str, KindMetrics]
    improvement: float | None  # compensated vs conventional, None if n/a
    min_branch_current: float
    window_start: int  # first sample index of the post-convergence window

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(self.est_u.keys())


def max_error_profile(truth: np.ndarray, estimate: np.ndarray) -> np.ndarray:
    """Per-instant max over modules of |truth - estimate|."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ConfigError(
            f"series shapes disagree: {truth.shape} vs {estimate.shape}")
    if truth.size == 0:
        return np.zeros(truth.shape[0] if truth.ndim else 0)
    return np.max(np.abs(truth - estimate), axis=-1)


def improvement_ratio(err_conv: np.ndarray, err_comp: np.ndarray,
                      window_s: float, f_sample: float) -> float | None:
    """1 - mean(err_comp)/mean(err_conv) over the trailing window_s seconds.

    None when the conventional error vanishes (ratio undefined).
    """
    err_conv = np.asarray(err_conv, dtype=float)
    err_comp = np.asarray(err_comp, dtype=float)
    if err_conv.shape != err_comp.shape:
        raise ConfigError(
            f"series shapes disagree: {err_conv.shape} vs {err_comp.shape}")
    k = err_conv.size
    take = min(k, max(1, round(window_s * f_sample)))
    denom = float(np.mean(err_conv[k - take:]))
    if denom == 0.0:
        return None
    return 1.0 - float(np.mean(err_comp[k - take:])) / denom


def _window_start(k: int) -> int:
    return int(math.floor(k * (1.0 - POST_CONVERGENCE_FRACTION)))


def run_scenario(s: Scenario, initial_state=None) -> RunResult:
    """Simulate, sample with noise, estimate with every kind, align and score.

    initial_state overrides the rated-operating-point start (test hook for
    convergence studies with perturbed true voltages).
    """
    cfg = s.effective_config()
    cfg.validate()
    r_load = derive_load(cfg)
    tol_seed = s.tolerance_seed if s.tolerance_seed is not None else cfg.rng_seed
    mods_u, mods_l = apply_tolerances(cfg, s.tolerance, tol_seed)
    params = PlantParams.from_config(cfg, mods_u, mods_l, r_load)
    rec = simulate(cfg, params, options=SimOptions(
        ma_schedule=s.ma_schedule, initial_state=initial_state))

    k_total = rec["t"].size - 1  # sample intervals; row 0 is the initial state
    sigma_v, sigma_i = cfg.noise_sigmas()
    rng = np.random.default_rng(cfg.rng_seed)
    noise = {
        "varm_u": rng.normal(0.0, sigma_v, k_total + 1) if sigma_v else np.zeros(k_total + 1),
        "varm_l": rng.normal(0.0, sigma_v, k_total + 1) if sigma_v else np.zeros(k_total + 1),
        "iarm_u": rng.normal(0.0, sigma_i, k_total + 1) if sigma_i else np.zeros(k_total + 1),
        "iarm_l": rng.normal(0.0, sigma_i, k_total + 1) if sigma_i else np.zeros(k_total + 1),
    }
    meas = {
        "varm_u": rec["varm_u"] + noise["varm_u"],
        "varm_l": rec["varm_l"] + noise["varm_l"],
        "iarm_u": rec["iu"] + noise["iarm_u"],
        "iarm_l": rec["il"] + noise["iarm_l"],
    }

    ma_times, ma_values = _ma_schedule_arrays(cfg, s.ma_schedule)

    def frames(arm: str):
        varm = meas[f"varm_{arm[0]}"]
        iarm = meas[f"iarm_{arm[0]}"]
        gates = rec[f"gates_{arm[0]}"]
        duty = rec[f"duty_{arm[0]}"]
        out = []
        for k in range(1, k_total + 1):
            t_k = rec["t"][k]
            idx = int(np.searchsorted(ma_times, t_k, side="right")) - 1
            out.append(SampleFrame(
                z_varm=float(varm[k]), u_iarm=float(iarm[k - 1]),
                gates_at_sample=gates[k], duty_avg=duty[k],
                m_a=float(ma_values[max(idx, 0)]), t=float(t_k),
                gates_prev=gates[k - 1]))
        return out

    settings = EstimatorSettings.from_config(cfg, **s.estimator_overrides)
    est_u: dict[str, np.ndarray] = {}
    est_l: dict[str, np.ndarray] = {}
    for kind in s.kinds():
        est_u[kind] = estimate_series(frames("upper"), settings, kind)
        est_l[kind] = estimate_series(frames("lower"), settings, kind)

    truth_u = rec["vcu"][1:]
    truth_l = rec["vcl"][1:]
    max_err: dict[str, np.ndarray] = {}
    metrics: dict[str, KindMetrics] = {}
    w0 = _window_start(k_total)
    for kind in s.kinds():
        if k_total == 0:
            max_err[kind] = np.zeros(0)
            metrics[kind] = KindMetrics(math.nan, math.nan, math.nan)
            continue
        prof_u = max_error_profile(truth_u, est_u[kind])
        prof_l = max_error_profile(truth_l, est_l[kind])
        prof = np.maximum(prof_u, prof_l)
        max_err[kind] = prof
        abs_err = np.concatenate(
            (np.abs(truth_u[w0:] - est_u[kind][w0:]),
             np.abs(truth_l[w0:] - est_l[kind][w0:])), axis=1)
        metrics[kind] = KindMetrics(
            mean_max_err=float(np.mean(prof[w0:])),
            peak_max_err=float(np.max(prof[w0:])),
            mae=float(np.mean(abs_err)))

    improvement = None
    if {"conventional", "compensated"} <= set(s.kinds()) and k_total > 0:
        improvement = improvement_ratio(
            max_err["conventional"], max_err["compensated"],
            window_s=POST_CONVERGENCE_FRACTION * cfg.duration,
            f_sample=cfg.f_sample)

    return RunResult(
        scenario_name=s.name, cfg=cfg, seed=cfg.rng_seed,
        t=rec["t"][1:].copy(),
        vc_true_u=truth_u.copy(), vc_true_l=truth_l.copy(),
        duty_u=rec["duty_u"][1:].copy(), duty_l=rec["duty_l"][1:].copy(),
        i_u=rec["iu"][1:].copy(), i_l=rec["il"][1:].copy(),
        v_arm_u=rec["varm_u"][1:].copy(), v_arm_l=rec["varm_l"][1:].copy(),
        i_out=rec["iout"][1:].copy(), v_out=rec["vout"][1:].copy(),
        ib_u=rec["ibmean_u"][1:].copy(), ib_l=rec["ibmean_l"][1:].copy(),
        est_u=est_u, est_l=est_l, max_err=max_err, metrics=metrics,
        improvement=improvement,
        min_branch_current=rec["min_ib"],
        window_start=w0)


def _ma_schedule_arrays(cfg: ConverterConfig, schedule):
    if schedule:
        sched = sorted(schedule)
        if sched[0][0] > 0.0:
            sched = [(0.0, cfg.m_a)] + sched
        return (np.array([x[0] for x in sched]),
                np.array([x[1] for x in sched]))
    return np.array([0.0]), np.array([cfg.m_a])


@dataclass
class SweepRow:
    """One row of a parameter sweep; `fault` is set when the run failed."""

    label: str
    param: dict
    mean_err: dict[str, float] = field(default_factory=dict)
    peak_err: dict[str, float] = field(default_factory=dict)
    improvement: float | None = None
    fault: str | None = None


def _max_workers(n_rows: int) -> int:
    # Default is sequential: the estimator half of a run is GIL-bound numpy,
    # and oversubscribing small cores thrashes badly. MMC_EST_THREADS opts in.
    env = os.environ.get("MMC_EST_THREADS", "").strip()
    if env:
        return max(1, min(int(env), n_rows))
    return 1


def _run_rows(rows: list[SweepRow],
              scenarios: list[Scenario | None]) -> list[SweepRow]:
    def work(i: int) -> None:
        if scenarios[i] is None:  # row failed during construction
            return
        try:
            res = run_scenario(scenarios[i])
        except (SimulationFault, EstimatorFault, ConfigError) as exc:
            rows[i].fault = f"{type(exc).__name__}: {exc}"
            return
        for kind, m in res.metrics.items():
            rows[i].mean_err[kind] = m.mean_max_err
            rows[i].peak_err[kind] = m.peak_max_err
        rows[i].improvement = res.improvement

    with ThreadPoolExecutor(max_workers=_max_workers(len(rows))) as pool:
        list(pool.map(work, range(len(rows))))
    return rows


def sweep_sampling(s: Scenario, f_list) -> list[SweepRow]:
    """Re-run the scenario at each sampling frequency; same module population."""
    base_seed = s.cfg.rng_seed
    tol_seed = s.tolerance_seed if s.tolerance_seed is not None else base_seed
    rows, scenarios = [], []
    for i, f in enumerate(f_list):
        label = f"{s.name}__fs{int(f)}"
        rows.append(SweepRow(label=label, param={"f_sample": float(f)}))
        try:
            cfg = s.effective_config().with_overrides(
                f_sample=float(f), rng_seed=base_seed + i)
            scenarios.append(replace(s, name=label, cfg=cfg, delta_a=None,
                                     tolerance_seed=tol_seed))
        except ConfigError as exc:
            rows[-1].fault = f"ConfigError: {exc}"
            scenarios.append(None)
    return _run_rows(rows, scenarios)


def sweep_switching(s: Scenario, f_sw_list, ma_schedules=None) -> list[SweepRow]:
    """Sweep carrier frequency, optionally crossed with m_a step schedules.

    ma_schedules: list of either None (constant m_a) or sequences of
    (time_s, m_a) steps applied mid-run.
    """
    if ma_schedules is None:
        ma_schedules = [None]
    base_seed = s.cfg.rng_seed
    tol_seed = s.tolerance_seed if s.tolerance_seed is not None else base_seed
    rows, scenarios = [], []
    i = 0
    for f_sw in f_sw_list:
        for sched in ma_schedules:
            label = f"{s.name}__fc{int(f_sw)}" + ("" if sched is None else "_mastep")
            rows.append(SweepRow(label=label, param={
                "f_carrier": float(f_sw),
                "m_a_schedule": list(sched) if sched else [(0.0, s.cfg.m_a)]}))
            try:
                cfg = s.effective_config().with_overrides(
                    f_carrier=float(f_sw), rng_seed=base_seed + i)
                scenarios.append(replace(
                    s, name=label, cfg=cfg, delta_a=None,
                    ma_schedule=tuple(sched) if sched else None,
                    tolerance_seed=tol_seed))
            except ConfigError as exc:
                rows[-1].fault = f"ConfigError: {exc}"
                scenarios.append(None)
            i += 1
    return _run_rows(rows, scenarios)
