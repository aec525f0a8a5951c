"""Converter parameterization, per-module tolerances, and clamp-branch sizing.

All quantities are SI base units (V, A, s, H, F, Ohm). Module index 1 is the
top of the arm; the clamping branch between modules i and i+1 only conducts
from capacitor i+1 into capacitor i.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError

__all__ = [
    "ConverterConfig",
    "ModuleParams",
    "ToleranceSpec",
    "apply_tolerances",
    "derive_load",
    "peak_clamp_current_bound",
    "size_clamping_inductor",
]


@dataclass(frozen=True)
class ConverterConfig:
    """Full physical and control parameterization of one single-phase converter run.

    Defaults are the 9.6 kV / 1.14 MW simulation system (8 modules per arm,
    6 mF module capacitors, 2 kHz carriers, 10 kHz estimator sampling).
    """

    n_modules_per_arm: int = 8
    v_dc: float = 9.6e3
    v_sm_rated: float = 1.2e3
    c_nominal: float = 6e-3
    r_cap: float = 2e-3
    l_arm: float = 5e-3
    r_arm: float = 50e-3
    l_clamp: float = 10e-6
    r_clamp: float = 0.5e-3
    v_fd: float = 1.0
    f_carrier: float = 2e3
    f_out: float = 50.0
    m_a: float = 0.9
    delta_a: float = 0.0
    sign_adaptive: bool = False
    p_rated: float = 1.14e6
    l_load: float = 0.1e-3
    f_sample: float = 10e3
    dt_sim: float = 1e-6
    sigma_v: float | None = None  # None -> 0.5% of v_dc/2
    sigma_i: float | None = None  # None -> 0.5% of rated arm current
    duration: float = 1.0
    rng_seed: int = 0
    # Nominal self-discharge resistance per module. The source material only
    # ranks discharge rates, so the magnitude is a declared default.
    r_self_nominal: float = 1.0e4

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        n = self.n_modules_per_arm
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ConfigError(f"n_modules_per_arm must be an integer >= 2, got {n!r}")
        if not 0.0 <= self.m_a <= 1.0:
            raise ConfigError(f"m_a must be in [0, 1] (dimensionless), got {self.m_a}")
        if self.delta_a < 0.0:
            raise ConfigError(f"delta_a must be >= 0 (dimensionless), got {self.delta_a}")
        for name in ("v_dc", "v_sm_rated", "c_nominal", "l_arm", "l_clamp",
                     "f_carrier", "f_out", "f_sample", "dt_sim", "p_rated",
                     "r_self_nominal"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ConfigError(f"{name} must be > 0, got {v}")
        for name in ("r_cap", "r_arm", "r_clamp", "v_fd", "l_load", "duration"):
            v = getattr(self, name)
            if v < 0.0:
                raise ConfigError(f"{name} must be >= 0, got {v}")
        for name in ("sigma_v", "sigma_i"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ConfigError(f"{name} must be >= 0 (or unset), got {v}")
        if self.dt_sim > 1.0 / (20.0 * self.f_carrier) + 1e-15:
            raise ConfigError(
                f"dt_sim={self.dt_sim} s too coarse: must be <= 1/(20*f_carrier) "
                f"= {1.0 / (20.0 * self.f_carrier):.3e} s")
        # One sample period must be an integer number of plant steps.
        ratio = 1.0 / (self.f_sample * self.dt_sim)
        if abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ConfigError(
                f"1/f_sample = {1.0 / self.f_sample:.3e} s is not an integer "
                f"multiple of dt_sim = {self.dt_sim:.3e} s")
        if abs(self.v_dc - n * self.v_sm_rated) > 1e-9 * self.v_dc:
            warnings.warn(
                f"v_dc = {self.v_dc} V differs from n*v_sm_rated = "
                f"{n * self.v_sm_rated} V; modules will not sit at rated voltage",
                stacklevel=2)

    @property
    def steps_per_sample(self) -> int:
        return round(1.0 / (self.f_sample * self.dt_sim))

    @property
    def t_sample(self) -> float:
        return 1.0 / self.f_sample

    @property
    def t_carrier(self) -> float:
        return 1.0 / self.f_carrier

    def rated_arm_current(self) -> float:
        """DC component plus fundamental amplitude at the rated operating point [A]."""
        i_dc = self.p_rated / self.v_dc
        i_ac = 2.0 * self.p_rated / (self.m_a * self.v_dc) if self.m_a > 0 else 0.0
        return i_dc + i_ac

    def noise_sigmas(self) -> tuple[float, float]:
        """(sigma_v, sigma_i) with the 0.5%-of-rated defaults filled in."""
        sv = self.sigma_v if self.sigma_v is not None else 0.005 * self.v_dc / 2.0
        si = self.sigma_i if self.sigma_i is not None else 0.005 * self.rated_arm_current()
        return sv, si

    def with_overrides(self, **kwargs) -> "ConverterConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ModuleParams:
    """Physical parameters of one module: capacitance and self-discharge path."""

    c_j: float
    r_self: float
    index: int  # 1-based, 1 = top of arm

    def __post_init__(self):
        if not self.c_j > 0.0:
            raise ConfigError(f"module {self.index}: c_j must be > 0, got {self.c_j}")
        if not self.r_self > 0.0:
            raise ConfigError(f"module {self.index}: r_self must be > 0, got {self.r_self}")


@dataclass(frozen=True)
class ToleranceSpec:
    """How to spread per-module parameters around the rated values.

    spread_fraction bounds the relative capacitance deviation (hard truncation);
    the truncated-normal variant uses sigma = spread_fraction/3. forced_ranking
    pins (module index, rank) pairs, rank 0 = smallest capacitance in the arm.
    discharge_boost multiplies the leakage conductance 1/r_self of the listed
    modules.
    """

    spread_fraction: float = 0.0
    distribution: str = "truncated-normal"  # or "uniform"
    forced_ranking: tuple[tuple[int, int], ...] = ()
    discharge_boost: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.spread_fraction < 1.0:
            raise ConfigError(
                f"spread_fraction must be in [0, 1), got {self.spread_fraction}")
        if self.distribution not in ("truncated-normal", "uniform"):
            raise ConfigError(
                f"distribution must be 'truncated-normal' or 'uniform', "
                f"got {self.distribution!r}")
        for idx, mult in self.discharge_boost:
            if mult < 1.0:
                raise ConfigError(
                    f"discharge boost for module {idx} must be >= 1, got {mult}")

    def validate_against(self, n: int) -> None:
        seen_mod: set[int] = set()
        seen_rank: set[int] = set()
        for idx, rank in self.forced_ranking:
            if not 1 <= idx <= n:
                raise ConfigError(f"forced_ranking module index {idx} outside 1..{n}")
            if not 0 <= rank < n:
                raise ConfigError(f"forced_ranking rank {rank} outside 0..{n - 1}")
            if idx in seen_mod or rank in seen_rank:
                raise ConfigError(
                    f"conflicting forced_ranking constraint (module {idx}, rank {rank})")
            seen_mod.add(idx)
            seen_rank.add(rank)
        for idx, _ in self.discharge_boost:
            if not 1 <= idx <= n:
                raise ConfigError(f"discharge_boost module index {idx} outside 1..{n}")


def _sample_deviations(rng: np.random.Generator, n: int, spec: ToleranceSpec) -> np.ndarray:
    """Relative deviations in [-spread, +spread], one per module."""
    s = spec.spread_fraction
    if s == 0.0:
        return np.zeros(n)
    if spec.distribution == "uniform":
        return rng.uniform(-s, s, size=n)
    # Truncated normal, sigma = spread/3, hard-rejected at the bounds.
    out = np.empty(n)
    filled = 0
    while filled < n:
        draw = rng.normal(0.0, s / 3.0, size=n - filled)
        keep = draw[np.abs(draw) <= s]
        out[filled:filled + keep.size] = keep
        filled += keep.size
    return out


def _arm_modules(rng: np.random.Generator, cfg: ConverterConfig,
                 spec: ToleranceSpec) -> list[ModuleParams]:
    n = cfg.n_modules_per_arm
    dev = _sample_deviations(rng, n, spec)
    caps = cfg.c_nominal * (1.0 + dev)
    if spec.forced_ranking:
        sorted_caps = np.sort(caps)
        taken = np.zeros(n, dtype=bool)
        assigned = np.full(n, np.nan)
        for idx, rank in spec.forced_ranking:
            assigned[idx - 1] = sorted_caps[rank]
            taken[rank] = True
        remaining = iter(sorted_caps[~taken])
        for j in range(n):
            if math.isnan(assigned[j]):
                assigned[j] = next(remaining)
        caps = assigned
    boost = dict(spec.discharge_boost)
    mods = []
    for j in range(1, n + 1):
        r_self = cfg.r_self_nominal / boost.get(j, 1.0)
        mods.append(ModuleParams(c_j=float(caps[j - 1]), r_self=r_self, index=j))
    return mods


def apply_tolerances(cfg: ConverterConfig, spec: ToleranceSpec,
                     seed: int) -> tuple[list[ModuleParams], list[ModuleParams]]:
    """Draw per-module parameters for both arms, deterministically from the seed.

    Returns (upper arm modules, lower arm modules). Every capacitance lands in
    [c_nominal*(1-spread), c_nominal*(1+spread)]; ranking constraints and
    discharge boosts are applied per arm.
    """
    spec.validate_against(cfg.n_modules_per_arm)
    child_u, child_l = np.random.SeedSequence(seed).spawn(2)
    upper = _arm_modules(np.random.default_rng(child_u), cfg, spec)
    lower = _arm_modules(np.random.default_rng(child_l), cfg, spec)
    return upper, lower


def derive_load(cfg: ConverterConfig) -> float:
    """Load resistance [Ohm] drawing p_rated at the fundamental amplitude m_a*v_dc/2.

    The load inductance is neglected for the power balance, so the value is
    (m_a*v_dc/2)^2 / (2*p_rated).
    """
    if cfg.p_rated <= 0.0:
        raise ConfigError(f"p_rated must be > 0 to derive the load, got {cfg.p_rated}")
    if cfg.m_a <= 0.0:
        raise ConfigError(f"m_a must be > 0 to derive the load, got {cfg.m_a}")
    v_peak = cfg.m_a * cfg.v_dc / 2.0
    return v_peak * v_peak / (2.0 * cfg.p_rated)


def _check_underdamped(l: float, c_e: float, r_sum: float) -> float:
    """Return omega_d, raising if the series RLC branch is not underdamped."""
    if l <= 0.0 or c_e <= 0.0:
        raise ConfigError(f"inductance and capacitance must be > 0, got l={l}, c_e={c_e}")
    w2 = 1.0 / (l * c_e) - r_sum * r_sum / (4.0 * l * l)
    if w2 <= 0.0:
        raise ConfigError(
            f"overdamped clamp branch (l={l}, c_e={c_e}, r_sum={r_sum}); "
            "the damped-sine solution does not apply")
    return math.sqrt(w2)


def peak_clamp_current_bound(v_diff_max: float, l: float, c_e: float,
                             r_sum: float) -> float:
    """First-peak bound [A] of the clamp-branch current for a voltage step v_diff_max.

    Underdamped series RLC: i(t) = (v/(w_d*l)) * exp(-a*t) * sin(w_d*t) with
    a = r_sum/(2l); the peak sits at t = atan(w_d/a)/w_d.
    """
    w_d = _check_underdamped(l, c_e, r_sum)
    if v_diff_max == 0.0:
        return 0.0
    alpha = r_sum / (2.0 * l)
    if alpha == 0.0:
        return abs(v_diff_max) / (w_d * l)
    t_peak = math.atan2(w_d, alpha) / w_d
    return (abs(v_diff_max) / (w_d * l)) * math.exp(-alpha * t_peak) * math.sin(w_d * t_peak)


def size_clamping_inductor(v_diff_max: float, i_p_max: float, c_e: float,
                           r_sum: float) -> float:
    """Smallest inductance [H] keeping the first current peak at or below i_p_max."""
    if i_p_max <= 0.0:
        raise ConfigError(f"i_p_max must be > 0, got {i_p_max}")
    if v_diff_max == 0.0:
        return r_sum * r_sum * c_e / 4.0 * (1.0 + 1e-9) if r_sum > 0 else 0.0
    hi = c_e * (v_diff_max / i_p_max) ** 2  # lossless sizing; resistance only helps
    if r_sum == 0.0:
        return hi
    # The peak decreases monotonically with L over the underdamped domain
    # L > r^2*c_e/4, and hi is always feasible; bisect down from it.
    lo = max(r_sum * r_sum * c_e / 4.0 * (1.0 + 1e-9), hi * 1e-12)
    if peak_clamp_current_bound(v_diff_max, lo, c_e, r_sum) <= i_p_max:
        return lo
    f = lambda l: peak_clamp_current_bound(v_diff_max, l, c_e, r_sum) - i_p_max
    return brentq(f, lo, hi, rtol=1e-9)
