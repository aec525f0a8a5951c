"""Switched plant of the diode-clamped MMC: types, single-step API, oracles.

The production path is `simulate`, which drives one of the twin kernels
(compiled or numpy) over the whole run. `plant_derivatives`/`step` expose the
same dynamics one step at a time for tests and small studies.

Clamp-branch modes (branch i sits between modules i and i+1, 1-based):
  Open        blocked diode, zero current;
  Conducting  module i+1 bypassed and forward-biased, charge moves i+1 -> i;
  Decaying    module i+1 reinserted while current still flows; the inductor
              current ramps to zero through the clamp diode, charging module i.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend
from .config import ConverterConfig, ModuleParams
from .errors import ConfigError, SimulationFault
from .modulation import GateVector, carrier_phases

__all__ = [
    "ClampMode",
    "PlantState",
    "PlantParams",
    "branch_mode",
    "arm_voltage",
    "plant_derivatives",
    "step",
    "analytic_clamp_current",
    "predicted_avg_clamp_current",
    "simulate",
    "SimOptions",
]


class ClampMode(enum.Enum):
    OPEN = 0
    CONDUCTING = 1
    DECAYING = 2


@dataclass
class PlantState:
    """True simulator state at time t."""

    v_c_upper: np.ndarray  # (N,) module capacitor voltages [V]
    v_c_lower: np.ndarray
    i_upper: float  # arm currents [A]
    i_lower: float
    i_clamp_upper: np.ndarray  # (N-1,) clamp branch currents [A], >= 0
    i_clamp_lower: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.v_c_upper = np.asarray(self.v_c_upper, dtype=float)
        self.v_c_lower = np.asarray(self.v_c_lower, dtype=float)
        self.i_clamp_upper = np.asarray(self.i_clamp_upper, dtype=float)
        self.i_clamp_lower = np.asarray(self.i_clamp_lower, dtype=float)

    def validate(self) -> None:
        if np.any(self.i_clamp_upper < 0.0) or np.any(self.i_clamp_lower < 0.0):
            raise SimulationFault("clamp branch current went negative")
        if np.any(self.v_c_upper < 0.0) or np.any(self.v_c_lower < 0.0):
            raise SimulationFault("capacitor voltage went negative")

    def pack(self) -> np.ndarray:
        return np.concatenate((
            [self.i_upper, self.i_lower],
            self.v_c_upper, self.v_c_lower,
            self.i_clamp_upper, self.i_clamp_lower))

    @classmethod
    def unpack(cls, y: np.ndarray, n: int, t: float) -> "PlantState":
        nb = n - 1
        return cls(
            v_c_upper=y[2:2 + n].copy(),
            v_c_lower=y[2 + n:2 + 2 * n].copy(),
            i_upper=float(y[0]), i_lower=float(y[1]),
            i_clamp_upper=y[2 + 2 * n:2 + 2 * n + nb].copy(),
            i_clamp_lower=y[2 + 2 * n + nb:].copy(),
            t=t)


@dataclass(frozen=True)
class PlantParams:
    """Electrical parameters the dynamics need, with per-module values expanded."""

    n: int
    c_u: np.ndarray
    c_l: np.ndarray
    gleak_u: np.ndarray  # 1/r_self per module [S]
    gleak_l: np.ndarray
    v_dc: float
    l_arm: float
    r_arm: float
    l_clamp: float
    r_clamp: float
    v_fd: float
    r_load: float
    l_load: float

    @classmethod
    def from_config(cls, cfg: ConverterConfig, mods_u: list[ModuleParams],
                    mods_l: list[ModuleParams], r_load: float) -> "PlantParams":
        if len(mods_u) != cfg.n_modules_per_arm or len(mods_l) != cfg.n_modules_per_arm:
            raise ConfigError("module parameter lists must have n_modules_per_arm entries")
        return cls(
            n=cfg.n_modules_per_arm,
            c_u=np.array([m.c_j for m in mods_u]),
            c_l=np.array([m.c_j for m in mods_l]),
            gleak_u=np.array([1.0 / m.r_self for m in mods_u]),
            gleak_l=np.array([1.0 / m.r_self for m in mods_l]),
            v_dc=cfg.v_dc, l_arm=cfg.l_arm, r_arm=cfg.r_arm,
            l_clamp=cfg.l_clamp, r_clamp=cfg.r_clamp, v_fd=cfg.v_fd,
            r_load=r_load, l_load=cfg.l_load)


def branch_mode(v_low: float, v_high: float, i_b: float, s_high: bool,
                v_fd: float) -> ClampMode:
    """Operating mode of the clamp branch between a (low, high)-indexed module pair.

    v_low/v_high are the capacitor voltages of modules i and i+1; s_high is the
    insertion state of module i+1.
    """
    if not s_high and (v_high > v_low + 2.0 * v_fd or i_b > 0.0):
        return ClampMode.CONDUCTING
    if s_high and i_b > 0.0:
        return ClampMode.DECAYING
    return ClampMode.OPEN


def arm_voltage(v_c: np.ndarray, gates: GateVector) -> float:
    """Series voltage of the inserted modules: dot(v_c, gates)."""
    v_c = np.asarray(v_c, dtype=float)
    if v_c.shape != gates.s.shape:
        raise ConfigError(f"v_c has {v_c.size} entries for {gates.s.size} gates")
    return float(v_c @ gates.as_float())


def _gates_float(g) -> np.ndarray:
    if isinstance(g, GateVector):
        return g.as_float()
    return np.asarray(g, dtype=float)


def plant_derivatives(state: PlantState, gates_u, gates_l,
                      params: PlantParams) -> np.ndarray:
    """Time derivative of the packed state with gates and modes frozen.

    Returned layout matches PlantState.pack():
    [di_u, di_l, dvc_u(N), dvc_l(N), dib_u(N-1), dib_l(N-1)].
    """
    n = params.n
    gu = _gates_float(gates_u)
    gl = _gates_float(gates_l)
    if gu.size != n or gl.size != n:
        raise ConfigError("gate vectors must have one entry per module")
    y = state.pack()
    nb = n - 1
    o_vcu, o_vcl, o_ibu, o_ibl = 2, 2 + n, 2 + 2 * n, 2 + 2 * n + nb

    def modes(vc, ib, g):
        s_high = g[1:] > 0.5
        cond = (~s_high) & ((vc[1:] > vc[:-1] + 2.0 * params.v_fd) | (ib > 0.0))
        dec = s_high & (ib > 0.0)
        return np.where(cond, 1, np.where(dec, 2, 0))

    mode_u = modes(y[o_vcu:o_vcl], y[o_ibu:o_ibl], gu)
    mode_l = modes(y[o_vcl:o_ibu], y[o_ibl:], gl)
    return _derivative_core(y, gu, gl, mode_u, mode_l, params)


def _derivative_core(y, gu, gl, mode_u, mode_l, p: PlantParams,
                     arm_dynamics: bool = True) -> np.ndarray:
    n = p.n
    nb = n - 1
    o_vcu, o_vcl, o_ibu, o_ibl = 2, 2 + n, 2 + 2 * n, 2 + 2 * n + nb
    dy = np.zeros_like(y)
    iu, il = y[0], y[1]
    vcu = y[o_vcu:o_vcl]
    vcl = y[o_vcl:o_ibu]
    ibu = y[o_ibu:o_ibl]
    ibl = y[o_ibl:]
    varm_u = gu @ vcu
    varm_l = gl @ vcl
    iout = iu - il
    diout = ((varm_l - varm_u) - (p.r_arm + 2.0 * p.r_load) * iout) \
        / (p.l_arm + 2.0 * p.l_load)
    va = p.r_load * iout + p.l_load * diout
    if arm_dynamics:
        dy[0] = (0.5 * p.v_dc - varm_u - p.r_arm * iu - va) / p.l_arm
        dy[1] = (0.5 * p.v_dc - varm_l - p.r_arm * il + va) / p.l_arm
    cur_u = gu * iu - vcu * p.gleak_u
    cur_l = gl * il - vcl * p.gleak_l
    for vc, ib, mode, cur, sl_ in (
        (vcu, ibu, mode_u, cur_u, slice(o_ibu, o_ibl)),
        (vcl, ibl, mode_l, cur_l, slice(o_ibl, None)),
    ):
        ibe = np.maximum(ib, 0.0)
        cond = mode == 1
        dec = mode == 2
        act = cond | dec
        cur[:-1] += np.where(act, ibe, 0.0)
        cur[1:] -= np.where(cond, ibe, 0.0)
        dib = np.zeros(nb)
        dib[cond] = (vc[1:][cond] - vc[:-1][cond] - 2.0 * p.v_fd
                     - p.r_clamp * ib[cond]) / p.l_clamp
        dib[dec] = -(vc[:-1][dec] + 2.0 * p.v_fd + p.r_clamp * ib[dec]) / p.l_clamp
        dy[sl_] = dib
    dy[o_vcu:o_vcl] = cur_u / p.c_u
    dy[o_vcl:o_ibu] = cur_l / p.c_l
    return dy


def step(state: PlantState, gates_u, gates_l, dt: float,
         params: PlantParams) -> PlantState:
    """One explicit RK4 step with post-step diode turn-off clamping."""
    y = state.pack()
    if not np.all(np.isfinite(y)):
        raise SimulationFault(f"non-finite plant state at t = {state.t:.6e} s")
    gu = _gates_float(gates_u)
    gl = _gates_float(gates_l)
    n = params.n
    nb = n - 1
    o_ibu = 2 + 2 * n

    def modes(vc, ib, g):
        s_high = g[1:] > 0.5
        cond = (~s_high) & ((vc[1:] > vc[:-1] + 2.0 * params.v_fd) | (ib > 0.0))
        dec = s_high & (ib > 0.0)
        return np.where(cond, 1, np.where(dec, 2, 0))

    mode_u = modes(y[2:2 + n], y[o_ibu:o_ibu + nb], gu)
    mode_l = modes(y[2 + n:2 + 2 * n], y[o_ibu + nb:], gl)
    k1 = _derivative_core(y, gu, gl, mode_u, mode_l, params)
    k2 = _derivative_core(y + 0.5 * dt * k1, gu, gl, mode_u, mode_l, params)
    k3 = _derivative_core(y + 0.5 * dt * k2, gu, gl, mode_u, mode_l, params)
    k4 = _derivative_core(y + dt * k3, gu, gl, mode_u, mode_l, params)
    y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    np.maximum(y[o_ibu:], 0.0, out=y[o_ibu:])
    return PlantState.unpack(y, n, state.t + dt)


def analytic_clamp_current(v_diff: float, l: float, c_e: float, r_sum: float,
                           t) -> float | np.ndarray:
    """Closed-form clamp current for an initial driving difference v_diff.

    i(t) = (v_diff/(w_d*l)) * exp(-a*t) * sin(w_d*t), valid until the first
    zero crossing (the diode blocks afterwards). v_diff is the net difference
    driving the loop, i.e. already reduced by the 2*V_fd drop.
    """
    w2 = 1.0 / (l * c_e) - r_sum * r_sum / (4.0 * l * l)
    if w2 <= 0.0:
        raise ConfigError(
            f"overdamped clamp branch (l={l}, c_e={c_e}, r_sum={r_sum})")
    w_d = math.sqrt(w2)
    alpha = r_sum / (2.0 * l)
    t = np.asarray(t, dtype=float)
    out = (v_diff / (w_d * l)) * np.exp(-alpha * t) * np.sin(w_d * t)
    return float(out) if out.ndim == 0 else out


def predicted_avg_clamp_current(j: int, t: float, m_a: float, i_arm: float,
                                delta_a: float, n: int, arm: str,
                                omega: float | None = None,
                                f_out: float = 50.0) -> float:
    """Switching-period-average clamp current of branch j from the balancing budget.

    Upper arm weights by the bypass duty (1 + m_a sin(wt))/2, lower arm by
    (1 - m_a sin(wt))/2; clipped at zero because the diode only conducts one way.
    """
    if not 1 <= j <= n - 1:
        raise ConfigError(f"branch index {j} outside 1..{n - 1}")
    w = omega if omega is not None else 2.0 * math.pi * f_out
    s = math.sin(w * t)
    if arm == "upper":
        duty = (1.0 + m_a * s) / 2.0
    elif arm == "lower":
        duty = (1.0 - m_a * s) / 2.0
    else:
        raise ConfigError(f"arm must be 'upper' or 'lower', got {arm!r}")
    val = duty * i_arm * delta_a * (n - j) * j / (n - 1.0)
    return max(val, 0.0)


@dataclass(frozen=True)
class SimOptions:
    """Run-level switches for `simulate` (mostly test instrumentation)."""

    record_stride: int | None = None  # None -> one sample period
    arm_dynamics: bool = True
    backend: str | None = None
    ma_schedule: tuple[tuple[float, float], ...] | None = None  # (t_start, m_a)
    gate_schedule: tuple[np.ndarray, np.ndarray] | None = None  # (sched_u, sched_l)
    initial_state: PlantState | None = None


def simulate(cfg: ConverterConfig, params: PlantParams,
             duration: float | None = None,
             options: SimOptions = SimOptions()) -> dict:
    """Run the plant for `duration` seconds and return the kernel record dict.

    Records land every `record_stride` steps (default: one estimator sample
    period); row 0 is the initial state. Deterministic for fixed inputs and
    backend.
    """
    duration = cfg.duration if duration is None else duration
    dt = cfg.dt_sim
    stride = options.record_stride or cfg.steps_per_sample
    n_steps = round(duration / dt)
    if n_steps % stride != 0:
        raise ConfigError(
            f"duration {duration} s is not a whole number of record intervals "
            f"({stride} steps of {dt} s)")
    n = params.n
    phi_u, phi_l = carrier_phases(n)
    if options.ma_schedule:
        sched = sorted(options.ma_schedule)
        if sched[0][0] > 0.0:
            sched = [(0.0, cfg.m_a)] + sched
        ma_times = np.array([s[0] for s in sched])
        ma_values = np.array([s[1] for s in sched])
    else:
        ma_times = np.array([0.0])
        ma_values = np.array([cfg.m_a])
    omega = 2.0 * math.pi * cfg.f_out
    load_phase = math.atan2(omega * (params.l_load + params.l_arm / 2.0),
                            params.r_load + params.r_arm / 2.0)
    if options.initial_state is not None:
        st0 = options.initial_state
    else:
        # Start at the rated operating point: capacitors at rated voltage and
        # both arms carrying the DC power-balance current, so start-up
        # transients stay small.
        v0 = np.full(n, cfg.v_sm_rated, dtype=float)
        i_dc = cfg.p_rated / cfg.v_dc if options.arm_dynamics else 0.0
        st0 = PlantState(v_c_upper=v0.copy(), v_c_lower=v0.copy(),
                         i_upper=i_dc, i_lower=i_dc,
                         i_clamp_upper=np.zeros(n - 1),
                         i_clamp_lower=np.zeros(n - 1))
    sched_u = sched_l = None
    if options.gate_schedule is not None:
        sched_u, sched_l = options.gate_schedule
    kernel = get_backend(options.backend)
    if n == 1:
        raise ConfigError("the plant needs at least 2 modules per arm")
    shape = 0.5 - np.arange(n) / (n - 1.0)
    return kernel.run_kernel(
        n,
        params.v_dc, params.l_arm, params.r_arm,
        params.l_clamp, params.r_clamp, params.v_fd,
        params.r_load, params.l_load,
        params.c_u, params.c_l, params.gleak_u, params.gleak_l,
        cfg.f_carrier, cfg.f_out, cfg.delta_a,
        cfg.sign_adaptive, load_phase,
        ma_times, ma_values,
        phi_u / (2.0 * math.pi), phi_l / (2.0 * math.pi), shape,
        dt, n_steps, stride,
        st0.v_c_upper, st0.v_c_lower, st0.i_upper, st0.i_lower,
        st0.i_clamp_upper, st0.i_clamp_lower,
        arm_dynamics=options.arm_dynamics,
        sched_u=sched_u, sched_l=sched_l,
    )
