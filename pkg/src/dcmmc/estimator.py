"""Discrete state-space models of one arm and the Kalman filter over them.

Both model kinds measure through the same C row (gates at the sample instant)
and predict with A x + B i_arm:

  conventional  A = I and B from the gate state held at the interval start
                (zero-order hold, so the model is exposed to sampling delay);
  compensated   B duty-averaged over the elapsed interval (the sampling
                compensation) and A augmented with pairwise charge-exchange
                terms for each clamp branch whose conduction the estimator
                detects from its own voltage estimates.

The exchange term of branch i moves charge from module i+1 into module i and
preserves both row sums (each row of A sums to 1) and total estimated charge
(sum of C_j * x_j), since each row is scaled by its own capacitance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import ConverterConfig
from .errors import ConfigError, EstimatorFault

__all__ = [
    "StateSpaceModel",
    "EstimatorState",
    "SampleFrame",
    "EstimatorSettings",
    "b_coefficients",
    "build_conventional_model",
    "build_compensated_model",
    "kf_predict",
    "kf_update",
    "estimate_series",
    "KINDS",
]

KINDS = ("conventional", "compensated")


@dataclass
class StateSpaceModel:
    """Discrete (A, B, C) of one arm for one sample interval."""

    a: np.ndarray  # (N, N)
    b: np.ndarray  # (N,)  [V/A]
    c: np.ndarray  # (N,)  0/1 measurement row
    kind: str = "conventional"

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        n = self.b.size
        if self.a.shape != (n, n) or self.c.shape != (n,):
            raise ConfigError(
                f"inconsistent model dimensions: a {self.a.shape}, "
                f"b {self.b.shape}, c {self.c.shape}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")


@dataclass
class EstimatorState:
    """Kalman filter state for one arm."""

    x_hat: np.ndarray  # (N,) estimated module voltages [V]
    p: np.ndarray  # (N, N) error covariance [V^2]
    q_process: np.ndarray  # (N, N) process noise covariance [V^2]
    r_meas: float  # measurement noise variance [V^2]
    t_sample: float = 0.0

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.q_process = np.asarray(self.q_process, dtype=float)
        if self.r_meas <= 0.0:
            raise ConfigError(f"r_meas must be > 0, got {self.r_meas}")

    def copy(self) -> "EstimatorState":
        return EstimatorState(self.x_hat.copy(), self.p.copy(),
                              self.q_process, self.r_meas, self.t_sample)


@dataclass(frozen=True)
class SampleFrame:
    """What the controller-side estimator sees for one sample interval.

    u_iarm is the arm current measured at the start of the elapsed interval
    (zero-order hold) and gates_prev the insertion state held there; duty_avg
    is the per-module insertion duty over the interval; gates_at_sample and
    z_varm belong to the interval end.
    """

    z_varm: float
    u_iarm: float
    gates_at_sample: np.ndarray  # (N,) 0/1 at the interval end
    duty_avg: np.ndarray  # (N,) in [0, 1]
    m_a: float
    t: float
    gates_prev: np.ndarray | None = None  # (N,) 0/1 at the interval start

    def __post_init__(self):
        duty = np.asarray(self.duty_avg, dtype=float)
        if np.any(duty < -1e-12) or np.any(duty > 1.0 + 1e-12):
            raise ConfigError("duty_avg entries must lie in [0, 1]")
        object.__setattr__(self, "duty_avg", duty)
        object.__setattr__(
            self, "gates_at_sample",
            np.asarray(self.gates_at_sample, dtype=float))
        gp = self.gates_at_sample if self.gates_prev is None else self.gates_prev
        object.__setattr__(self, "gates_prev", np.asarray(gp, dtype=float))


def b_coefficients(x_hat: np.ndarray, m_a: float, t_sw: float, v_fd: float
                   ) -> np.ndarray:
    """Average forward-biased time [s] of each clamp branch over one carrier period.

    Branch i is considered conducting when the estimated voltage of module i+1
    exceeds module i by the clamp threshold (2*v_fd; pass v_fd=0 to drop the
    threshold). Conducting branches get (1 - m_a)*t_sw, others 0.
    """
    x = np.asarray(x_hat, dtype=float)
    on = x[1:] > x[:-1] + 2.0 * v_fd
    return np.where(on, (1.0 - m_a) * t_sw, 0.0)


def build_conventional_model(frame: SampleFrame, c_vec: np.ndarray,
                             t_s: float) -> StateSpaceModel:
    """Identity-A baseline with b_j = S_j(k-1) * t_s / c_j.

    The input gain holds the gate state of the interval start, so the model is
    exposed to inter-sample switching activity (sampling delay); that is the
    behaviour of the standard published baseline the compensated model is
    measured against.
    """
    c_vec = np.asarray(c_vec, dtype=float)
    n = c_vec.size
    if frame.duty_avg.size != n:
        raise ConfigError("frame and capacitance vector disagree on module count")
    return StateSpaceModel(
        a=np.eye(n),
        b=frame.gates_prev * t_s / c_vec,
        c=frame.gates_at_sample.copy(),
        kind="conventional")


def build_compensated_model(frame: SampleFrame, x_hat: np.ndarray,
                            c_vec: np.ndarray, l_clamp: float, t_s: float,
                            t_sw: float, m_a: float, v_fd: float,
                            threshold_vfd: bool = True) -> StateSpaceModel:
    """Sampling-compensated model with clamp-branch charge-exchange terms in A.

    The input gain is duty-averaged over the elapsed interval (b_j = duty_j *
    t_s / c_j), which folds inter-sample switching into the discrete model.
    For branch i with average conduction time b_i, the exchange coefficient
    gamma_i = t_s * b_i * (1 - duty_{i+1}) / (2 * l_clamp) (a charge per volt)
    enters row i as gamma_i/c_i and row i+1 as gamma_i/c_{i+1}. With equal
    capacitances both equal t_s*b_i*(1-duty_{i+1})/(2*l_clamp*c).
    """
    c_vec = np.asarray(c_vec, dtype=float)
    n = c_vec.size
    if frame.duty_avg.size != n:
        raise ConfigError("frame and capacitance vector disagree on module count")
    model = StateSpaceModel(
        a=np.eye(n),
        b=frame.duty_avg * t_s / c_vec,
        c=frame.gates_at_sample.copy(),
        kind="compensated")
    b = b_coefficients(x_hat, m_a, t_sw, v_fd if threshold_vfd else 0.0)
    a = np.eye(n)
    worst = 0.0
    for i in range(n - 1):
        if b[i] == 0.0:
            continue
        gamma = t_s * b[i] * (1.0 - frame.duty_avg[i + 1]) / (2.0 * l_clamp)
        k_lo = gamma / c_vec[i]
        k_hi = gamma / c_vec[i + 1]
        a[i, i] -= k_lo
        a[i, i + 1] += k_lo
        a[i + 1, i + 1] -= k_hi
        a[i + 1, i] += k_hi
        worst = max(worst, k_lo, k_hi)
    if worst > 0.5:
        warnings.warn(
            f"clamp exchange coefficient {worst:.3f} > 0.5: sampling too coarse "
            "for the linearized exchange model", stacklevel=2)
    model.a = a
    return model


def kf_predict(est: EstimatorState, model: StateSpaceModel,
               u_iarm: float) -> EstimatorState:
    """Time update: x <- A x + B u, P <- A P A' + Q."""
    if model.b.size != est.x_hat.size:
        raise ConfigError("model and estimator state dimensions disagree")
    x = model.a @ est.x_hat + model.b * u_iarm
    p = model.a @ est.p @ model.a.T + est.q_process
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise EstimatorFault("non-finite state after predict")
    return EstimatorState(x, p, est.q_process, est.r_meas, est.t_sample)


def kf_update(est: EstimatorState, c_row: np.ndarray, z_varm: float,
              r_meas: float | None = None) -> EstimatorState:
    """Scalar measurement update in Joseph-stabilized form."""
    r = est.r_meas if r_meas is None else r_meas
    if r <= 0.0:
        raise ConfigError(f"r_meas must be > 0, got {r}")
    c = np.asarray(c_row, dtype=float)
    y = z_varm - c @ est.x_hat
    pc = est.p @ c
    s = c @ pc + r
    if not np.isfinite(s) or s <= 0.0:
        raise EstimatorFault(f"innovation variance not positive (s = {s})")
    k = pc / s
    x = est.x_hat + k * y
    ikc = np.eye(c.size) - np.outer(k, c)
    p = ikc @ est.p @ ikc.T + np.outer(k, k) * r
    p = 0.5 * (p + p.T)
    return EstimatorState(x, p, est.q_process, est.r_meas, est.t_sample)


@dataclass(frozen=True)
class EstimatorSettings:
    """Constants and tuning the estimator uses (nominal values only).

    The filter never sees the true per-module parameters; c_vec defaults to
    the nominal capacitance for every module.
    """

    n: int
    c_vec: np.ndarray
    l_clamp: float
    t_s: float
    t_sw: float
    v_fd: float
    q_process_std: float = 0.1  # [V] per sample
    r_meas: float | None = None  # None -> max(sigma_v, 0.01*v_sm)^2
    p0_std: float | None = None  # None -> 0.1*v_sm
    x0: float | None = None  # None -> v_dc/n
    b_threshold_vfd: bool = True
    v_sm: float = 1.2e3
    v_dc: float = 9.6e3

    @classmethod
    def from_config(cls, cfg: ConverterConfig, **overrides) -> "EstimatorSettings":
        sigma_v, _ = cfg.noise_sigmas()
        base = dict(
            n=cfg.n_modules_per_arm,
            c_vec=np.full(cfg.n_modules_per_arm, cfg.c_nominal),
            l_clamp=cfg.l_clamp,
            t_s=cfg.t_sample,
            t_sw=cfg.t_carrier,
            v_fd=cfg.v_fd,
            r_meas=max(sigma_v, 0.01 * cfg.v_sm_rated) ** 2,
            v_sm=cfg.v_sm_rated,
            v_dc=cfg.v_dc,
        )
        base.update(overrides)
        return cls(**base)

    def initial_state(self) -> EstimatorState:
        p0 = (self.p0_std if self.p0_std is not None else 0.1 * self.v_sm) ** 2
        x0 = self.x0 if self.x0 is not None else self.v_dc / self.n
        r = self.r_meas if self.r_meas is not None else (0.01 * self.v_sm) ** 2
        return EstimatorState(
            x_hat=np.full(self.n, x0),
            p=np.eye(self.n) * p0,
            q_process=np.eye(self.n) * self.q_process_std ** 2,
            r_meas=r)

    def build_model(self, frame: SampleFrame, x_hat: np.ndarray,
                    kind: str) -> StateSpaceModel:
        if kind == "conventional":
            return build_conventional_model(frame, self.c_vec, self.t_s)
        if kind == "compensated":
            return build_compensated_model(
                frame, x_hat, self.c_vec, self.l_clamp, self.t_s, self.t_sw,
                frame.m_a, self.v_fd, threshold_vfd=self.b_threshold_vfd)
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")


def estimate_series(samples, settings: EstimatorSettings, kind: str,
                    initial: EstimatorState | None = None) -> np.ndarray:
    """Run predict/update over a time-ordered sequence of SampleFrames.

    Returns the (K, N) trajectory of post-update estimates, one row per frame.
    """
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    est = initial.copy() if initial is not None else settings.initial_state()
    out = []
    for idx, frame in enumerate(samples):
        try:
            model = settings.build_model(frame, est.x_hat, kind)
            est = kf_predict(est, model, frame.u_iarm)
            est = kf_update(est, model.c, frame.z_varm)
        except EstimatorFault as exc:
            raise EstimatorFault(str(exc), sample_index=idx) from exc
        est.t_sample = frame.t
        out.append(est.x_hat.copy())
    return np.array(out) if out else np.empty((0, settings.n))
