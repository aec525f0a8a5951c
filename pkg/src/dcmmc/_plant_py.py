"""Pure-numpy plant kernel (fallback when the compiled kernel is unavailable).

Both kernels implement the same contract: fixed-step RK4 over the switched
arm/load/clamp dynamics, with gates and clamp-branch modes frozen over each
step and diode turn-off handled by post-step clamping of branch currents to
zero. Results are recorded every `record_stride` steps; row 0 is the initial
state. Interval quantities (duty, mean branch current, gated charge flow) are
averages over the record interval ending at each row.
"""

from __future__ import annotations

import numpy as np

from .errors import SimulationFault

BACKEND_NAME = "python"

_OPEN, _CONDUCTING, _DECAYING = 0, 1, 2


def run_kernel(
    n: int,
    v_dc: float, l_arm: float, r_arm: float,
    l_clamp: float, r_clamp: float, v_fd: float,
    r_load: float, l_load: float,
    c_u: np.ndarray, c_l: np.ndarray,
    gleak_u: np.ndarray, gleak_l: np.ndarray,
    f_carrier: float, f_out: float, delta_a: float,
    sign_adaptive: bool, load_phase: float,
    ma_times: np.ndarray, ma_values: np.ndarray,
    phase_frac_u: np.ndarray, phase_frac_l: np.ndarray,
    delta_shape: np.ndarray,
    dt: float, n_steps: int, record_stride: int,
    vcu0: np.ndarray, vcl0: np.ndarray,
    iu0: float, il0: float,
    ibu0: np.ndarray, ibl0: np.ndarray,
    arm_dynamics: bool = True,
    sched_u: np.ndarray | None = None,
    sched_l: np.ndarray | None = None,
) -> dict:
    if n_steps % record_stride != 0:
        raise ValueError("n_steps must be a multiple of record_stride")
    nb = n - 1
    omega = 2.0 * np.pi * f_out
    use_schedule = sched_u is not None
    if use_schedule and (sched_u.shape != (n_steps + 1, n) or
                         sched_l.shape != (n_steps + 1, n)):
        raise ValueError("gate schedules must have shape (n_steps+1, n)")

    c_u = np.asarray(c_u, dtype=float)
    c_l = np.asarray(c_l, dtype=float)
    gleak_u = np.asarray(gleak_u, dtype=float)
    gleak_l = np.asarray(gleak_l, dtype=float)

    # State layout: [i_u, i_l, vc_u(n), vc_l(n), ib_u(n-1), ib_l(n-1)]
    o_vcu, o_vcl = 2, 2 + n
    o_ibu, o_ibl = 2 + 2 * n, 2 + 2 * n + nb
    y = np.concatenate(([iu0, il0], vcu0, vcl0, ibu0, ibl0)).astype(float)

    r_eff = r_arm + 2.0 * r_load
    l_eff = l_arm + 2.0 * l_load

    def gates_at(t: float) -> tuple[np.ndarray, np.ndarray]:
        idx = int(np.searchsorted(ma_times, t, side="right")) - 1
        ma = ma_values[max(idx, 0)]
        st = np.sin(omega * t)
        sgn_u = sgn_l = 1.0
        if sign_adaptive:
            # Sign of the ideal fundamental of each arm current, held between
            # its zero crossings (two updates per fundamental cycle).
            ph = np.mod(omega * t - load_phase, 2.0 * np.pi)
            sgn_u = 1.0 if ph < np.pi else -1.0
            sgn_l = -sgn_u
        ref_u = 0.5 * (1.0 - ma * st) - sgn_u * delta_a * delta_shape
        ref_l = 0.5 * (1.0 + ma * st) - sgn_l * delta_a * delta_shape
        xu = np.mod(f_carrier * t + phase_frac_u, 1.0)
        xl = np.mod(f_carrier * t + phase_frac_l, 1.0)
        gu = ref_u >= 1.0 - np.abs(2.0 * xu - 1.0)
        gl = ref_l >= 1.0 - np.abs(2.0 * xl - 1.0)
        return gu.astype(float), gl.astype(float)

    def scheduled(step: int) -> tuple[np.ndarray, np.ndarray]:
        return sched_u[step].astype(float), sched_l[step].astype(float)

    def deriv(yv, gu, gl, mode_u, mode_l):
        dy = np.zeros_like(yv)
        iu, il = yv[0], yv[1]
        vcu = yv[o_vcu:o_vcl]
        vcl = yv[o_vcl:o_ibu]
        ibu = yv[o_ibu:o_ibl]
        ibl = yv[o_ibl:]
        varm_u = gu @ vcu
        varm_l = gl @ vcl
        iout = iu - il
        diout = ((varm_l - varm_u) - r_eff * iout) / l_eff
        va = r_load * iout + l_load * diout
        if arm_dynamics:
            dy[0] = (0.5 * v_dc - varm_u - r_arm * iu - va) / l_arm
            dy[1] = (0.5 * v_dc - varm_l - r_arm * il + va) / l_arm
        cur_u = gu * iu - vcu * gleak_u
        cur_l = gl * il - vcl * gleak_l
        for (vc, ib, mode, cur, dib_out) in (
            (vcu, ibu, mode_u, cur_u, slice(o_ibu, o_ibl)),
            (vcl, ibl, mode_l, cur_l, slice(o_ibl, None)),
        ):
            ibe = np.maximum(ib, 0.0)
            cond = mode == _CONDUCTING
            dec = mode == _DECAYING
            act = cond | dec
            cur[:-1] += np.where(act, ibe, 0.0)
            cur[1:] -= np.where(cond, ibe, 0.0)
            dib = np.zeros(nb)
            dib[cond] = (vc[1:][cond] - vc[:-1][cond] - 2.0 * v_fd
                         - r_clamp * ib[cond]) / l_clamp
            dib[dec] = -(vc[:-1][dec] + 2.0 * v_fd + r_clamp * ib[dec]) / l_clamp
            dy[dib_out] = dib
        dy[o_vcu:o_vcl] = cur_u / c_u
        dy[o_vcl:o_ibu] = cur_l / c_l
        return dy

    def branch_modes(vc, ib, g):
        s_high = g[1:] > 0.5
        cond = (~s_high) & ((vc[1:] > vc[:-1] + 2.0 * v_fd) | (ib > 0.0))
        dec = s_high & (ib > 0.0)
        return np.where(cond, _CONDUCTING, np.where(dec, _DECAYING, _OPEN))

    n_rec = n_steps // record_stride + 1
    rec = {
        "t": np.zeros(n_rec),
        "vcu": np.zeros((n_rec, n)), "vcl": np.zeros((n_rec, n)),
        "iu": np.zeros(n_rec), "il": np.zeros(n_rec),
        "varm_u": np.zeros(n_rec), "varm_l": np.zeros(n_rec),
        "iout": np.zeros(n_rec), "vout": np.zeros(n_rec),
        "gates_u": np.zeros((n_rec, n), dtype=np.uint8),
        "gates_l": np.zeros((n_rec, n), dtype=np.uint8),
        "duty_u": np.zeros((n_rec, n)), "duty_l": np.zeros((n_rec, n)),
        "ib_u": np.zeros((n_rec, nb)), "ib_l": np.zeros((n_rec, nb)),
        "ibmean_u": np.zeros((n_rec, nb)), "ibmean_l": np.zeros((n_rec, nb)),
        "qflow_u": np.zeros((n_rec, n)), "qflow_l": np.zeros((n_rec, n)),
    }

    def record(row: int, t: float, gu, gl):
        vcu = y[o_vcu:o_vcl]
        vcl = y[o_vcl:o_ibu]
        varm_u = gu @ vcu
        varm_l = gl @ vcl
        iout = y[0] - y[1]
        diout = ((varm_l - varm_u) - r_eff * iout) / l_eff
        if not np.isfinite(varm_u + varm_l + y[0] + y[1]):
            raise SimulationFault(
                f"non-finite plant state at t = {t:.6e} s (record row {row})")
        rec["t"][row] = t
        rec["vcu"][row] = vcu
        rec["vcl"][row] = vcl
        rec["iu"][row] = y[0]
        rec["il"][row] = y[1]
        rec["varm_u"][row] = varm_u
        rec["varm_l"][row] = varm_l
        rec["iout"][row] = iout
        rec["vout"][row] = r_load * iout + l_load * diout
        rec["gates_u"][row] = gu.astype(np.uint8)
        rec["gates_l"][row] = gl.astype(np.uint8)
        rec["ib_u"][row] = y[o_ibu:o_ibl]
        rec["ib_l"][row] = y[o_ibl:]

    gu0, gl0 = scheduled(0) if use_schedule else gates_at(0.0)
    record(0, 0.0, gu0, gl0)

    acc_duty_u = np.zeros(n)
    acc_duty_l = np.zeros(n)
    acc_ib_u = np.zeros(nb)
    acc_ib_l = np.zeros(nb)
    acc_q_u = np.zeros(n)
    acc_q_l = np.zeros(n)
    min_ib = np.inf if nb else 0.0

    half = 0.5 * dt
    sixth = dt / 6.0
    for step in range(n_steps):
        t = step * dt
        gu, gl = scheduled(step) if use_schedule else gates_at(t)
        mode_u = branch_modes(y[o_vcu:o_vcl], y[o_ibu:o_ibl], gu)
        mode_l = branch_modes(y[o_vcl:o_ibu], y[o_ibl:], gl)
        ibu_pre = y[o_ibu:o_ibl].copy()
        ibl_pre = y[o_ibl:].copy()
        iu_pre, il_pre = y[0], y[1]

        k1 = deriv(y, gu, gl, mode_u, mode_l)
        k2 = deriv(y + half * k1, gu, gl, mode_u, mode_l)
        k3 = deriv(y + half * k2, gu, gl, mode_u, mode_l)
        k4 = deriv(y + dt * k3, gu, gl, mode_u, mode_l)
        y += sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        # Diode turn-off: a branch whose current went negative ends at zero.
        np.maximum(y[o_ibu:], 0.0, out=y[o_ibu:])
        if nb:
            min_ib = min(min_ib, y[o_ibu:].min())

        acc_duty_u += gu
        acc_duty_l += gl
        acc_ib_u += 0.5 * (ibu_pre + y[o_ibu:o_ibl])
        acc_ib_l += 0.5 * (ibl_pre + y[o_ibl:])
        acc_q_u += gu * (0.5 * (iu_pre + y[0]))
        acc_q_l += gl * (0.5 * (il_pre + y[1]))

        if (step + 1) % record_stride == 0:
            row = (step + 1) // record_stride
            t_next = (step + 1) * dt
            gnu, gnl = scheduled(step + 1) if use_schedule else gates_at(t_next)
            record(row, t_next, gnu, gnl)
            rec["duty_u"][row] = acc_duty_u / record_stride
            rec["duty_l"][row] = acc_duty_l / record_stride
            rec["ibmean_u"][row] = acc_ib_u / record_stride
            rec["ibmean_l"][row] = acc_ib_l / record_stride
            rec["qflow_u"][row] = acc_q_u / record_stride
            rec["qflow_l"][row] = acc_q_l / record_stride
            acc_duty_u[:] = 0.0
            acc_duty_l[:] = 0.0
            acc_ib_u[:] = 0.0
            acc_ib_l[:] = 0.0
            acc_q_u[:] = 0.0
            acc_q_l[:] = 0.0

    rec["min_ib"] = float(min_ib) if nb else 0.0
    rec["final_state"] = y.copy()
    return rec
