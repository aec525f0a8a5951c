# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled plant kernel. Same contract as ``dcmmc._plant_py.run_kernel``.

The stepping loop runs without the GIL so independent scenario runs can
execute on real threads.
"""

import numpy as np

from libc.math cimport M_PI, fabs, floor, fmod, isfinite, sin

from .errors import SimulationFault

BACKEND_NAME = "cython"

DEF OPEN = 0
DEF CONDUCTING = 1
DEF DECAYING = 2


cdef struct _Phys:
    int n
    int nb
    double v_dc
    double l_arm
    double r_arm
    double l_clamp
    double r_clamp
    double v_fd
    double r_load
    double l_load
    bint arm_dynamics


cdef struct _Mod:
    int n
    int n_ma
    double omega
    double f_carrier
    double delta_a
    double load_phase
    bint sign_adaptive


cdef inline double _triangle(double x) nogil:
    cdef double f = x - floor(x)
    return 1.0 - fabs(2.0 * f - 1.0)


cdef void _gates(_Mod m, double t,
                 double[::1] ma_times, double[::1] ma_values,
                 double[::1] pf_u, double[::1] pf_l, double[::1] shape,
                 double[::1] gu, double[::1] gl) nogil:
    cdef int j, idx = 0
    cdef double ma, st, sgn_u, sgn_l, ph, ref_u, ref_l
    for j in range(m.n_ma - 1, -1, -1):
        if t >= ma_times[j]:
            idx = j
            break
    ma = ma_values[idx]
    st = sin(m.omega * t)
    sgn_u = 1.0
    sgn_l = 1.0
    if m.sign_adaptive:
        ph = fmod(m.omega * t - m.load_phase, 2.0 * M_PI)
        if ph < 0.0:
            ph += 2.0 * M_PI
        sgn_u = 1.0 if ph < M_PI else -1.0
        sgn_l = -sgn_u
    for j in range(m.n):
        ref_u = 0.5 * (1.0 - ma * st) - sgn_u * m.delta_a * shape[j]
        ref_l = 0.5 * (1.0 + ma * st) - sgn_l * m.delta_a * shape[j]
        gu[j] = 1.0 if ref_u >= _triangle(m.f_carrier * t + pf_u[j]) else 0.0
        gl[j] = 1.0 if ref_l >= _triangle(m.f_carrier * t + pf_l[j]) else 0.0


cdef void _modes(int n, double v_fd, double[::1] y, int o_vc, int o_ib,
                 double[::1] g, signed char[::1] mode) nogil:
    cdef int i
    cdef double ib
    for i in range(n - 1):
        ib = y[o_ib + i]
        if g[i + 1] < 0.5:
            if y[o_vc + i + 1] > y[o_vc + i] + 2.0 * v_fd or ib > 0.0:
                mode[i] = CONDUCTING
            else:
                mode[i] = OPEN
        elif ib > 0.0:
            mode[i] = DECAYING
        else:
            mode[i] = OPEN


cdef void _deriv(_Phys p, double[::1] y, double[::1] dy,
                 double[::1] gu, double[::1] gl,
                 signed char[::1] mode_u, signed char[::1] mode_l,
                 double[::1] c_u, double[::1] c_l,
                 double[::1] gk_u, double[::1] gk_l) nogil:
    cdef int n = p.n, nb = p.nb
    cdef int o_vcu = 2, o_vcl = 2 + n, o_ibu = 2 + 2 * n, o_ibl = 2 + 2 * n + nb
    cdef int j
    cdef double iu = y[0], il = y[1]
    cdef double varm_u = 0.0, varm_l = 0.0
    cdef double iout, diout, va, ib, ibe

    for j in range(n):
        varm_u += gu[j] * y[o_vcu + j]
        varm_l += gl[j] * y[o_vcl + j]
    iout = iu - il
    diout = ((varm_l - varm_u) - (p.r_arm + 2.0 * p.r_load) * iout) \
        / (p.l_arm + 2.0 * p.l_load)
    va = p.r_load * iout + p.l_load * diout
    if p.arm_dynamics:
        dy[0] = (0.5 * p.v_dc - varm_u - p.r_arm * iu - va) / p.l_arm
        dy[1] = (0.5 * p.v_dc - varm_l - p.r_arm * il + va) / p.l_arm
    else:
        dy[0] = 0.0
        dy[1] = 0.0

    # Capacitor node currents [A]; converted to dV/dt at the end.
    for j in range(n):
        dy[o_vcu + j] = gu[j] * iu - y[o_vcu + j] * gk_u[j]
        dy[o_vcl + j] = gl[j] * il - y[o_vcl + j] * gk_l[j]

    for j in range(nb):
        ib = y[o_ibu + j]
        ibe = ib if ib > 0.0 else 0.0
        if mode_u[j] == CONDUCTING:
            dy[o_ibu + j] = (y[o_vcu + j + 1] - y[o_vcu + j] - 2.0 * p.v_fd
                             - p.r_clamp * ib) / p.l_clamp
            dy[o_vcu + j] += ibe
            dy[o_vcu + j + 1] -= ibe
        elif mode_u[j] == DECAYING:
            dy[o_ibu + j] = -(y[o_vcu + j] + 2.0 * p.v_fd + p.r_clamp * ib) / p.l_clamp
            dy[o_vcu + j] += ibe
        else:
            dy[o_ibu + j] = 0.0
        ib = y[o_ibl + j]
        ibe = ib if ib > 0.0 else 0.0
        if mode_l[j] == CONDUCTING:
            dy[o_ibl + j] = (y[o_vcl + j + 1] - y[o_vcl + j] - 2.0 * p.v_fd
                             - p.r_clamp * ib) / p.l_clamp
            dy[o_vcl + j] += ibe
            dy[o_vcl + j + 1] -= ibe
        elif mode_l[j] == DECAYING:
            dy[o_ibl + j] = -(y[o_vcl + j] + 2.0 * p.v_fd + p.r_clamp * ib) / p.l_clamp
            dy[o_vcl + j] += ibe
        else:
            dy[o_ibl + j] = 0.0

    for j in range(n):
        dy[o_vcu + j] /= c_u[j]
        dy[o_vcl + j] /= c_l[j]


def run_kernel(
    int n,
    double v_dc, double l_arm, double r_arm,
    double l_clamp, double r_clamp, double v_fd,
    double r_load, double l_load,
    c_u, c_l, gleak_u, gleak_l,
    double f_carrier, double f_out, double delta_a,
    bint sign_adaptive, double load_phase,
    ma_times, ma_values,
    phase_frac_u, phase_frac_l, delta_shape,
    double dt, long n_steps, long record_stride,
    vcu0, vcl0, double iu0, double il0, ibu0, ibl0,
    bint arm_dynamics=True, sched_u=None, sched_l=None,
):
    if n_steps % record_stride != 0:
        raise ValueError("n_steps must be a multiple of record_stride")
    cdef int nb = n - 1
    cdef bint use_schedule = sched_u is not None

    cdef _Phys p
    p.n = n
    p.nb = nb
    p.v_dc = v_dc
    p.l_arm = l_arm
    p.r_arm = r_arm
    p.l_clamp = l_clamp
    p.r_clamp = r_clamp
    p.v_fd = v_fd
    p.r_load = r_load
    p.l_load = l_load
    p.arm_dynamics = arm_dynamics

    cdef double[::1] mat = np.ascontiguousarray(ma_times, dtype=np.float64)
    cdef double[::1] mav = np.ascontiguousarray(ma_values, dtype=np.float64)

    cdef _Mod m
    m.n = n
    m.n_ma = mat.shape[0]
    m.omega = 2.0 * M_PI * f_out
    m.f_carrier = f_carrier
    m.delta_a = delta_a
    m.load_phase = load_phase
    m.sign_adaptive = sign_adaptive

    cdef double[::1] cu = np.ascontiguousarray(c_u, dtype=np.float64)
    cdef double[::1] cl = np.ascontiguousarray(c_l, dtype=np.float64)
    cdef double[::1] gku = np.ascontiguousarray(gleak_u, dtype=np.float64)
    cdef double[::1] gkl = np.ascontiguousarray(gleak_l, dtype=np.float64)
    cdef double[::1] pfu = np.ascontiguousarray(phase_frac_u, dtype=np.float64)
    cdef double[::1] pfl = np.ascontiguousarray(phase_frac_l, dtype=np.float64)
    cdef double[::1] shp = np.ascontiguousarray(delta_shape, dtype=np.float64)

    cdef unsigned char[:, ::1] su, sl
    if use_schedule:
        su = np.ascontiguousarray(sched_u, dtype=np.uint8)
        sl = np.ascontiguousarray(sched_l, dtype=np.uint8)
        if su.shape[0] != n_steps + 1 or su.shape[1] != n \
                or sl.shape[0] != n_steps + 1 or sl.shape[1] != n:
            raise ValueError("gate schedules must have shape (n_steps+1, n)")
    else:
        su = np.zeros((1, n), dtype=np.uint8)
        sl = np.zeros((1, n), dtype=np.uint8)

    cdef int dim = 2 + 2 * n + 2 * nb
    y_arr = np.empty(dim)
    y_arr[0] = iu0
    y_arr[1] = il0
    y_arr[2:2 + n] = vcu0
    y_arr[2 + n:2 + 2 * n] = vcl0
    y_arr[2 + 2 * n:2 + 2 * n + nb] = ibu0
    y_arr[2 + 2 * n + nb:] = ibl0
    cdef double[::1] y = y_arr
    cdef double[::1] yt = np.empty(dim)
    cdef double[::1] k1 = np.empty(dim)
    cdef double[::1] k2 = np.empty(dim)
    cdef double[::1] k3 = np.empty(dim)
    cdef double[::1] k4 = np.empty(dim)
    cdef double[::1] gu = np.empty(n)
    cdef double[::1] gl = np.empty(n)
    cdef signed char[::1] mode_u = np.zeros(nb if nb else 1, dtype=np.int8)
    cdef signed char[::1] mode_l = np.zeros(nb if nb else 1, dtype=np.int8)

    cdef long n_rec = n_steps // record_stride + 1
    rec = {
        "t": np.zeros(n_rec),
        "vcu": np.zeros((n_rec, n)), "vcl": np.zeros((n_rec, n)),
        "iu": np.zeros(n_rec), "il": np.zeros(n_rec),
        "varm_u": np.zeros(n_rec), "varm_l": np.zeros(n_rec),
        "iout": np.zeros(n_rec), "vout": np.zeros(n_rec),
        "gates_u": np.zeros((n_rec, n), dtype=np.uint8),
        "gates_l": np.zeros((n_rec, n), dtype=np.uint8),
        "duty_u": np.zeros((n_rec, n)), "duty_l": np.zeros((n_rec, n)),
        "ib_u": np.zeros((n_rec, max(nb, 0))), "ib_l": np.zeros((n_rec, max(nb, 0))),
        "ibmean_u": np.zeros((n_rec, max(nb, 0))),
        "ibmean_l": np.zeros((n_rec, max(nb, 0))),
        "qflow_u": np.zeros((n_rec, n)), "qflow_l": np.zeros((n_rec, n)),
    }
    cdef double[::1] r_t = rec["t"]
    cdef double[:, ::1] r_vcu = rec["vcu"]
    cdef double[:, ::1] r_vcl = rec["vcl"]
    cdef double[::1] r_iu = rec["iu"]
    cdef double[::1] r_il = rec["il"]
    cdef double[::1] r_vau = rec["varm_u"]
    cdef double[::1] r_val = rec["varm_l"]
    cdef double[::1] r_iout = rec["iout"]
    cdef double[::1] r_vout = rec["vout"]
    cdef unsigned char[:, ::1] r_gu = rec["gates_u"]
    cdef unsigned char[:, ::1] r_gl = rec["gates_l"]
    cdef double[:, ::1] r_du = rec["duty_u"]
    cdef double[:, ::1] r_dl = rec["duty_l"]
    cdef double[:, ::1] r_ibu = rec["ib_u"]
    cdef double[:, ::1] r_ibl = rec["ib_l"]
    cdef double[:, ::1] r_imu = rec["ibmean_u"]
    cdef double[:, ::1] r_iml = rec["ibmean_l"]
    cdef double[:, ::1] r_qu = rec["qflow_u"]
    cdef double[:, ::1] r_ql = rec["qflow_l"]

    cdef double[::1] acc_du = np.zeros(n)
    cdef double[::1] acc_dl = np.zeros(n)
    cdef double[::1] acc_iu_ = np.zeros(max(nb, 1))
    cdef double[::1] acc_il_ = np.zeros(max(nb, 1))
    cdef double[::1] acc_qu = np.zeros(n)
    cdef double[::1] acc_ql = np.zeros(n)
    cdef double[::1] ib_pre_u = np.zeros(max(nb, 1))
    cdef double[::1] ib_pre_l = np.zeros(max(nb, 1))

    cdef int o_vcu = 2, o_vcl = 2 + n, o_ibu = 2 + 2 * n, o_ibl = 2 + 2 * n + nb
    cdef double min_ib = np.inf if nb else 0.0
    cdef double half = 0.5 * dt, sixth = dt / 6.0
    cdef long step, row
    cdef long fault_row = -1
    cdef int j
    cdef double t, t_next, iu_pre, il_pre, varm_u, varm_l, iout, diout
    cdef double r_eff = r_arm + 2.0 * r_load
    cdef double l_eff = l_arm + 2.0 * l_load

    with nogil:
        # Row 0: initial state with the gates active at t = 0.
        if use_schedule:
            for j in range(n):
                gu[j] = su[0, j]
                gl[j] = sl[0, j]
        else:
            _gates(m, 0.0, mat, mav, pfu, pfl, shp, gu, gl)
        varm_u = 0.0
        varm_l = 0.0
        for j in range(n):
            varm_u += gu[j] * y[o_vcu + j]
            varm_l += gl[j] * y[o_vcl + j]
        iout = y[0] - y[1]
        diout = ((varm_l - varm_u) - r_eff * iout) / l_eff
        r_t[0] = 0.0
        r_iu[0] = y[0]
        r_il[0] = y[1]
        r_vau[0] = varm_u
        r_val[0] = varm_l
        r_iout[0] = iout
        r_vout[0] = r_load * iout + l_load * diout
        for j in range(n):
            r_vcu[0, j] = y[o_vcu + j]
            r_vcl[0, j] = y[o_vcl + j]
            r_gu[0, j] = <unsigned char> gu[j]
            r_gl[0, j] = <unsigned char> gl[j]
        for j in range(nb):
            r_ibu[0, j] = y[o_ibu + j]
            r_ibl[0, j] = y[o_ibl + j]

        for step in range(n_steps):
            t = step * dt
            if use_schedule:
                for j in range(n):
                    gu[j] = su[step, j]
                    gl[j] = sl[step, j]
            else:
                _gates(m, t, mat, mav, pfu, pfl, shp, gu, gl)
            _modes(n, v_fd, y, o_vcu, o_ibu, gu, mode_u)
            _modes(n, v_fd, y, o_vcl, o_ibl, gl, mode_l)
            iu_pre = y[0]
            il_pre = y[1]
            for j in range(nb):
                ib_pre_u[j] = y[o_ibu + j]
                ib_pre_l[j] = y[o_ibl + j]

            _deriv(p, y, k1, gu, gl, mode_u, mode_l, cu, cl, gku, gkl)
            for j in range(dim):
                yt[j] = y[j] + half * k1[j]
            _deriv(p, yt, k2, gu, gl, mode_u, mode_l, cu, cl, gku, gkl)
            for j in range(dim):
                yt[j] = y[j] + half * k2[j]
            _deriv(p, yt, k3, gu, gl, mode_u, mode_l, cu, cl, gku, gkl)
            for j in range(dim):
                yt[j] = y[j] + dt * k3[j]
            _deriv(p, yt, k4, gu, gl, mode_u, mode_l, cu, cl, gku, gkl)
            for j in range(dim):
                y[j] += sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])

            # Diode turn-off: branch currents cannot go negative.
            for j in range(nb):
                if y[o_ibu + j] < 0.0:
                    y[o_ibu + j] = 0.0
                if y[o_ibl + j] < 0.0:
                    y[o_ibl + j] = 0.0
                if y[o_ibu + j] < min_ib:
                    min_ib = y[o_ibu + j]
                if y[o_ibl + j] < min_ib:
                    min_ib = y[o_ibl + j]

            for j in range(n):
                acc_du[j] += gu[j]
                acc_dl[j] += gl[j]
                acc_qu[j] += gu[j] * 0.5 * (iu_pre + y[0])
                acc_ql[j] += gl[j] * 0.5 * (il_pre + y[1])
            for j in range(nb):
                acc_iu_[j] += 0.5 * (ib_pre_u[j] + y[o_ibu + j])
                acc_il_[j] += 0.5 * (ib_pre_l[j] + y[o_ibl + j])

            if (step + 1) % record_stride == 0:
                row = (step + 1) // record_stride
                t_next = (step + 1) * dt
                if use_schedule:
                    for j in range(n):
                        gu[j] = su[step + 1, j]
                        gl[j] = sl[step + 1, j]
                else:
                    _gates(m, t_next, mat, mav, pfu, pfl, shp, gu, gl)
                varm_u = 0.0
                varm_l = 0.0
                for j in range(n):
                    varm_u += gu[j] * y[o_vcu + j]
                    varm_l += gl[j] * y[o_vcl + j]
                if not isfinite(varm_u + varm_l + y[0] + y[1]):
                    fault_row = row
                    break
                iout = y[0] - y[1]
                diout = ((varm_l - varm_u) - r_eff * iout) / l_eff
                r_t[row] = t_next
                r_iu[row] = y[0]
                r_il[row] = y[1]
                r_vau[row] = varm_u
                r_val[row] = varm_l
                r_iout[row] = iout
                r_vout[row] = r_load * iout + l_load * diout
                for j in range(n):
                    r_vcu[row, j] = y[o_vcu + j]
                    r_vcl[row, j] = y[o_vcl + j]
                    r_gu[row, j] = <unsigned char> gu[j]
                    r_gl[row, j] = <unsigned char> gl[j]
                    r_du[row, j] = acc_du[j] / record_stride
                    r_dl[row, j] = acc_dl[j] / record_stride
                    r_qu[row, j] = acc_qu[j] / record_stride
                    r_ql[row, j] = acc_ql[j] / record_stride
                    acc_du[j] = 0.0
                    acc_dl[j] = 0.0
                    acc_qu[j] = 0.0
                    acc_ql[j] = 0.0
                for j in range(nb):
                    r_ibu[row, j] = y[o_ibu + j]
                    r_ibl[row, j] = y[o_ibl + j]
                    r_imu[row, j] = acc_iu_[j] / record_stride
                    r_iml[row, j] = acc_il_[j] / record_stride
                    acc_iu_[j] = 0.0
                    acc_il_[j] = 0.0

    if fault_row >= 0:
        raise SimulationFault(
            f"non-finite plant state at t = {fault_row * record_stride * dt:.6e} s "
            f"(record row {fault_row})")

    rec["min_ib"] = float(min_ib) if nb else 0.0
    rec["final_state"] = np.asarray(y).copy()
    return rec
