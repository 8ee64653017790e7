# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled transient stepping kernel.

Mirror of _stepper_py.run_transient: damped Newton on the nodal current
balance per step, then one implicit-Euler update of the slow edge states.
The nodal systems are tiny, so a dense Gaussian elimination with partial
pivoting is used for the linear solves.
"""

import numpy as np

from libc.math cimport fabs, isfinite

cdef enum:
    MAX_HALVINGS = 8
    _STATUS_OK = 0
    _STATUS_NO_CONVERGENCE = 1
    _STATUS_SINGULAR = 2

STATUS_OK = _STATUS_OK
STATUS_NO_CONVERGENCE = _STATUS_NO_CONVERGENCE
STATUS_SINGULAR = _STATUS_SINGULAR


cdef int _solve_dense(double[:, ::1] a, double[::1] b, double[::1] x, Py_ssize_t n) noexcept nogil:
    """Gaussian elimination with partial pivoting; a and b are clobbered.

    Returns 0 on success, 1 if the matrix is numerically singular.
    """
    cdef Py_ssize_t i, j, k, piv
    cdef double best, factor, tmp
    for k in range(n):
        piv = k
        best = fabs(a[k, k])
        for i in range(k + 1, n):
            if fabs(a[i, k]) > best:
                best = fabs(a[i, k])
                piv = i
        if best == 0.0 or not isfinite(best):
            return 1
        if piv != k:
            for j in range(k, n):
                tmp = a[k, j]
                a[k, j] = a[piv, j]
                a[piv, j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, n):
            factor = a[i, k] / a[k, k]
            if factor != 0.0:
                for j in range(k + 1, n):
                    a[i, j] -= factor * a[k, j]
                b[i] -= factor * b[k]
            a[i, k] = 0.0
    for i in range(n - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, n):
            tmp -= a[i, j] * x[j]
        x[i] = tmp / a[i, i]
    return 0


cdef double _residual(
    double[::1] v,
    Py_ssize_t[::1] edge_a,
    Py_ssize_t[::1] edge_b,
    double[::1] g_eff,
    double[::1] alpha2,
    double[::1] alpha3,
    Py_ssize_t[::1] sa,
    Py_ssize_t[::1] sb,
    double[::1] res,
    Py_ssize_t n_free,
    Py_ssize_t n_edges,
) noexcept nogil:
    cdef Py_ssize_t e, i
    cdef double dv, cur, norm
    for i in range(n_free):
        res[i] = 0.0
    for e in range(n_edges):
        dv = v[edge_a[e]] - v[edge_b[e]]
        cur = g_eff[e] * (dv + alpha2[e] * dv * dv + alpha3[e] * dv * dv * dv)
        if sa[e] >= 0:
            res[sa[e]] += cur
        if sb[e] >= 0:
            res[sb[e]] -= cur
    norm = 0.0
    for i in range(n_free):
        if fabs(res[i]) > norm:
            norm = fabs(res[i])
    return norm


def run_transient(
    edge_a_in,
    edge_b_in,
    g_fast_in,
    g_slow_in,
    tau_in,
    alpha2_in,
    alpha3_in,
    v_half_in,
    w0,
    free_idx_in,
    fixed_idx_in,
    fixed_v_in,
    n_nodes,
    dt,
    newton_tol_v,
    max_iter,
):
    """See _stepper_py.run_transient; identical contract."""
    cdef Py_ssize_t[::1] edge_a = np.ascontiguousarray(edge_a_in, dtype=np.intp)
    cdef Py_ssize_t[::1] edge_b = np.ascontiguousarray(edge_b_in, dtype=np.intp)
    cdef double[::1] g_fast = np.ascontiguousarray(g_fast_in, dtype=np.float64)
    cdef double[::1] g_slow = np.ascontiguousarray(g_slow_in, dtype=np.float64)
    cdef double[::1] tau = np.ascontiguousarray(tau_in, dtype=np.float64)
    cdef double[::1] alpha2 = np.ascontiguousarray(alpha2_in, dtype=np.float64)
    cdef double[::1] alpha3 = np.ascontiguousarray(alpha3_in, dtype=np.float64)
    cdef double[::1] v_half = np.ascontiguousarray(v_half_in, dtype=np.float64)
    cdef Py_ssize_t[::1] free_idx = np.ascontiguousarray(free_idx_in, dtype=np.intp)
    cdef Py_ssize_t[::1] fixed_idx = np.ascontiguousarray(fixed_idx_in, dtype=np.intp)
    cdef double[:, ::1] fixed_v = np.ascontiguousarray(fixed_v_in, dtype=np.float64)

    w_arr = np.array(w0, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr

    cdef Py_ssize_t n_steps = fixed_v.shape[1]
    cdef Py_ssize_t n_free = free_idx.shape[0]
    cdef Py_ssize_t n_edges = edge_a.shape[0]
    cdef Py_ssize_t nn = n_nodes
    cdef double ddt = dt
    cdef double tol_v = newton_tol_v
    cdef Py_ssize_t iter_budget = max_iter

    volts_arr = np.zeros((n_steps, nn), dtype=np.float64)
    cdef double[:, ::1] volts = volts_arr

    cdef double[::1] v = np.zeros(nn, dtype=np.float64)
    cdef double[::1] res = np.zeros(max(n_free, 1), dtype=np.float64)
    cdef double[::1] dx = np.zeros(max(n_free, 1), dtype=np.float64)
    cdef double[::1] rhs = np.zeros(max(n_free, 1), dtype=np.float64)
    cdef double[::1] vf = np.zeros(max(n_free, 1), dtype=np.float64)
    cdef double[:, ::1] jac = np.zeros((max(n_free, 1), max(n_free, 1)), dtype=np.float64)
    cdef double[::1] g_eff = np.zeros(max(n_edges, 1), dtype=np.float64)
    cdef double[::1] w_decay = np.zeros(max(n_edges, 1), dtype=np.float64)
    cdef double[::1] w_gain = np.zeros(max(n_edges, 1), dtype=np.float64)

    cdef Py_ssize_t[::1] sa = np.empty(max(n_edges, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] sb = np.empty(max(n_edges, 1), dtype=np.intp)

    slot_arr = np.full(nn, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] slot = slot_arr
    cdef Py_ssize_t i, j, e, step, it, h
    cdef double i_tol, res_norm, new_norm, scale, dv, gp, x, sigma
    cdef int status = _STATUS_OK
    cdef Py_ssize_t fail_step = -1

    for i in range(n_free):
        slot[free_idx[i]] = i
    for e in range(n_edges):
        sa[e] = slot[edge_a[e]]
        sb[e] = slot[edge_b[e]]

    i_tol = 0.0
    for e in range(n_edges):
        i_tol += g_fast[e] + g_slow[e]
        w_decay[e] = 1.0 / (1.0 + ddt / tau[e])
        w_gain[e] = (ddt / tau[e]) * w_decay[e]
    i_tol *= tol_v

    with nogil:
        for step in range(n_steps):
            for i in range(fixed_idx.shape[0]):
                v[fixed_idx[i]] = fixed_v[i, step]
            for e in range(n_edges):
                g_eff[e] = g_fast[e] + g_slow[e] * w[e]

            if n_free > 0:
                res_norm = _residual(v, edge_a, edge_b, g_eff, alpha2, alpha3,
                                     sa, sb, res, n_free, n_edges)
                it = 0
                while res_norm > i_tol:
                    if it >= iter_budget:
                        status = _STATUS_NO_CONVERGENCE
                        fail_step = step
                        break
                    it += 1
                    for i in range(n_free):
                        for j in range(n_free):
                            jac[i, j] = 0.0
                        rhs[i] = -res[i]
                    for e in range(n_edges):
                        dv = v[edge_a[e]] - v[edge_b[e]]
                        gp = g_eff[e] * (1.0 + 2.0 * alpha2[e] * dv + 3.0 * alpha3[e] * dv * dv)
                        if sa[e] >= 0:
                            jac[sa[e], sa[e]] += gp
                        if sb[e] >= 0:
                            jac[sb[e], sb[e]] += gp
                        if sa[e] >= 0 and sb[e] >= 0:
                            jac[sa[e], sb[e]] -= gp
                            jac[sb[e], sa[e]] -= gp
                    if _solve_dense(jac, rhs, dx, n_free) != 0:
                        status = _STATUS_SINGULAR
                        fail_step = step
                        break

                    for i in range(n_free):
                        vf[i] = v[free_idx[i]]
                    scale = 1.0
                    for h in range(MAX_HALVINGS + 1):
                        for i in range(n_free):
                            v[free_idx[i]] = vf[i] + scale * dx[i]
                        new_norm = _residual(v, edge_a, edge_b, g_eff, alpha2, alpha3,
                                             sa, sb, res, n_free, n_edges)
                        if isfinite(new_norm) and new_norm <= res_norm:
                            break
                        scale *= 0.5
                    res_norm = new_norm

                if status != _STATUS_OK:
                    break

            for i in range(nn):
                volts[step, i] = v[i]

            for e in range(n_edges):
                dv = v[edge_a[e]] - v[edge_b[e]]
                x = fabs(dv) / v_half[e]
                sigma = x * x / (1.0 + x * x)
                w[e] = w[e] * w_decay[e] + sigma * w_gain[e]
                if w[e] < 0.0:
                    w[e] = 0.0
                elif w[e] > 1.0:
                    w[e] = 1.0

    return volts_arr, w_arr, status, int(fail_step)
