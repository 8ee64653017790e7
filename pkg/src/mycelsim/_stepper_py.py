"""Pure-numpy transient stepping kernel.

Fallback used when the compiled extension (_stepper_cy) is not built.  Both
kernels implement the same algorithm: per time step, a damped Newton solve of
the Kirchhoff current balance at the free nodes with the slow edge states
frozen, followed by one implicit-Euler relaxation step of the states.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1
STATUS_SINGULAR = 2

MAX_HALVINGS = 8


def run_transient(
    edge_a,
    edge_b,
    g_fast,
    g_slow,
    tau,
    alpha2,
    alpha3,
    v_half,
    w0,
    free_idx,
    fixed_idx,
    fixed_v,
    n_nodes,
    dt,
    newton_tol_v,
    max_iter,
):
    """Integrate the network over fixed_v.shape[1] steps.

    edge_* and the parameter vectors have one entry per edge; fixed_v is a
    (n_fixed, n_steps) matrix of prescribed node voltages.  Returns
    (volts, w, status, fail_step) where volts is (n_steps, n_nodes) and w the
    final per-edge slow state.  status is STATUS_OK, or the failure kind with
    fail_step indicating the offending step.
    """
    edge_a = np.asarray(edge_a, dtype=np.intp)
    edge_b = np.asarray(edge_b, dtype=np.intp)
    free_idx = np.asarray(free_idx, dtype=np.intp)
    fixed_idx = np.asarray(fixed_idx, dtype=np.intp)
    fixed_v = np.asarray(fixed_v, dtype=float)
    w = np.asarray(w0, dtype=float).copy()

    n_steps = fixed_v.shape[1]
    n_free = free_idx.size
    volts = np.zeros((n_steps, n_nodes))
    v = np.zeros(n_nodes)

    # Residual tolerance in amperes: voltage tolerance times the total
    # conductance scale, which keeps the convergence test (and therefore the
    # solution) invariant under uniform conductance scaling.
    i_tol = newton_tol_v * float(np.sum(g_fast) + np.sum(g_slow))

    slot = np.full(n_nodes, -1, dtype=np.intp)
    slot[free_idx] = np.arange(n_free)
    sa = slot[edge_a]
    sb = slot[edge_b]
    a_free = sa >= 0
    b_free = sb >= 0
    ab_free = a_free & b_free

    w_decay = 1.0 / (1.0 + dt / tau)
    w_gain = (dt / tau) * w_decay

    for step in range(n_steps):
        v[fixed_idx] = fixed_v[:, step]
        g_eff = g_fast + g_slow * w

        if n_free > 0:
            dv = v[edge_a] - v[edge_b]
            cur = g_eff * (dv + alpha2 * dv * dv + alpha3 * dv * dv * dv)
            res = np.zeros(n_free)
            np.add.at(res, sa[a_free], cur[a_free])
            np.subtract.at(res, sb[b_free], cur[b_free])
            res_norm = float(np.max(np.abs(res)))

            iters = 0
            while res_norm > i_tol:
                if iters >= max_iter:
                    return volts, w, STATUS_NO_CONVERGENCE, step
                iters += 1
                gp = g_eff * (1.0 + 2.0 * alpha2 * dv + 3.0 * alpha3 * dv * dv)
                jac = np.zeros((n_free, n_free))
                np.add.at(jac, (sa[a_free], sa[a_free]), gp[a_free])
                np.add.at(jac, (sb[b_free], sb[b_free]), gp[b_free])
                np.subtract.at(jac, (sa[ab_free], sb[ab_free]), gp[ab_free])
                np.subtract.at(jac, (sb[ab_free], sa[ab_free]), gp[ab_free])
                try:
                    dx = np.linalg.solve(jac, -res)
                except np.linalg.LinAlgError:
                    return volts, w, STATUS_SINGULAR, step
                if not np.all(np.isfinite(dx)):
                    return volts, w, STATUS_SINGULAR, step

                # Damped update: halve the step while the residual grows.
                vf = v[free_idx].copy()
                scale = 1.0
                for _ in range(MAX_HALVINGS + 1):
                    v[free_idx] = vf + scale * dx
                    dv = v[edge_a] - v[edge_b]
                    cur = g_eff * (dv + alpha2 * dv * dv + alpha3 * dv * dv * dv)
                    res = np.zeros(n_free)
                    np.add.at(res, sa[a_free], cur[a_free])
                    np.subtract.at(res, sb[b_free], cur[b_free])
                    new_norm = float(np.max(np.abs(res)))
                    if np.isfinite(new_norm) and new_norm <= res_norm:
                        break
                    scale *= 0.5
                res_norm = new_norm

        volts[step] = v

        # Implicit-Euler relaxation toward the voltage-dependent target.
        dv = v[edge_a] - v[edge_b]
        x = np.abs(dv) / v_half
        sigma = x * x / (1.0 + x * x)
        w = w * w_decay + sigma * w_gain
        np.clip(w, 0.0, 1.0, out=w)

    return volts, w, STATUS_OK, -1
