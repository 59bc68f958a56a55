"""Compiled time-stepping loops. State arrays are updated in place."""

import numpy as np
from numba import njit


@njit(cache=True)
def _csr_matvec(indptr, indices, data, x, out):
    for i in range(len(indptr) - 1):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


@njit(cache=True)
def _limit(threshold):
    # NaN fails every comparison, so "not abs(v) <= limit" also catches it
    return threshold if threshold > 0.0 else np.inf


@njit(cache=True)
def leapfrog_loop(indptr, indices, data, z_prev, z_curr, n_steps, dt, threshold):
    """Advance (z_prev, z_curr) by n_steps; returns the failing step or -1."""
    n = len(z_curr)
    az = np.empty(n)
    dt2 = dt * dt
    limit = _limit(threshold)
    for step in range(n_steps):
        _csr_matvec(indptr, indices, data, z_curr, az)
        bad = False
        for i in range(n):
            znew = 2.0 * z_curr[i] - z_prev[i] - dt2 * az[i]
            z_prev[i] = z_curr[i]
            z_curr[i] = znew
            if not abs(znew) <= limit:
                bad = True
        if bad:
            return step
    return -1


@njit(cache=True)
def lts_loop(
    c_indptr, c_indices, c_data,
    f_indptr, f_indices, f_data,
    support,
    z_prev, z_curr, n_steps,
    c_first, c_inner, beta_int, beta_half, gamma, threshold,
):
    """Stabilized LTS loop.

    The coarse operator A(I-P) is applied on all rows. The fine operator A P is
    stored restricted to the rows ``support`` (those coupled to fine unknowns)
    with column indices local to ``support``. Off the support the substep
    recurrence collapses to q_1 = z_n + gamma * w_n with gamma = -dt^2/2.
    """
    n = len(z_curr)
    ns = len(support)
    p = len(beta_int) + 1
    w = np.empty(n)
    ws = np.empty(ns)
    q_old = np.empty(ns)
    q = np.empty(ns)
    q_new = np.empty(ns)
    aq = np.empty(ns)
    limit = _limit(threshold)
    for step in range(n_steps):
        _csr_matvec(c_indptr, c_indices, c_data, z_curr, w)
        for j in range(ns):
            ws[j] = w[support[j]]
            q_old[j] = z_curr[support[j]]
        _csr_matvec(f_indptr, f_indices, f_data, q_old, aq)
        for j in range(ns):
            q[j] = q_old[j] - c_first * (ws[j] + aq[j])
        for m in range(1, p):
            b = beta_int[m - 1]
            bh = beta_half[m - 1]
            _csr_matvec(f_indptr, f_indices, f_data, q, aq)
            for j in range(ns):
                q_new[j] = (1.0 + b) * q[j] - b * q_old[j] - c_inner * bh * (ws[j] + aq[j])
            for j in range(ns):
                q_old[j] = q[j]
                q[j] = q_new[j]
        for j in range(ns):
            q_new[j] = -z_prev[support[j]] + 2.0 * q[j]
        bad = False
        for i in range(n):
            znew = -z_prev[i] + 2.0 * (z_curr[i] + gamma * w[i])
            z_prev[i] = z_curr[i]
            z_curr[i] = znew
        for j in range(ns):
            z_curr[support[j]] = q_new[j]
            if not abs(q_new[j]) <= limit:
                bad = True
        for i in range(n):
            if not abs(z_curr[i]) <= limit:
                bad = True
        if bad:
            return step
    return -1
