"""Compiled inner loops for training and prediction.

These mirror :func:`rnnkit.solver.solve_fixed_point` and the analytic
gradient in :mod:`rnnkit.learning` on plain arrays.  Status codes:
0 converged, 1 iteration limit reached, 2 ill-posed neuron, 3 singular
adjoint system.
"""

import numpy as np
from numba import njit

OK, NOT_CONVERGED, ILL_POSED, SINGULAR = 0, 1, 2, 3


@njit(cache=True)
def _map(wp, wm, Lam, lam, r, q, out, allow_divergent):
    L = q.size
    for i in range(L):
        num = Lam[i]
        den = r[i] + lam[i]
        for j in range(L):
            num += q[j] * wp[j, i]
            den += q[j] * wm[j, i]
        if den > 0.0:
            v = num / den
            out[i] = v if v < 1.0 else 1.0
        elif num > 0.0:
            if not allow_divergent:
                return i
            out[i] = 1.0
        else:
            out[i] = 0.0
    return -1


@njit(cache=True)
def picard(wp, wm, Lam, lam, r, q0, tol, max_iterations, alpha, allow_divergent):
    """Returns ``(q, residual, iterations, status)``."""
    q = q0.copy()
    nxt = np.empty_like(q)
    residual = np.inf
    for it in range(1, max_iterations + 1):
        if _map(wp, wm, Lam, lam, r, q, nxt, allow_divergent) >= 0:
            return q, residual, it, ILL_POSED
        residual = 0.0
        for i in range(q.size):
            v = (1.0 - alpha) * q[i] + alpha * nxt[i] if alpha != 1.0 else nxt[i]
            diff = abs(v - q[i])
            if diff > residual:
                residual = diff
            q[i] = v
        if residual <= tol:
            return q, residual, it, OK
    return q, residual, max_iterations, NOT_CONVERGED


@njit(cache=True)
def adjoint_gradient(wp, wm, lam, Lam, d, r, q, err):
    """Gradient of ``sum(err_i * q_i)``-type errors; ``err`` is dE/dq."""
    L = q.size
    inv = np.zeros(L)
    for i in range(L):
        den = r[i] + lam[i]
        num = Lam[i]
        for j in range(L):
            den += q[j] * wm[j, i]
            num += q[j] * wp[j, i]
        # saturated or unreachable neurons do not respond to the weights
        if den > 0.0 and num < den:
            inv[i] = 1.0 / den
    A = np.eye(L)
    for j in range(L):
        for i in range(L):
            A[j, i] -= (wp[j, i] - wm[j, i] * q[i]) * inv[i]
    z = np.linalg.solve(A, err)
    a = z * inv
    g_plus = np.empty((L, L))
    g_minus = np.empty((L, L))
    for u in range(L):
        c = 1.0 / (1.0 - d[u]) if d[u] < 1.0 else 0.0
        s = q[u] * a[u] * c
        for v in range(L):
            g_plus[u, v] = q[u] * a[v] - s
            g_minus[u, v] = -s - q[u] * q[v] * a[v]
    return g_plus, g_minus


@njit(cache=True)
def firing_rates(wp, wm, d, r_fixed):
    L = d.size
    r = np.empty(L)
    for i in range(L):
        if d[i] >= 1.0:
            r[i] = r_fixed[i]
            continue
        s = 0.0
        for j in range(L):
            s += wp[i, j] + wm[i, j]
        r[i] = s / (1.0 - d[i])
    return r


@njit(cache=True)
def sgd_step(wp, wm, d, r_fixed, mask, x, y, input_ids, output_ids, learning_rate, q0, tol,
             max_iterations):
    """In-place projected gradient step on one pattern.

    Only weights with ``mask[u, v]`` set are updated.  Neurons with ``d == 1``
    keep their firing rate from ``r_fixed``.  Returns ``(error, q, status)``;
    weights are untouched unless status is 0.
    """
    L = d.size
    Lam = np.zeros(L)
    for k in range(input_ids.size):
        Lam[input_ids[k]] = x[k]
    lam = np.zeros(L)
    r = firing_rates(wp, wm, d, r_fixed)
    q, residual, its, status = picard(wp, wm, Lam, lam, r, q0, tol, max_iterations, 1.0, True)
    if status != OK:
        q, residual, its, status = picard(wp, wm, Lam, lam, r, q0, tol, max_iterations, 0.5,
                                          True)
    if status != OK:
        return 0.0, q, status
    err = np.zeros(L)
    e = 0.0
    for k in range(output_ids.size):
        o = output_ids[k]
        diff = q[o] - y[k]
        e += diff * diff
        err[o] = 2.0 * diff
    g_plus, g_minus = adjoint_gradient(wp, wm, lam, Lam, d, r, q, err)
    for u in range(L):
        for v in range(L):
            if not mask[u, v]:
                continue
            a = wp[u, v] - learning_rate * g_plus[u, v]
            wp[u, v] = a if a > 0.0 else 0.0
            b = wm[u, v] - learning_rate * g_minus[u, v]
            wm[u, v] = b if b > 0.0 else 0.0
    return e, q, OK
