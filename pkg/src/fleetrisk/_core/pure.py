"""Pure-Python fallback for the hot numeric kernels.

The compiled extension (``fleetrisk._core._speedups``) implements the same
functions; whichever is active is chosen in ``fleetrisk._core``.  Both
backends perform identical floating-point operations in identical order
(sequential dot accumulation, libm transcendentals, no FMA contraction), so
their outputs agree bit for bit.  That property is load-bearing: it keeps
model artifacts reproducible regardless of which backend is installed.
"""

import math

import numpy as np

LINEAR = 0
RBF = 1
SIGMOID = 2

# Step acceptance threshold for pairwise SMO updates.
_MIN_STEP = 1e-12
# Relative objective improvement below which an iteration counts as stalled.
_PROGRESS_EPS = 1e-12
# Relative distance inside which an updated multiplier is snapped onto its
# box edge.  Without this, conservation arithmetic can leave a multiplier one
# ulp off its cap: still classified as movable, yet with no usable room.
_SNAP = 1e-12


def kernel_value(x, y, family, gamma, coef0):
    """Single kernel evaluation with sequential accumulation."""
    n = len(x)
    if family == RBF:
        s = 0.0
        for i in range(n):
            d = x[i] - y[i]
            s += d * d
        return math.exp(-gamma * s)
    s = 0.0
    for i in range(n):
        s += x[i] * y[i]
    if family == LINEAR:
        return s
    return math.tanh(gamma * s + coef0)


def gram_matrix(X, family, gamma, coef0):
    """Dense symmetric kernel matrix; entries computed once and mirrored."""
    n = len(X)
    rows = [[float(v) for v in row] for row in X]
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        ri = rows[i]
        for j in range(i, n):
            v = kernel_value(ri, rows[j], family, gamma, coef0)
            out[i, j] = v
            out[j, i] = v
    return out


def kernel_row(X, x, family, gamma, coef0):
    """Kernel values between each row of X and a single point x."""
    n = len(X)
    xs = [float(v) for v in x]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = kernel_value([float(v) for v in X[i]], xs, family, gamma, coef0)
    return out


def smo_solve(K, y, caps, tol, eta_guard, stall_limit, max_iter):
    """Pairwise (SMO-style) ascent on the dual soft-margin objective.

    Maximizes W(a) = sum(a) - 0.5 * sum_ij a_i a_j y_i y_j K_ij subject to
    sum(a * y) = 0 and 0 <= a_i <= caps_i.  Convergence is the standard
    most-violating-pair gap: max over the "up" set of (y - G) minus the min
    over the "down" set, where G_k = sum_j a_j y_j K_jk.  Pairs are chosen
    deterministically: the maximal violator, partnered with the sample of
    largest error difference (then the opposite extreme as fallback).

    Indefinite kernels are handled by clamping the pair curvature to
    ``eta_guard`` and accepting only objective-improving steps, evaluating
    the segment endpoints when curvature is non-positive.

    Returns (alpha, G, objective, iterations, converged).
    """
    n = K.shape[0]
    alpha = np.zeros(n, dtype=np.float64)
    G = np.zeros(n, dtype=np.float64)
    obj = 0.0
    stall = 0
    iters = 0
    converged = False
    pos = y > 0.0

    while iters < max_iter:
        u = y - G
        at_lower = alpha <= 0.0
        at_upper = alpha >= caps
        in_up = (pos & ~at_upper) | (~pos & ~at_lower)
        in_low = (pos & ~at_lower) | (~pos & ~at_upper)
        b_lo = np.max(u[in_up]) if in_up.any() else -np.inf
        b_hi = np.min(u[in_low]) if in_low.any() else np.inf
        if b_lo - b_hi <= tol:
            converged = True
            break
        b_mid = 0.5 * (b_lo + b_hi)

        viol = np.where(in_up, np.maximum(0.0, u - b_mid), 0.0)
        viol = np.where(in_low, np.maximum(viol, b_mid - u), viol)
        i = int(np.argmax(viol))
        E = b_mid - u

        absdiff = np.abs(E - E[i])
        absdiff[i] = -1.0
        j1 = int(np.argmax(absdiff))
        if u[i] > b_mid:
            idx = np.nonzero(in_low)[0]
            j2 = int(idx[np.argmin(u[idx])])
        else:
            idx = np.nonzero(in_up)[0]
            j2 = int(idx[np.argmax(u[idx])])

        dw = _try_step(K, y, caps, alpha, G, E, i, j1, eta_guard)
        if dw is None and j2 != j1:
            dw = _try_step(K, y, caps, alpha, G, E, i, j2, eta_guard)
        if dw is None:
            break

        obj += dw
        if dw > _PROGRESS_EPS * (1.0 + abs(obj)):
            stall = 0
        else:
            stall += 1
        iters += 1
        if stall > stall_limit:
            break

    return alpha, G, obj, iters, converged


def _try_step(K, y, caps, alpha, G, E, i, j, eta_guard):
    """Optimize the (i, j) pair in place; returns the objective gain or None."""
    if j == i:
        return None
    ai = alpha[i]
    aj = alpha[j]
    yi = y[i]
    yj = y[j]
    if yi != yj:
        L = max(0.0, aj - ai)
        H = min(caps[j], caps[i] + aj - ai)
    else:
        L = max(0.0, ai + aj - caps[i])
        H = min(caps[j], ai + aj)
    if L >= H:
        return None

    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    eta_eff = eta if eta > eta_guard else eta_guard
    Eij = E[i] - E[j]
    cand = aj + yj * Eij / eta_eff
    if cand < L:
        cand = L
    elif cand > H:
        cand = H
    candidates = (cand,) if eta > 0.0 else (cand, L, H)

    best_dw = 0.0
    best_aj = aj
    for c in candidates:
        s = c - aj
        gain = yj * Eij * s - 0.5 * eta * s * s
        if gain > best_dw:
            best_dw = gain
            best_aj = c
    snap_j = _SNAP * (1.0 + caps[j])
    if best_aj <= snap_j:
        best_aj = 0.0
    elif best_aj >= caps[j] - snap_j:
        best_aj = caps[j]
    if best_dw <= 0.0 or abs(best_aj - aj) <= _MIN_STEP:
        return None

    ai_new = ai + yi * yj * (aj - best_aj)
    snap_i = _SNAP * (1.0 + caps[i])
    if ai_new <= snap_i:
        ai_new = 0.0
    elif ai_new >= caps[i] - snap_i:
        ai_new = caps[i]

    ci = (ai_new - ai) * yi
    cj = (best_aj - aj) * yj
    G += ci * K[i, :] + cj * K[j, :]
    alpha[i] = ai_new
    alpha[j] = best_aj
    return best_dw
