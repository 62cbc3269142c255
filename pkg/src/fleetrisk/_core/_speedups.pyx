# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of fleetrisk._core.pure.

Every function mirrors the pure implementation operation for operation
(sequential accumulation, libm transcendentals, same tie-breaking scans),
so both backends return bit-identical results.  The module is built with
-ffp-contract=off to keep that guarantee.
"""

from libc.math cimport exp, fabs, tanh

import numpy as np

cimport numpy as cnp

cnp.import_array()

LINEAR = 0
RBF = 1
SIGMOID = 2

cdef double _MIN_STEP = 1e-12
cdef double _SNAP = 1e-12
cdef double _PROGRESS_EPS = 1e-12
cdef double _INF = float("inf")


cdef inline double _pair(const double[::1] x, const double[::1] y,
                         int family, double gamma, double coef0) noexcept nogil:
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double s = 0.0
    cdef double d
    if family == 1:  # RBF
        for i in range(n):
            d = x[i] - y[i]
            s += d * d
        return exp(-gamma * s)
    for i in range(n):
        s += x[i] * y[i]
    if family == 0:  # LINEAR
        return s
    return tanh(gamma * s + coef0)


def kernel_value(x, y, int family, double gamma, double coef0):
    """Single kernel evaluation with sequential accumulation."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    return _pair(xv, yv, family, gamma, coef0)


def gram_matrix(X, int family, double gamma, double coef0):
    """Dense symmetric kernel matrix; entries computed once and mirrored."""
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t i, j, n = Xv.shape[0]
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double v
    with nogil:
        for i in range(n):
            for j in range(i, n):
                v = _pair(Xv[i], Xv[j], family, gamma, coef0)
                out[i, j] = v
                out[j, i] = v
    return out_arr


def kernel_row(X, x, int family, double gamma, double coef0):
    """Kernel values between each row of X and a single point x."""
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t i, n = Xv.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _pair(Xv[i], xv, family, gamma, coef0)
    return out_arr


def smo_solve(K, y, caps, double tol, double eta_guard,
              long stall_limit, long max_iter):
    """Pairwise SMO ascent; see fleetrisk._core.pure.smo_solve."""
    cdef const double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(caps, dtype=np.float64)
    cdef Py_ssize_t n = Kv.shape[0]

    alpha_arr = np.zeros(n, dtype=np.float64)
    G_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr
    cdef double[::1] u = np.empty(n, dtype=np.float64)
    cdef double[::1] E = np.empty(n, dtype=np.float64)
    cdef cnp.uint8_t[::1] in_up = np.empty(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] in_low = np.empty(n, dtype=np.uint8)

    cdef double obj = 0.0
    cdef long stall = 0
    cdef long iters = 0
    cdef bint converged = False
    cdef Py_ssize_t k, i, j1, j2
    cdef double b_lo, b_hi, b_mid, v, t, best, dw
    cdef bint up_side, lower, upper, is_pos

    with nogil:
        while iters < max_iter:
            b_lo = -_INF
            b_hi = _INF
            for k in range(n):
                u[k] = yv[k] - G[k]
                lower = alpha[k] <= 0.0
                upper = alpha[k] >= cv[k]
                is_pos = yv[k] > 0.0
                in_up[k] = (is_pos and not upper) or ((not is_pos) and not lower)
                in_low[k] = (is_pos and not lower) or ((not is_pos) and not upper)
                if in_up[k] and u[k] > b_lo:
                    b_lo = u[k]
                if in_low[k] and u[k] < b_hi:
                    b_hi = u[k]
            if b_lo - b_hi <= tol:
                converged = True
                break
            b_mid = 0.5 * (b_lo + b_hi)

            i = 0
            best = -1.0
            for k in range(n):
                v = 0.0
                if in_up[k]:
                    t = u[k] - b_mid
                    if t > v:
                        v = t
                if in_low[k]:
                    t = b_mid - u[k]
                    if t > v:
                        v = t
                if v > best:
                    best = v
                    i = k
                E[k] = b_mid - u[k]

            j1 = 0
            best = -2.0
            for k in range(n):
                if k == i:
                    continue
                t = fabs(E[k] - E[i])
                if t > best:
                    best = t
                    j1 = k
            up_side = u[i] > b_mid
            j2 = -1
            if up_side:
                best = _INF
                for k in range(n):
                    if in_low[k] and u[k] < best:
                        best = u[k]
                        j2 = k
            else:
                best = -_INF
                for k in range(n):
                    if in_up[k] and u[k] > best:
                        best = u[k]
                        j2 = k

            dw = _try_step(Kv, yv, cv, alpha, G, E, i, j1, eta_guard, n)
            if dw < 0.0 and j2 != j1 and j2 >= 0:
                dw = _try_step(Kv, yv, cv, alpha, G, E, i, j2, eta_guard, n)
            if dw < 0.0:
                break

            obj += dw
            if dw > _PROGRESS_EPS * (1.0 + fabs(obj)):
                stall = 0
            else:
                stall += 1
            iters += 1
            if stall > stall_limit:
                break

    return alpha_arr, G_arr, obj, int(iters), bool(converged)


cdef double _try_step(const double[:, ::1] K, const double[::1] y,
                      const double[::1] caps, double[::1] alpha,
                      double[::1] G, const double[::1] E,
                      Py_ssize_t i, Py_ssize_t j, double eta_guard,
                      Py_ssize_t n) noexcept nogil:
    """Optimize the (i, j) pair in place; returns the gain, or -1 on failure."""
    cdef double ai, aj, yi, yj, L, H, eta, eta_eff, Eij, cand
    cdef double best_dw, best_aj, s, gain, ai_new, ci, cj, snap_i, snap_j
    cdef double c0, c1, c2
    cdef int ncand, m
    if j == i:
        return -1.0
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
        return -1.0

    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    eta_eff = eta if eta > eta_guard else eta_guard
    Eij = E[i] - E[j]
    cand = aj + yj * Eij / eta_eff
    if cand < L:
        cand = L
    elif cand > H:
        cand = H
    c0 = cand
    c1 = L
    c2 = H
    ncand = 1 if eta > 0.0 else 3

    best_dw = 0.0
    best_aj = aj
    for m in range(ncand):
        if m == 0:
            cand = c0
        elif m == 1:
            cand = c1
        else:
            cand = c2
        s = cand - aj
        gain = yj * Eij * s - 0.5 * eta * s * s
        if gain > best_dw:
            best_dw = gain
            best_aj = cand
    snap_j = _SNAP * (1.0 + caps[j])
    if best_aj <= snap_j:
        best_aj = 0.0
    elif best_aj >= caps[j] - snap_j:
        best_aj = caps[j]
    if best_dw <= 0.0 or fabs(best_aj - aj) <= _MIN_STEP:
        return -1.0

    ai_new = ai + yi * yj * (aj - best_aj)
    snap_i = _SNAP * (1.0 + caps[i])
    if ai_new <= snap_i:
        ai_new = 0.0
    elif ai_new >= caps[i] - snap_i:
        ai_new = caps[i]

    ci = (ai_new - ai) * yi
    cj = (best_aj - aj) * yj
    cdef Py_ssize_t k
    for k in range(n):
        G[k] += ci * K[i, k] + cj * K[j, k]
    alpha[i] = ai_new
    alpha[j] = best_aj
    return best_dw
