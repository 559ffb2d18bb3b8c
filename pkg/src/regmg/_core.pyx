# cython: language_level=3
"""Compiled kernels; same contracts as :mod:`regmg._kernels`."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, sqrt, INFINITY, isfinite

cnp.import_array()

BACKEND = "cython"


cdef int _lu_solve(double[:, ::1] M, double[::1] b, Py_ssize_t n) noexcept nogil:
    """Solve M x = b in place (x returned in b) by Gaussian elimination with partial pivoting.

    M is overwritten. Returns 0 on success, 1 if a pivot is exactly zero.
    """
    cdef Py_ssize_t i, j, k, p
    cdef double piv, f, tmp
    for k in range(n):
        p = k
        piv = fabs(M[k, k])
        for i in range(k + 1, n):
            if fabs(M[i, k]) > piv:
                piv = fabs(M[i, k])
                p = i
        if piv == 0.0:
            return 1
        if p != k:
            for j in range(n):
                tmp = M[k, j]
                M[k, j] = M[p, j]
                M[p, j] = tmp
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
        for i in range(k + 1, n):
            f = M[i, k] / M[k, k]
            if f != 0.0:
                for j in range(k, n):
                    M[i, j] -= f * M[k, j]
                b[i] -= f * b[k]
    for i in range(n - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, n):
            tmp -= M[i, j] * b[j]
        b[i] = tmp / M[i, i]
    return 0


cdef void _log_softmax_row(const double[:, ::1] z, Py_ssize_t s, Py_ssize_t n, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t a
    cdef double m = z[s, 0], acc = 0.0
    for a in range(1, n):
        if z[s, a] > m:
            m = z[s, a]
    for a in range(n):
        acc += exp(z[s, a] - m)
    acc = m + log(acc)
    for a in range(n):
        out[s, a] = z[s, a] - acc


def gradients(const double[:, :, :, ::1] P, const double[:, :, ::1] r, const double[::1] rho,
              double gamma, const double[:, ::1] theta, const double[:, ::1] psi, double tau):
    """Exact softmax policy gradients of J_tau: ``(grad_theta, grad_psi, j_tau)``."""
    cdef Py_ssize_t S = r.shape[0], A = r.shape[1], B = r.shape[2]
    cdef Py_ssize_t s, a, b, t
    cdef double w, acc, ent_pi, ent_phi, j = 0.0, scale
    lpi_a = np.empty((S, A))
    lphi_a = np.empty((S, B))
    M_a = np.empty((S, S))
    MT_a = np.empty((S, S))
    v_a = np.empty(S)
    d_a = np.empty(S)
    gt_a = np.empty((S, A))
    gp_a = np.empty((S, B))
    qa_a = np.empty(A)
    qb_a = np.empty(B)
    cdef double[:, ::1] lpi = lpi_a, lphi = lphi_a, M = M_a, MT = MT_a, gt = gt_a, gp = gp_a
    cdef double[::1] v = v_a, d = d_a, qa = qa_a, qb = qb_a
    cdef double adv
    cdef int err
    with nogil:
        for s in range(S):
            _log_softmax_row(theta, s, A, lpi)
            _log_softmax_row(psi, s, B, lphi)
        for s in range(S):
            for t in range(S):
                M[s, t] = 0.0
            acc = 0.0
            ent_pi = 0.0
            ent_phi = 0.0
            for a in range(A):
                ent_pi -= exp(lpi[s, a]) * lpi[s, a]
            for b in range(B):
                ent_phi -= exp(lphi[s, b]) * lphi[s, b]
            for a in range(A):
                for b in range(B):
                    w = exp(lpi[s, a] + lphi[s, b])
                    acc += w * r[s, a, b]
                    for t in range(S):
                        M[s, t] -= gamma * w * P[s, a, b, t]
            M[s, s] += 1.0
            v[s] = acc + tau * ent_pi - tau * ent_phi
        for s in range(S):
            d[s] = (1.0 - gamma) * rho[s]
            for t in range(S):
                MT[s, t] = M[t, s]
        err = _lu_solve(M, v, S)
        if err == 0:
            err = _lu_solve(MT, d, S)
        if err == 0:
            for s in range(S):
                j += rho[s] * v[s]
            for s in range(S):
                scale = d[s] / (1.0 - gamma)
                for a in range(A):
                    qa[a] = 0.0
                for b in range(B):
                    qb[b] = 0.0
                for a in range(A):
                    for b in range(B):
                        adv = r[s, a, b] - v[s] - tau * lpi[s, a] + tau * lphi[s, b]
                        for t in range(S):
                            adv += gamma * P[s, a, b, t] * v[t]
                        qa[a] += exp(lphi[s, b]) * adv
                        qb[b] += exp(lpi[s, a]) * adv
                for a in range(A):
                    gt[s, a] = scale * exp(lpi[s, a]) * qa[a]
                for b in range(B):
                    gp[s, b] = scale * exp(lphi[s, b]) * qb[b]
    if err != 0:
        raise np.linalg.LinAlgError("singular evaluation system")
    return gt_a, gp_a, j


def soft_value_iteration(const double[:, :, ::1] T, const double[:, ::1] R, const double[::1] bonus,
                         double gamma, double tau, double stop, long max_iters, v0):
    """Soft/hard value iteration for a maximizing MDP: ``(v, q, iters, residual)``."""
    cdef Py_ssize_t S = R.shape[0], U = R.shape[1]
    cdef Py_ssize_t s, u, t
    cdef long it = 0
    cdef double residual = INFINITY, m, acc, diff
    v_a = np.array(v0, dtype=np.float64, copy=True)
    vn_a = np.empty(S)
    q_a = np.empty((S, U))
    cdef double[::1] v = v_a, vn = vn_a
    cdef double[:, ::1] q = q_a
    with nogil:
        while it < max_iters:
            residual = 0.0
            for s in range(S):
                m = -INFINITY
                for u in range(U):
                    acc = R[s, u]
                    for t in range(S):
                        acc += gamma * T[s, u, t] * v[t]
                    q[s, u] = acc
                    if acc > m:
                        m = acc
                if tau > 0.0:
                    acc = 0.0
                    for u in range(U):
                        acc += exp((q[s, u] - m) / tau)
                    vn[s] = bonus[s] + m + tau * log(acc)
                else:
                    vn[s] = bonus[s] + m
                diff = fabs(vn[s] - v[s])
                if diff > residual:
                    residual = diff
            for s in range(S):
                v[s] = vn[s]
            it += 1
            if residual <= stop:
                break
        for s in range(S):
            for u in range(U):
                acc = R[s, u]
                for t in range(S):
                    acc += gamma * T[s, u, t] * v[t]
                q[s, u] = acc
    return v_a, q_a, it, residual


# -- regularized matrix game ------------------------------------------------------

cdef void _lsm(double* z, Py_ssize_t n) noexcept nogil:
    """In-place log-softmax of a vector."""
    cdef Py_ssize_t i
    cdef double m = z[0], acc = 0.0
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    for i in range(n):
        acc += exp(z[i] - m)
    acc = m + log(acc)
    for i in range(n):
        z[i] -= acc


cdef double _residual(const double[:, ::1] G, double inv_t, Py_ssize_t A, Py_ssize_t B,
                      double* u, double* w, double* lp, double* lq, double* F) noexcept nogil:
    """Fills lp, lq and F = (u - lp, w - lq); returns ||F||^2 (inf if non-finite)."""
    cdef Py_ssize_t a, b
    cdef double acc, f2 = 0.0
    for a in range(A):
        acc = 0.0
        for b in range(B):
            acc += G[a, b] * exp(w[b])
        lp[a] = acc * inv_t
    for b in range(B):
        acc = 0.0
        for a in range(A):
            acc += G[a, b] * exp(u[a])
        lq[b] = -acc * inv_t
    _lsm(lp, A)
    _lsm(lq, B)
    for a in range(A):
        F[a] = u[a] - lp[a]
        f2 += F[a] * F[a]
    for b in range(B):
        F[A + b] = w[b] - lq[b]
        f2 += F[A + b] * F[A + b]
    if not isfinite(f2):
        return INFINITY
    return f2


cdef class _QreWork:
    cdef double[::1] u, w, un, wn, lp, lq, F, Fn, step
    cdef double[:, ::1] J

    def __init__(self, Py_ssize_t A, Py_ssize_t B):
        self.u = np.empty(A)
        self.w = np.empty(B)
        self.un = np.empty(A)
        self.wn = np.empty(B)
        self.lp = np.empty(A)
        self.lq = np.empty(B)
        self.F = np.empty(A + B)
        self.Fn = np.empty(A + B)
        self.step = np.empty(A + B)
        self.J = np.empty((A + B, A + B))


cdef int _newton(const double[:, ::1] G, double inv_t, Py_ssize_t A, Py_ssize_t B, _QreWork wk,
                 double ftol, int max_steps, int* steps) noexcept nogil:
    """Damped Newton on the log-space fixed-point map; returns 1 if converged."""
    cdef Py_ssize_t n = A + B, i, j, a, b
    cdef int k
    cdef double f2, fn2, fmax, t, acc, pg
    cdef double* u = &wk.u[0]
    cdef double* w = &wk.w[0]
    cdef double* un = &wk.un[0]
    cdef double* wn = &wk.wn[0]
    cdef double* lp = &wk.lp[0]
    cdef double* lq = &wk.lq[0]
    cdef double* F = &wk.F[0]
    cdef double* Fn = &wk.Fn[0]
    cdef double* stp = &wk.step[0]
    cdef double[:, ::1] J = wk.J
    for k in range(max_steps):
        f2 = _residual(G, inv_t, A, B, u, w, lp, lq, F)
        fmax = 0.0
        for i in range(n):
            if fabs(F[i]) > fmax:
                fmax = fabs(F[i])
        if fmax <= ftol:
            steps[0] = k
            return 1
        for i in range(n):
            for j in range(n):
                J[i, j] = 0.0
            J[i, i] = 1.0
            stp[i] = -F[i]
        # top-right block: -(G - 1 p'G) Y / t
        for b in range(B):
            pg = 0.0
            for a in range(A):
                pg += exp(lp[a]) * G[a, b]
            for a in range(A):
                J[a, A + b] = -(G[a, b] - pg) * exp(w[b]) * inv_t
        # bottom-left block: (G' - 1 q'G') X / t
        for a in range(A):
            pg = 0.0
            for b in range(B):
                pg += exp(lq[b]) * G[a, b]
            for b in range(B):
                J[A + b, a] = (G[a, b] - pg) * exp(u[a]) * inv_t
        if _lu_solve(J, wk.step, n) != 0:
            steps[0] = k
            return 0
        for i in range(n):
            if not isfinite(stp[i]):
                steps[0] = k
                return 0
        t = 1.0
        while True:
            for a in range(A):
                un[a] = u[a] + t * stp[a]
            for b in range(B):
                wn[b] = w[b] + t * stp[A + b]
            _lsm(un, A)
            _lsm(wn, B)
            fn2 = _residual(G, inv_t, A, B, un, wn, lp, lq, Fn)
            if fn2 < (1.0 - 1e-4 * t) * f2:
                for a in range(A):
                    u[a] = un[a]
                for b in range(B):
                    w[b] = wn[b]
                break
            t *= 0.5
            if t < 1e-8:
                steps[0] = k + 1
                return 0
    _residual(G, inv_t, A, B, u, w, lp, lq, F)
    steps[0] = max_steps
    fmax = 0.0
    for i in range(n):
        if fabs(F[i]) > fmax:
            fmax = fabs(F[i])
    return 1 if fmax <= ftol else 0


def qre_matrix(G, double tau, double tol, long max_iters, x0, y0):
    """Entropy-regularized saddle point of a matrix game: ``(x, y, value, iters, residual)``."""
    G_arr = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t A = G_arr.shape[0], B = G_arr.shape[1], a, b
    Gc_arr = G_arr - G_arr.mean()
    cdef double[:, ::1] Gc = Gc_arr
    cdef double spread = float(G_arr.max() - G_arr.min())
    cdef double gmax = float(np.abs(Gc_arr).max())
    cdef _QreWork wk = _QreWork(A, B)
    cdef double ftol = 1e-14 * max(1.0, gmax / tau)
    cdef double t, t_next, factor, ft, gap
    cdef int steps = 0, ok, final
    cdef long it
    cdef double[::1] x0v = np.log(np.asarray(x0, dtype=np.float64))
    cdef double[::1] y0v = np.log(np.asarray(y0, dtype=np.float64))
    save_u = np.empty(A)
    save_w = np.empty(B)
    cdef double[::1] su = save_u, sw = save_w
    for a in range(A):
        wk.u[a] = x0v[a]
    for b in range(B):
        wk.w[b] = y0v[b]
    with nogil:
        _lsm(&wk.u[0], A)
        _lsm(&wk.w[0], B)
        ok = _newton(Gc, 1.0 / tau, A, B, wk, ftol, 50 if max_iters > 50 else <int>max_iters, &steps)
        it = steps
        if not ok:
            t = tau if tau > 2.0 * spread else 2.0 * spread
            for a in range(A):
                wk.u[a] = -log(<double>A)
            for b in range(B):
                wk.w[b] = -log(<double>B)
            _newton(Gc, 1.0 / t, A, B, wk, 1e-10, 100, &steps)
            it += steps
            factor = 0.5
            while t > tau and it < max_iters:
                t_next = t * factor
                if t_next < tau:
                    t_next = tau
                final = t_next == tau
                ft = ftol if final else 1e-9 * max(1.0, gmax / t_next)
                for a in range(A):
                    su[a] = wk.u[a]
                for b in range(B):
                    sw[b] = wk.w[b]
                ok = _newton(Gc, 1.0 / t_next, A, B, wk, ft, 100, &steps)
                it += steps
                if ok:
                    t = t_next
                    factor = factor * factor
                    if factor < 0.1:
                        factor = 0.1
                else:
                    factor = sqrt(factor)
                    if factor > 0.999:
                        break
                    for a in range(A):
                        wk.u[a] = su[a]
                    for b in range(B):
                        wk.w[b] = sw[b]
        _residual(Gc, 1.0 / tau, A, B, &wk.u[0], &wk.w[0], &wk.lp[0], &wk.lq[0], &wk.F[0])
        gap = 0.0
        for a in range(A):
            gap += exp(wk.u[a]) * wk.F[a]
        for b in range(B):
            gap += exp(wk.w[b]) * wk.F[A + b]
        gap *= tau
    u = np.asarray(wk.u).copy()
    w = np.asarray(wk.w).copy()
    x = np.exp(u)
    y = np.exp(w)
    value = float(x @ G_arr @ y - tau * (x @ u) + tau * (y @ w))
    return x, y, value, it, max(gap, 0.0)
