"""Pure numpy implementations of the hot kernels.

These are the fallback when the compiled ``regmg._core`` extension is not
available; both modules expose the same three functions with identical
signatures and return conventions.
"""
from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _log_softmax(z):
    m = z.max()
    z = z - m
    return z - np.log(np.exp(z).sum())


def gradients(P, r, rho, gamma, theta, psi, tau):
    """Exact softmax policy gradients of J_tau.

    Returns ``(grad_theta, grad_psi, j_tau)``.
    """
    S = r.shape[0]
    zt = theta - theta.max(axis=1, keepdims=True)
    log_pi = zt - np.log(np.exp(zt).sum(axis=1, keepdims=True))
    zp = psi - psi.max(axis=1, keepdims=True)
    log_phi = zp - np.log(np.exp(zp).sum(axis=1, keepdims=True))
    pi = np.exp(log_pi)
    phi = np.exp(log_phi)

    joint = pi[:, :, None] * phi[:, None, :]
    P_pair = np.einsum("sab,sabt->st", joint, P)
    c = (joint * r).sum(axis=(1, 2))
    if tau != 0.0:
        c = c - tau * (pi * log_pi).sum(axis=1) + tau * (phi * log_phi).sum(axis=1)
    M = np.eye(S) - gamma * P_pair
    v = np.linalg.solve(M, c)
    d = np.linalg.solve(M.T, (1.0 - gamma) * rho)

    adv = r + gamma * (P @ v) - v[:, None, None]
    if tau != 0.0:
        adv = adv - tau * log_pi[:, :, None] + tau * log_phi[:, None, :]
    scale = d / (1.0 - gamma)
    g_theta = scale[:, None] * pi * np.einsum("sb,sab->sa", phi, adv)
    g_psi = scale[:, None] * phi * np.einsum("sa,sab->sb", pi, adv)
    return g_theta, g_psi, float(rho @ v)


def soft_value_iteration(T, R, bonus, gamma, tau, stop, max_iters, v0):
    """Soft (tau > 0) or hard (tau == 0) value iteration for a maximizing MDP.

    Backup: ``V(s) = bonus(s) + tau * log sum_u exp(Q(s, u) / tau)`` with
    ``Q = R + gamma * T V``; for ``tau == 0`` the log-sum-exp is a max.
    Iterates until the sup-norm change is ``<= stop``.

    Returns ``(v, q, iters, residual)`` with ``q`` evaluated at the final ``v``.
    """
    v = np.array(v0, dtype=np.float64, copy=True)
    residual = np.inf
    it = 0
    while it < max_iters:
        q = R + gamma * (T @ v)
        if tau > 0.0:
            m = q.max(axis=1)
            v_new = bonus + m + tau * np.log(np.exp((q - m[:, None]) / tau).sum(axis=1))
        else:
            v_new = bonus + q.max(axis=1)
        residual = float(np.abs(v_new - v).max())
        v = v_new
        it += 1
        if residual <= stop:
            break
    q = R + gamma * (T @ v)
    return v, q, it, residual


def _qre_state(Gs, u, w):
    x = np.exp(u)
    y = np.exp(w)
    lp = _log_softmax(Gs @ y)
    lq = _log_softmax(-(Gs.T @ x))
    F = np.concatenate([u - lp, w - lq])
    return x, y, lp, lq, F


def _qre_gap(Gs, u, w):
    # gap / tau = KL(x || softmax(Gs y)) + KL(y || softmax(-Gs'x)) for normalized (u, w)
    x, y, lp, lq, F = _qre_state(Gs, u, w)
    A = u.shape[0]
    return float(x @ F[:A] + y @ F[A:])


def _newton(Gs, u, w, ftol, max_steps):
    """Damped Newton on the log-space fixed-point map.

    Returns ``(u, w, converged, steps)``; ``converged`` is False when the
    residual line search stalls.
    """
    A = u.shape[0]
    n = A + w.shape[0]
    for k in range(max_steps):
        x, y, lp, lq, F = _qre_state(Gs, u, w)
        if np.abs(F).max() <= ftol:
            return u, w, True, k
        p = np.exp(lp)
        q = np.exp(lq)
        J = np.eye(n)
        J[:A, A:] = -((Gs - p @ Gs) * y[None, :])
        J[A:, :A] = (Gs.T - q @ Gs.T) * x[None, :]
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return u, w, False, k
        if not np.all(np.isfinite(step)):
            return u, w, False, k
        f2 = F @ F
        t = 1.0
        while True:
            un = _log_softmax(u + t * step[:A])
            wn = _log_softmax(w + t * step[A:])
            Fn = _qre_state(Gs, un, wn)[4]
            if Fn @ Fn < (1.0 - 1e-4 * t) * f2:
                u, w = un, wn
                break
            t *= 0.5
            if t < 1e-8:
                return u, w, False, k + 1
    F = _qre_state(Gs, u, w)[4]
    return u, w, bool(np.abs(F).max() <= ftol), max_steps


def qre_matrix(G, tau, tol, max_iters, x0, y0):
    """Entropy-regularized saddle point of ``max_x min_y x'Gy + tau H(x) - tau H(y)``.

    Newton's method on the log-space fixed-point equations
    ``log x = logsoftmax(G y / tau)``, ``log y = logsoftmax(-G'x / tau)``.
    A direct solve from the warm start is tried first; if it stalls, the
    weight is continued down from ``max(tau, spread(G))`` by halving, each
    stage warm-started from the previous one.

    Returns ``(x, y, value, iters, saddle_residual)``.
    """
    G = np.asarray(G, dtype=np.float64)
    Gc = G - G.mean()
    spread = float(G.max() - G.min())
    Gs = Gc / tau
    ftol = 1e-14 * max(1.0, np.abs(Gs).max())
    u = _log_softmax(np.log(np.asarray(x0, dtype=np.float64)))
    w = _log_softmax(np.log(np.asarray(y0, dtype=np.float64)))
    u, w, ok, it = _newton(Gs, u, w, ftol, min(50, max_iters))
    if not ok:
        # continuation in the weight: solve at t >= spread (near uniform) first
        t = max(tau, 2.0 * spread)
        u = np.full(G.shape[0], -np.log(G.shape[0]))
        w = np.full(G.shape[1], -np.log(G.shape[1]))
        u, w, ok, steps = _newton(Gc / t, u, w, 1e-10, 100)
        it += steps
        factor = 0.5
        while t > tau and it < max_iters:
            t_next = max(tau, t * factor)
            final = t_next == tau
            Gt = Gc / t_next
            ft = ftol if final else 1e-9 * max(1.0, np.abs(Gt).max())
            un, wn, ok, steps = _newton(Gt, u, w, ft, 100)
            it += steps
            if ok:
                u, w, t = un, wn, t_next
                factor = max(0.1, factor * factor)
            else:
                factor = np.sqrt(factor)
                if factor > 0.999:
                    u, w = un, wn
                    break
    gap = tau * _qre_gap(Gs, u, w)
    x = np.exp(u)
    y = np.exp(w)
    value = float(x @ G @ y - tau * (x @ u) + tau * (y @ w))
    return x, y, value, it, max(float(gap), 0.0)
