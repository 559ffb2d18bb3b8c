"""Equilibrium oracles: regularized and exact matrix games, and Shapley iteration for Markov games."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .best_response import DEFAULT_TOL, best_response_max, best_response_min
from .evaluation import NumericalError
from .game import MarkovGame

ENUMERATION_CAP = 8
VANISHING_TAUS = (1e-2, 1e-3, 1e-4)


class EquilibriumError(NumericalError):
    """A stage game or matrix game could not be solved to tolerance."""


class EnumerationCapError(ValueError):
    """Support enumeration requested for a game with more than ENUMERATION_CAP actions."""


@dataclass(frozen=True)
class MatrixGame:
    payoff: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        g = np.array(self.payoff, dtype=np.float64)
        if g.ndim != 2 or g.size == 0:
            raise ValueError(f"payoff must be a non-empty matrix, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("payoff has non-finite entries")
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")
        g.setflags(write=False)
        object.__setattr__(self, "payoff", g)
        object.__setattr__(self, "tau", float(self.tau))


def solve_matrix_game_regularized(mg: MatrixGame, tol: float = 1e-12, *, max_iters: int = 10_000, x0=None, y0=None):
    """Quantal response equilibrium of ``max_x min_y x'Gy + tau H(x) - tau H(y)``.

    Returns ``(x, y, value)``.  The saddle residual (best deviation gain of
    the max player plus that of the min player) is at most ``tol``, with a
    floor at rounding level relative to the payoff scale.
    """
    if mg.tau <= 0:
        raise ValueError("regularized solver needs tau > 0")
    G = mg.payoff
    A, B = G.shape
    # warm starts may have underflowed entries; the solver works in log space
    x0 = np.full(A, 1.0 / A) if x0 is None else np.maximum(np.asarray(x0, dtype=np.float64), 1e-300)
    y0 = np.full(B, 1.0 / B) if y0 is None else np.maximum(np.asarray(y0, dtype=np.float64), 1e-300)
    x, y, value, _, residual = _backend.kernels.qre_matrix(G, mg.tau, tol, max_iters, x0, y0)
    floor = 1e-13 * max(1.0, float(np.abs(G).max()), mg.tau)
    if not residual <= max(tol, floor):
        raise EquilibriumError(f"QRE solve stalled with saddle residual {residual:.3e} (tau={mg.tau:g})")
    return np.asarray(x), np.asarray(y), float(value)


def matrix_duality_gap(G, x, y) -> float:
    """max_i (G y)_i - min_j (x'G)_j, zero exactly at an unregularized saddle point."""
    G = np.asarray(G, dtype=np.float64)
    return float((G @ y).max() - (x @ G).min())


def solve_matrix_game_exact(payoff, tol: float = 1e-10):
    """Unregularized minimax solution by support enumeration.

    Every matrix game has optimal strategies supported on a square
    nonsingular submatrix of the payoff shifted to be positive, so square
    support pairs are tried in order of size, lexicographically within a
    size.  The first candidate whose duality gap is at most ``tol`` is
    returned.  Work grows like ``sum_k C(A, k) C(B, k)``, about 1.3e4 linear
    solves for 8x8; larger games raise ``EnumerationCapError``.

    Returns ``(x, y, value)``.
    """
    G = np.asarray(payoff, dtype=np.float64)
    if G.ndim != 2 or not np.all(np.isfinite(G)):
        raise ValueError("payoff must be a finite matrix")
    A, B = G.shape
    if max(A, B) > ENUMERATION_CAP:
        raise EnumerationCapError(f"{A}x{B} exceeds the support-enumeration cap of {ENUMERATION_CAP}")
    H = G - G.min() + 1.0  # positive payoffs make the value positive
    scale = max(1.0, float(np.abs(G).max()))
    best = None
    for k in range(1, min(A, B) + 1):
        for rows in itertools.combinations(range(A), k):
            for cols in itertools.combinations(range(B), k):
                M = H[np.ix_(rows, cols)]
                try:
                    a = np.linalg.solve(M.T, np.ones(k))  # M' a = 1, x_I = a / sum(a)
                    b = np.linalg.solve(M, np.ones(k))
                except np.linalg.LinAlgError:
                    continue
                sa, sb = a.sum(), b.sum()
                if abs(sa) < 1e-14 or abs(sb) < 1e-14:
                    continue
                xi, yj = a / sa, b / sb
                if xi.min() < -1e-12 or yj.min() < -1e-12:
                    continue
                x = np.zeros(A)
                y = np.zeros(B)
                x[list(rows)] = np.clip(xi, 0.0, None)
                y[list(cols)] = np.clip(yj, 0.0, None)
                x /= x.sum()
                y /= y.sum()
                gap = matrix_duality_gap(G, x, y)
                if best is None or gap < best[0]:
                    best = (gap, x, y)
                if gap <= tol:
                    return x, y, float(x @ G @ y)
    if best is not None and best[0] <= max(tol, 1e-12 * scale):
        gap, x, y = best
        return x, y, float(x @ G @ y)
    raise EquilibriumError(
        f"support enumeration found no candidate within tol {tol:g}"
        + ("" if best is None else f" (best gap {best[0]:.3e})")
    )


def solve_matrix_game_vanishing(payoff, tol: float = 1e-12):
    """Approximate unregularized solution through the regularized solver at tau = 1e-2, 1e-3, 1e-4.

    Returns ``(x, y, value, error_bar)`` from the smallest weight, with
    ``error_bar = tau * max(log A, log B)``.
    """
    G = np.asarray(payoff, dtype=np.float64)
    A, B = G.shape
    x = y = None
    for tau in VANISHING_TAUS:
        x, y, value = solve_matrix_game_regularized(MatrixGame(G, tau), tol, x0=x, y0=y)
    tau = VANISHING_TAUS[-1]
    return x, y, value, tau * max(np.log(A), np.log(B))


@dataclass(frozen=True)
class EquilibriumSolution:
    """Per-state equilibrium policies and values of a (possibly regularized) Markov game.

    ``duality_gap`` is J_tau(pi_tau(phi*), phi*) - J_tau(pi*, phi_tau(pi*)).
    ``changes`` is the sup-norm change of V at each Shapley sweep.
    ``value_error_bar`` is nonzero only on the vanishing-weight fallback.
    """

    tau: float
    pi_star: np.ndarray
    phi_star: np.ndarray
    value_vector: np.ndarray
    j_star: float
    duality_gap: float
    iterations: int
    changes: tuple = field(default=(), repr=False)
    value_error_bar: float = 0.0


def _stage_payoffs(game, v):
    return game.reward + game.gamma * (game.transition @ v)


def shapley_solve(
    game: MarkovGame,
    tau: float = 0.0,
    tol: float = DEFAULT_TOL,
    *,
    v0=None,
    max_iters: int = 100_000,
    compute_gap: bool = True,
) -> EquilibriumSolution:
    """Shapley value iteration on the stage games ``G_s = r(s) + gamma P(s) V``.

    Each sweep replaces V(s) by the (regularized) value of G_s; the map is a
    gamma-contraction in sup norm.  Sweeps stop once the change is at most
    ``tol (1 - gamma) / (20 gamma)``, a tenth of the plain value-error
    threshold, so the best-response duality gap lands within ``10 tol``.
    With ``tau == 0`` and more than ``ENUMERATION_CAP`` actions the stage
    games use the vanishing-weight fallback.
    """
    if not (np.isfinite(tau) and tau >= 0):
        raise ValueError(f"tau must be finite and >= 0, got {tau}")
    S, A, B = game.reward.shape
    vanishing = tau == 0.0 and max(A, B) > ENUMERATION_CAP
    stop = 0.1 * tol * (1.0 - game.gamma) / (2.0 * game.gamma)
    v = np.zeros(S) if v0 is None else np.array(v0, dtype=np.float64)
    xs = np.full((S, A), 1.0 / A)
    ys = np.full((S, B), 1.0 / B)
    stage_tol = min(1e-12, stop)
    err_bar = 0.0

    def sweep(v):
        nonlocal err_bar
        out = np.empty(S)
        G = _stage_payoffs(game, v)
        for s in range(S):
            try:
                if tau > 0:
                    x, y, val = solve_matrix_game_regularized(MatrixGame(G[s], tau), stage_tol, x0=xs[s], y0=ys[s])
                elif vanishing:
                    x, y, val, err_bar = solve_matrix_game_vanishing(G[s], stage_tol)
                else:
                    x, y, val = solve_matrix_game_exact(G[s], stage_tol * max(1.0, float(np.abs(G[s]).max())))
            except NumericalError as exc:
                raise EquilibriumError(f"stage game at state {s}: {exc}") from exc
            xs[s], ys[s], out[s] = x, y, val
        return out

    changes = []
    it = 0
    while True:
        v_new = sweep(v)
        it += 1
        change = float(np.abs(v_new - v).max())
        changes.append(change)
        v = v_new
        if change <= stop or change <= 4e-16 * max(1.0, float(np.abs(v).max())):
            break
        if it >= max_iters:
            raise EquilibriumError(f"Shapley iteration: change {change:.3e} after {it} sweeps")
    sweep(v)  # policies from the final stage games
    pi, phi = xs.copy(), ys.copy()
    gap = float("nan")
    if compute_gap:
        gap = equilibrium_duality_gap(game, pi, phi, tau, tol / 10)
    return EquilibriumSolution(
        float(tau), pi, phi, v, float(game.rho @ v), gap, it, tuple(changes), err_bar
    )


def equilibrium_duality_gap(game: MarkovGame, pi, phi, tau: float, tol: float = DEFAULT_TOL) -> float:
    """J_tau(BR_max(phi), phi) - J_tau(pi, BR_min(pi))."""
    return best_response_max(game, phi, tau, tol).j_value - best_response_min(game, pi, tau, tol).j_value


def assumption2_profile(game: MarkovGame, tau_grid, tol: float = DEFAULT_TOL):
    """Smallest equilibrium policy entry at each weight of ``tau_grid``.

    Returns a list of ``(tau, min_entry)`` pairs.
    """
    grid = [float(t) for t in tau_grid]
    if not grid:
        raise ValueError("tau_grid must be non-empty")
    if any(t <= 0 for t in grid):
        raise ValueError("tau_grid entries must be > 0")
    if any(b > a for a, b in zip(grid, grid[1:])):
        raise ValueError("tau_grid must be decreasing")
    out = []
    v = None
    for t in grid:
        sol = shapley_solve(game, t, tol, v0=v, compute_gap=False)
        v = sol.value_vector
        out.append((t, float(min(sol.pi_star.min(), sol.phi_star.min()))))
    return out


def estimate_c(game: MarkovGame, tau_grid, tol: float = DEFAULT_TOL) -> float:
    """Empirical stand-in for the lower bound c on equilibrium policy entries.

    Takes the minimum over ``tau_grid`` of the smallest entry of
    (pi_tau*, phi_tau*).  A finite grid can never certify that such a bound
    holds for every tau; see ``c_is_decaying`` for the diagnostic.
    """
    return min(m for _, m in assumption2_profile(game, tau_grid, tol))


def c_is_decaying(profile, ratio: float = 0.1) -> bool:
    """True when the minimum entry falls by more than ``ratio`` across the grid, a sign that c does not exist."""
    first, last = profile[0][1], profile[-1][1]
    return last < ratio * first
