"""Best responses against a fixed opponent and the max player's guaranteed value g_tau.

Fixing one player's policy turns the game into an MDP for the other.  With
entropy weight ``tau > 0`` the optimal response is the Boltzmann policy over
the soft Q-values of that MDP; with ``tau == 0`` it is a greedy deterministic
policy, ties broken toward the lowest action index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .evaluation import NumericalError
from .game import MarkovGame, row_entropies

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 10**6


class BestResponseError(NumericalError):
    """Value iteration did not reach the requested tolerance."""


@dataclass(frozen=True)
class BestResponse:
    """A responder policy together with the value of the resulting pair.

    ``value_vector`` is V_tau of the pair (fixed, responder) in the max
    player's sign convention, obtained by exact evaluation of the returned
    policy; ``j_value = rho . value_vector``.  ``residual`` bounds the sup-norm
    error of the value-iteration solution.
    """

    policy: np.ndarray
    value_vector: np.ndarray
    j_value: float
    iterations_used: int
    residual: float
    log_policy: np.ndarray | None = None


def _stop_threshold(tol, gamma):
    return tol * (1.0 - gamma) / (2.0 * gamma)


def _as_policy(game, mat, width, name):
    m = np.ascontiguousarray(mat, dtype=np.float64)
    if m.shape != (game.n_states, width):
        raise ValueError(f"{name} has shape {m.shape}, expected {(game.n_states, width)}")
    return m


def _induced_min(game, pi):
    # the min player's MDP when the max player plays pi
    T = np.ascontiguousarray(np.einsum("sa,sabt->sbt", pi, game.transition))
    R = np.einsum("sa,sab->sb", pi, game.reward)
    return T, R


def _induced_max(game, phi):
    T = np.ascontiguousarray(np.einsum("sb,sabt->sat", phi, game.transition))
    R = np.einsum("sb,sab->sa", phi, game.reward)
    return T, R


def _evaluate_induced(game, T, R, policy, const):
    """Exact V of ``policy`` in the induced MDP with per-state constant payoff ``const``."""
    Pp = np.einsum("su,sut->st", policy, T)
    c = np.einsum("su,su->s", policy, R) + const
    M = np.eye(game.n_states) - game.gamma * Pp
    v = np.linalg.solve(M, c)
    if np.abs(M @ v - c).max() > 1e-10 * max(1.0, float(np.abs(v).max())):
        raise NumericalError("policy evaluation residual exceeds tolerance")
    return v


def _soft_response(game, T, R, bonus, tau, tol, max_iters, v0):
    stop = _stop_threshold(tol, game.gamma)
    v0 = np.zeros(game.n_states) if v0 is None else np.ascontiguousarray(v0, dtype=np.float64)
    w, q, iters, change = _backend.kernels.soft_value_iteration(
        T, np.ascontiguousarray(R), np.ascontiguousarray(bonus), game.gamma, float(tau), stop, int(max_iters), v0
    )
    residual = 2.0 * game.gamma * change / (1.0 - game.gamma)
    if not change <= stop:
        raise BestResponseError(
            f"value iteration stopped after {iters} sweeps with residual {residual:.3e} > tol {tol:.3e}"
        )
    return np.asarray(w), np.asarray(q), int(iters), float(residual)


def _boltzmann(q, tau):
    z = q / tau
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return np.exp(log_p), log_p


def _greedy(q, tol):
    # lowest index among actions within tie tolerance of the best
    best = q.max(axis=1, keepdims=True)
    slack = max(tol, 1e-12 * max(1.0, float(np.abs(q).max())))
    idx = np.argmax(q >= best - slack, axis=1)
    policy = np.zeros_like(q)
    policy[np.arange(q.shape[0]), idx] = 1.0
    return policy


def _check_tau(tau):
    if not (np.isfinite(tau) and tau > 0):
        raise ValueError(f"soft best responses need tau > 0, got {tau}; use the hard variant for tau = 0")


def soft_best_response_min(
    game: MarkovGame,
    pi,
    tau: float,
    tol: float = DEFAULT_TOL,
    *,
    max_iters: int = DEFAULT_MAX_ITERS,
    v0=None,
) -> BestResponse:
    """phi_tau(pi): the unique minimizer of J_tau(pi, .).

    Solved as a maximization of the negated payoff ``-r~ - tau H(pi)`` with
    entropy bonus ``tau H(phi)``.  ``v0`` warm-starts the negated value.
    """
    _check_tau(tau)
    pi = _as_policy(game, pi, game.n_actions_max, "pi")
    T, R = _induced_min(game, pi)
    h_pi = row_entropies(pi)
    _, q, iters, residual = _soft_response(game, T, -R, -tau * h_pi, tau, tol, max_iters, v0)
    phi, log_phi = _boltzmann(q, tau)
    v = _evaluate_induced(game, T, R, phi, tau * h_pi - tau * row_entropies(phi, log_phi))
    return BestResponse(phi, v, float(game.rho @ v), iters, residual, log_phi)


def soft_best_response_max(
    game: MarkovGame,
    phi,
    tau: float,
    tol: float = DEFAULT_TOL,
    *,
    max_iters: int = DEFAULT_MAX_ITERS,
    v0=None,
) -> BestResponse:
    """pi_tau(phi): the unique maximizer of J_tau(., phi)."""
    _check_tau(tau)
    phi = _as_policy(game, phi, game.n_actions_min, "phi")
    T, R = _induced_max(game, phi)
    h_phi = row_entropies(phi)
    _, q, iters, residual = _soft_response(game, T, R, -tau * h_phi, tau, tol, max_iters, v0)
    pi, log_pi = _boltzmann(q, tau)
    v = _evaluate_induced(game, T, R, pi, tau * row_entropies(pi, log_pi) - tau * h_phi)
    return BestResponse(pi, v, float(game.rho @ v), iters, residual, log_pi)


def hard_best_response_min(
    game: MarkovGame, pi, tol: float = DEFAULT_TOL, *, max_iters: int = DEFAULT_MAX_ITERS, v0=None
) -> BestResponse:
    """A deterministic minimizer phi_0(pi) of the unregularized J(pi, .)."""
    pi = _as_policy(game, pi, game.n_actions_max, "pi")
    T, R = _induced_min(game, pi)
    _, q, iters, residual = _soft_response(game, T, -R, np.zeros(game.n_states), 0.0, tol, max_iters, v0)
    phi = _greedy(q, tol)
    v = _evaluate_induced(game, T, R, phi, 0.0)
    return BestResponse(phi, v, float(game.rho @ v), iters, residual)


def hard_best_response_max(
    game: MarkovGame, phi, tol: float = DEFAULT_TOL, *, max_iters: int = DEFAULT_MAX_ITERS, v0=None
) -> BestResponse:
    """A deterministic maximizer pi_0(phi) of the unregularized J(., phi)."""
    phi = _as_policy(game, phi, game.n_actions_min, "phi")
    T, R = _induced_max(game, phi)
    _, q, iters, residual = _soft_response(game, T, R, np.zeros(game.n_states), 0.0, tol, max_iters, v0)
    pi = _greedy(q, tol)
    v = _evaluate_induced(game, T, R, pi, 0.0)
    return BestResponse(pi, v, float(game.rho @ v), iters, residual)


def best_response_min(game, pi, tau, tol=DEFAULT_TOL, **kw) -> BestResponse:
    if tau == 0.0:
        return hard_best_response_min(game, pi, tol, **kw)
    return soft_best_response_min(game, pi, tau, tol, **kw)


def best_response_max(game, phi, tau, tol=DEFAULT_TOL, **kw) -> BestResponse:
    if tau == 0.0:
        return hard_best_response_max(game, phi, tol, **kw)
    return soft_best_response_max(game, phi, tau, tol, **kw)


def g_tau(game: MarkovGame, pi, tau: float, tol: float = DEFAULT_TOL) -> float:
    """g_tau(pi) = min over phi of J_tau(pi, phi)."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return best_response_min(game, pi, tau, tol).j_value


def max_value(game: MarkovGame, phi, tau: float, tol: float = DEFAULT_TOL) -> float:
    """max over pi of J_tau(pi, phi), the min player's exposure."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return best_response_max(game, phi, tau, tol).j_value
