"""Exact policy evaluation: regularized values, visitation, advantages, gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .game import MarkovGame, PolicyPair, PolicyParams, row_entropies, softmax_policies

RESIDUAL_TOL = 1e-10


class NumericalError(ArithmeticError):
    """A linear solve or fixed-point iteration missed its residual tolerance."""


class LogOfZeroError(ValueError):
    """Entropy regularization requested for a policy with a zero-probability action."""


@dataclass(frozen=True)
class EvalResult:
    tau: float
    v_tau: np.ndarray
    j_tau: float
    d_rho: np.ndarray
    adv: np.ndarray
    grad_theta: np.ndarray
    grad_psi: np.ndarray


def pair_transition(game: MarkovGame, pair: PolicyPair) -> np.ndarray:
    """State-to-state kernel P_{pi,phi}(s, s')."""
    return np.einsum("sa,sb,sabt->st", pair.pi, pair.phi, game.transition)


def stage_reward(game: MarkovGame, pair: PolicyPair, tau: float) -> np.ndarray:
    """Expected one-step payoff including the entropy terms tau*H(pi) - tau*H(phi)."""
    c = np.einsum("sa,sb,sab->s", pair.pi, pair.phi, game.reward)
    if tau != 0.0:
        lp, lq = _checked_logs(pair, tau)
        c = c + tau * row_entropies(pair.pi, lp) - tau * row_entropies(pair.phi, lq)
    return c


def _checked_logs(pair: PolicyPair, tau: float):
    if tau < 0 or not np.isfinite(tau):
        raise ValueError(f"tau must be finite and >= 0, got {tau}")
    if pair.log_pi is None and np.any(pair.pi <= 0):
        raise LogOfZeroError("tau > 0 requires a strictly positive max-player policy")
    if pair.log_phi is None and np.any(pair.phi <= 0):
        raise LogOfZeroError("tau > 0 requires a strictly positive min-player policy")
    return pair.logs()


def _solve_checked(M, b, what):
    x = np.linalg.solve(M, b)
    res = float(np.abs(M @ x - b).max())
    if not np.isfinite(res) or res > RESIDUAL_TOL * max(1.0, float(np.abs(x).max())):
        raise NumericalError(f"{what}: residual {res:.3e} exceeds tolerance")
    return x


def value_regularized(game: MarkovGame, pair: PolicyPair, tau: float = 0.0, *, method: str = "direct") -> np.ndarray:
    """V_tau(s), the solution of V = c + gamma P_{pi,phi} V.

    ``method="direct"`` uses a dense LU solve; ``"iterative"`` runs fixed-point
    sweeps to 1e-12 (at most 10**6) and exists mainly as a cross-check.
    """
    c = stage_reward(game, pair, tau)
    Pp = pair_transition(game, pair)
    if method == "direct":
        return _solve_checked(np.eye(game.n_states) - game.gamma * Pp, c, "value solve")
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    v = np.zeros(game.n_states)
    for _ in range(10**6):
        v_new = c + game.gamma * Pp @ v
        if np.abs(v_new - v).max() <= 1e-12:
            return v_new
        v = v_new
    raise NumericalError("iterative policy evaluation did not converge in 10**6 sweeps")


def objective(game: MarkovGame, pair: PolicyPair, tau: float = 0.0) -> float:
    """J_tau(pi, phi) = rho . V_tau."""
    return float(game.rho @ value_regularized(game, pair, tau))


def visitation(game: MarkovGame, pair: PolicyPair) -> np.ndarray:
    """Normalized discounted state visitation d_rho^{pi,phi}."""
    M = np.eye(game.n_states) - game.gamma * pair_transition(game, pair)
    return _solve_checked(M.T, (1.0 - game.gamma) * game.rho, "visitation solve")


def advantage(game: MarkovGame, pair: PolicyPair, tau: float, v_tau: np.ndarray) -> np.ndarray:
    """A_tau(s, a, b) = r - tau log pi + tau log phi + gamma E[V(s')] - V(s)."""
    adv = game.reward + game.gamma * (game.transition @ v_tau) - v_tau[:, None, None]
    if tau != 0.0:
        lp, lq = _checked_logs(pair, tau)
        adv = adv - tau * lp[:, :, None] + tau * lq[:, None, :]
    return adv


def _grads_from(game, pair, d, adv):
    scale = d / (1.0 - game.gamma)
    g_theta = scale[:, None] * pair.pi * np.einsum("sb,sab->sa", pair.phi, adv)
    g_psi = scale[:, None] * pair.phi * np.einsum("sa,sab->sb", pair.pi, adv)
    return g_theta, g_psi


def gradients(game: MarkovGame, pair: PolicyPair, tau: float = 0.0):
    """Closed-form (dJ/dtheta, dJ/dpsi) for the softmax parameterization at ``pair``."""
    ev = evaluate(game, pair, tau)
    return ev.grad_theta, ev.grad_psi


def evaluate(game: MarkovGame, pair: PolicyPair, tau: float = 0.0) -> EvalResult:
    v = value_regularized(game, pair, tau)
    d = visitation(game, pair)
    adv = advantage(game, pair, tau, v)
    g_theta, g_psi = _grads_from(game, pair, d, adv)
    return EvalResult(float(tau), v, float(game.rho @ v), d, adv, g_theta, g_psi)


def policy_gradients(game: MarkovGame, params: PolicyParams, tau: float = 0.0):
    """Fast path for the optimizers: ``(grad_theta, grad_psi, J_tau)`` from logits."""
    return _backend.kernels.gradients(
        game.transition, game.reward, game.rho, game.gamma,
        np.ascontiguousarray(params.theta), np.ascontiguousarray(params.psi), float(tau),
    )


def objective_from_params(game: MarkovGame, params: PolicyParams, tau: float = 0.0) -> float:
    return objective(game, softmax_policies(params), tau)


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_error: float
    worst_player: str
    worst_index: tuple
    analytic: float
    numeric: float
    step: float
    rel_tol: float
    abs_tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.rel_tol


def check_gradient(
    game: MarkovGame,
    params: PolicyParams,
    tau: float = 0.0,
    step: float = 1e-5,
    *,
    rel_tol: float = 1e-4,
    abs_tol: float = 1e-7,
    grad_fn=None,
) -> GradientCheckReport:
    """Compare analytic gradients with central differences of J_tau(softmax(.)).

    The error of each coordinate is ``|g - fd| / max(|g|, |fd|, abs_tol/rel_tol)``,
    so tiny gradients are judged against ``abs_tol`` instead of relatively.
    Central differences have O(step**2) truncation and O(eps/step) rounding
    error; the 1e-5 default balances the two for values of order 1e2.
    """
    if not (0.0 < step <= 1e-2):
        raise ValueError("step must lie in (0, 1e-2]")
    if grad_fn is None:
        g_theta, g_psi = gradients(game, softmax_policies(params), tau)
    else:
        g_theta, g_psi = grad_fn(game, params, tau)
    floor = abs_tol / rel_tol
    worst = (-1.0, "theta", (0, 0), 0.0, 0.0)
    for name, table, grad in (("theta", params.theta, g_theta), ("psi", params.psi, g_psi)):
        for idx in np.ndindex(table.shape):
            plus = table.copy()
            minus = table.copy()
            plus[idx] += step
            minus[idx] -= step
            if name == "theta":
                jp = objective_from_params(game, PolicyParams(plus, params.psi), tau)
                jm = objective_from_params(game, PolicyParams(minus, params.psi), tau)
            else:
                jp = objective_from_params(game, PolicyParams(params.theta, plus), tau)
                jm = objective_from_params(game, PolicyParams(params.theta, minus), tau)
            fd = (jp - jm) / (2.0 * step)
            g = float(grad[idx])
            err = abs(g - fd) / max(abs(g), abs(fd), floor)
            if err > worst[0]:
                worst = (err, name, tuple(int(i) for i in idx), g, fd)
    return GradientCheckReport(worst[0], worst[1], worst[2], worst[3], worst[4], step, rel_tol, abs_tol)
