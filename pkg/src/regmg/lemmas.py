"""Numerical checks of the structural inequalities behind the convergence analysis.

Suites
  a  quadratic growth of J_tau around each player's soft best response
  b  weight-sensitivity sandwiches for equilibrium values, g_tau and J_tau
  c  gradient domination (PL-type) for both players
  d  visitation lower bound d_rho >= (1 - gamma) rho
  e  zero expected advantage under the evaluated pair
  f  closed-form gradients against central differences

Suite b checks the bounds as stated, without a 1/(1 - gamma) factor on the
equilibrium-value and g_tau tiers, and separately the same tiers with that
factor ("b_discounted").  Only the as-stated tiers count toward ``b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import evaluation
from .best_response import soft_best_response_max, soft_best_response_min, best_response_min
from .equilibrium import shapley_solve
from .game import PolicyParams, softmax_policies
from .library import GeneratorSpec, generate, make_rng, paper_game_deterministic, paper_game_mixed

SUITES = ("a", "b", "b_discounted", "c", "d", "e", "f")
SUITE_TITLES = {
    "a": "quadratic growth (both players)",
    "b": "weight sandwich, as stated (equilibrium value, g_tau, J_tau)",
    "b_discounted": "weight sandwich with 1/(1-gamma) on every tier (diagnostic)",
    "c": "PL-type gradient domination (both players)",
    "d": "visitation lower bound",
    "e": "zero expected advantage",
    "f": "gradient vs central differences",
}
REQUIRED = ("a", "b", "c", "d", "e", "f")
TAUS = (0.1, 1.0)
TAU_PAIRS = ((1.0, 0.0), (1.0, 0.5), (0.1, 0.01), (0.5, 0.0))


@dataclass
class SuiteResult:
    checked: int = 0
    violations: list = field(default_factory=list)

    def add(self, ok: bool, detail: str) -> None:
        self.checked += 1
        if not ok:
            self.violations.append(detail)


@dataclass
class LemmaReport:
    results: dict
    games: int

    @property
    def passed(self) -> bool:
        return all(not self.results[s].violations for s in REQUIRED)

    def lines(self) -> list[str]:
        out = []
        for s in SUITES:
            r = self.results[s]
            tag = "" if s in REQUIRED else " [not counted]"
            out.append(f"{s:>12}: {r.checked - len(r.violations)}/{r.checked} pass  {SUITE_TITLES[s]}{tag}")
        return out


def _random_params(rng, game, scale=1.5):
    return PolicyParams(
        rng.uniform(-scale, scale, size=(game.n_states, game.n_actions_max)),
        rng.uniform(-scale, scale, size=(game.n_states, game.n_actions_min)),
    )


def _check_game(name, game, rng, tol, res, samples):
    S = game.n_states
    la, lb = math.log(game.n_actions_max), math.log(game.n_actions_min)
    slack = 10.0 * tol
    g = game.gamma
    for _ in range(samples):
        params = _random_params(rng, game)
        pair = softmax_policies(params)
        for tau in TAUS:
            # a: quadratic growth
            kappa = tau * game.rho_min / (2.0 * math.log(2.0))
            brm = soft_best_response_max(game, pair.phi, tau, tol)
            j_br = brm.j_value
            j = evaluation.objective(game, pair, tau)
            lhs = j_br - j
            rhs = kappa * float(((brm.policy - pair.pi) ** 2).sum())
            res["a"].add(lhs >= rhs - slack, f"{name} tau={tau}: max side {lhs:.3e} < {rhs:.3e}")
            brn = soft_best_response_min(game, pair.pi, tau, tol)
            lhs = brn.j_value - j
            rhs = -kappa * float(((brn.policy - pair.phi) ** 2).sum())
            res["a"].add(lhs <= rhs + slack, f"{name} tau={tau}: min side {lhs:.3e} > {rhs:.3e}")

            # c: gradient domination
            g_theta, g_psi = evaluation.gradients(game, pair, tau)
            coef = 2.0 * (1.0 - g) * tau * game.rho_min**2 / S
            rhs = coef * pair.min_pi_entry**2 * (j_br - j)
            lhs = float((g_theta**2).sum())
            res["c"].add(lhs >= rhs - slack, f"{name} tau={tau}: |grad_theta|^2 {lhs:.3e} < {rhs:.3e}")
            rhs = coef * pair.min_phi_entry**2 * (j - brn.j_value)
            lhs = float((g_psi**2).sum())
            res["c"].add(lhs >= rhs - slack, f"{name} tau={tau}: |grad_psi|^2 {lhs:.3e} < {rhs:.3e}")
            _pl_path(res["c"], name, game, params, tau, tol, coef, "theta")
            _pl_path(res["c"], name, game, params, tau, tol, coef, "psi")

            # e: expected advantage
            ev = evaluation.evaluate(game, pair, tau)
            worst = float(np.abs(np.einsum("sa,sb,sab->s", pair.pi, pair.phi, ev.adv)).max())
            res["e"].add(worst <= 1e-9, f"{name} tau={tau}: expected advantage {worst:.3e}")

            # f: finite differences
            rep = evaluation.check_gradient(game, params, tau)
            res["f"].add(rep.passed, f"{name} tau={tau}: FD error {rep.max_rel_error:.3e} at {rep.worst_player}{rep.worst_index}")

        # d: visitation
        d = evaluation.visitation(game, pair)
        short = float(((1.0 - g) * game.rho - d).max())
        res["d"].add(short <= 1e-12 and abs(d.sum() - 1.0) <= 1e-10, f"{name}: d below (1-gamma) rho by {short:.3e}")

        # b: sandwiches at fixed pi (g_tau) and fixed pair (J_tau)
        for tau, tau_p in TAU_PAIRS:
            dt = tau - tau_p
            diff_g = best_response_min(game, pair.pi, tau, tol).j_value - best_response_min(game, pair.pi, tau_p, tol).j_value
            _sandwich(res, name, "g_tau", diff_g, dt, la, lb, g, slack, tau, tau_p)
            diff_j = evaluation.objective(game, pair, tau) - evaluation.objective(game, pair, tau_p)
            ok = -dt * lb / (1 - g) - 1e-9 <= diff_j <= dt * la / (1 - g) + 1e-9
            res["b"].add(ok, f"{name} ({tau},{tau_p}): J_tau difference {diff_j:.4e} outside discounted bounds")
            res["b_discounted"].add(ok, "")

    # b: equilibrium values, once per game
    cache = {}
    for tau, tau_p in TAU_PAIRS:
        for t in (tau, tau_p):
            if t not in cache:
                cache[t] = shapley_solve(game, t, tol, compute_gap=False).j_star
        _sandwich(res, name, "J*", cache[tau] - cache[tau_p], tau - tau_p, la, lb, g, slack, tau, tau_p)


def _pl_path(res, name, game, params, tau, tol, coef, player, steps=300, every=20):
    """Gradient domination along a one-player gradient path driven by the implemented gradient.

    Random points rarely sit near a stationary point; the path does, so a
    gradient that vanishes away from the best response is caught here.
    """
    eta = (1.0 - game.gamma) / max(1.0, float(np.abs(game.reward).max()))
    theta, psi = np.array(params.theta), np.array(params.psi)
    slack = 10.0 * tol
    for t in range(steps + 1):
        pair = softmax_policies(PolicyParams(theta, psi))
        g_theta, g_psi = evaluation.gradients(game, pair, tau)
        if t % every == 0:
            j = evaluation.objective(game, pair, tau)
            if player == "theta":
                gap = soft_best_response_max(game, pair.phi, tau, tol).j_value - j
                lhs, rhs = float((g_theta**2).sum()), coef * pair.min_pi_entry**2 * gap
            else:
                gap = j - soft_best_response_min(game, pair.pi, tau, tol).j_value
                lhs, rhs = float((g_psi**2).sum()), coef * pair.min_phi_entry**2 * gap
            res.add(lhs >= rhs - slack, f"{name} tau={tau}: {player} path step {t}: {lhs:.3e} < {rhs:.3e}")
        if player == "theta":
            theta = theta + eta * g_theta
        else:
            psi = psi - eta * g_psi


def _sandwich(res, name, what, diff, dt, la, lb, g, slack, tau, tau_p):
    ok = -dt * lb - slack <= diff <= dt * la + slack
    res["b"].add(ok, f"{name} ({tau},{tau_p}): {what} difference {diff:.4e} outside [{-dt * lb:.4e}, {dt * la:.4e}]")
    okd = -dt * lb / (1 - g) - slack <= diff <= dt * la / (1 - g) + slack
    res["b_discounted"].add(okd, f"{name} ({tau},{tau_p}): {what} difference {diff:.4e} outside discounted bounds")


def suite_games(trials: int, seed: int):
    """The two built-in games followed by ``trials`` seeded random games (alternating kinds)."""
    games = [("builtin:mixed", paper_game_mixed()), ("builtin:deterministic", paper_game_deterministic())]
    for i in range(trials):
        kind = "random_mixed_2x2" if i % 2 == 0 else "random_general"
        spec = GeneratorSpec(kind, seed=(seed * 1_000_003 + i) % 2**64, n_states=2 + i % 3,
                             n_actions=2 if kind == "random_mixed_2x2" else 2 + i % 2)
        games.append((f"{kind}[{i}]", generate(spec)))
    return games


def run_lemma_suites(trials: int = 25, seed: int = 0, tol: float = 1e-8, samples: int = 2, games=None) -> LemmaReport:
    """Run every suite over the built-ins plus ``trials`` random games."""
    if trials < 0:
        raise ValueError("trials must be >= 0")
    games = suite_games(trials, seed) if games is None else games
    rng = make_rng(seed)
    res = {s: SuiteResult() for s in SUITES}
    for name, game in games:
        _check_game(name, game, rng, tol, res, samples)
    return LemmaReport(res, len(games))
