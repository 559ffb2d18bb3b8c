"""Policy gradient descent ascent solvers, schedules and step-size theory constants.

All solvers use the alternating update

    theta_{k+1} = theta_k + alpha_k grad_theta J_tau(theta_k, psi_k)
    psi_{k+1}   = psi_k   - beta_k  grad_psi   J_tau(theta_{k+1}, psi_k)

so the min player's gradient is always taken at the max player's new logits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .best_response import DEFAULT_TOL, best_response_min
from .equilibrium import estimate_c
from .evaluation import objective
from .game import MarkovGame, PolicyPair, PolicyParams, softmax_policies, softmax_rows
from .metrics import EquilibriumCache, IterateRecord, MetricTracker, compute_deltas

SCHEDULE_KINDS = ("constant", "polynomial", "piecewise_geometric")
LN2 = math.log(2.0)


class DivergenceError(ArithmeticError):
    """A gradient or iterate became non-finite."""


# -- schedules ----------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Step sizes and regularization weight as functions of the iteration index.

    ``polynomial``: ``alpha_k = alpha0 / (k + h)**a_alpha`` and likewise for beta
    and tau.  ``constant`` ignores the exponents.  ``piecewise_geometric``
    indexes stages: ``tau_t = tau0 * eta**t`` with steps following the
    nested-loop rule (see ``run_algorithm1``).
    """

    kind: str
    alpha0: float
    beta0: float
    tau0: float
    exponents: tuple = (0.0, 0.0, 0.0)
    h: float = 1.0
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")
        for name in ("alpha0", "beta0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.tau0) and self.tau0 >= 0):
            raise ValueError(f"tau0 must be finite and >= 0, got {self.tau0}")
        exps = tuple(float(e) for e in self.exponents)
        if len(exps) != 3 or any(e < 0 or not math.isfinite(e) for e in exps):
            raise ValueError(f"exponents must be three finite reals >= 0, got {self.exponents}")
        object.__setattr__(self, "exponents", exps)
        if not (self.h >= 1):
            raise ValueError(f"h must be >= 1, got {self.h}")
        if self.kind == "piecewise_geometric" and not (self.eta is not None and 0 < self.eta < 1):
            raise ValueError("piecewise_geometric schedules need eta in (0, 1)")

    @classmethod
    def theorem2(cls, alpha0: float, beta0: float, tau0: float, h: float = 1.0) -> "Schedule":
        """Exponents (2/3, 0, 1/3): decaying alpha, constant beta, tau ~ k^(-1/3)."""
        return cls("polynomial", alpha0, beta0, tau0, (2.0 / 3.0, 0.0, 1.0 / 3.0), h)

    @classmethod
    def practical(cls, alpha0: float = 1e-3, beta0: float = 1e-2, tau0: float = 1.0, h: float = 1.0) -> "Schedule":
        """Constant steps with tau_k = tau0 / (k + h)^(1/3)."""
        return cls("polynomial", alpha0, beta0, tau0, (0.0, 0.0, 1.0 / 3.0), h)

    def _poly(self, base, exp, k):
        if self.kind == "constant" or exp == 0.0:
            return base
        return base / (k + self.h) ** exp

    def alpha(self, k: int) -> float:
        return self._poly(self.alpha0, self.exponents[0], k)

    def beta(self, k: int) -> float:
        return self._poly(self.beta0, self.exponents[1], k)

    def tau(self, k: int) -> float:
        if self.kind == "piecewise_geometric":
            return self.tau0 * self.eta**k
        return self._poly(self.tau0, self.exponents[2], k)

    def describe(self) -> str:
        a, b, t = self.exponents
        if self.kind == "piecewise_geometric":
            return f"piecewise_geometric tau0={self.tau0:g} eta={self.eta!r}"
        if self.kind == "constant":
            return f"constant alpha={self.alpha0:g} beta={self.beta0:g} tau={self.tau0:g}"
        return (
            f"polynomial alpha0={self.alpha0:g}/(k+{self.h:g})^{a:g} beta0={self.beta0:g}/(k+{self.h:g})^{b:g} "
            f"tau0={self.tau0:g}/(k+{self.h:g})^{t:.10g}"
        )


# -- theory constants ---------------------------------------------------------

@dataclass(frozen=True)
class TheoremConstants:
    """Smoothness and growth constants entering the step-size conditions.

    They are derived for rewards in [0, 1]; ``rewards_in_unit_interval``
    records whether the game satisfies that premise.
    """

    gamma: float
    rho_min: float
    n_states: int
    n_actions_max: int
    n_actions_min: int
    c: float
    L_V: float
    L_H: float
    C1: float
    C2: float
    L_delta: float
    rewards_in_unit_interval: bool = True

    @classmethod
    def from_game(cls, game: MarkovGame, c: float) -> "TheoremConstants":
        if not (c > 0 and math.isfinite(c)):
            raise ValueError(f"c must be finite and > 0, got {c}")
        if not game.satisfies_positive_rho:
            raise ValueError("constants need rho_min > 0")
        g, rmin, S = game.gamma, game.rho_min, game.n_states
        la, lb = math.log(game.n_actions_max), math.log(game.n_actions_min)
        return cls(
            gamma=g,
            rho_min=rmin,
            n_states=S,
            n_actions_max=game.n_actions_max,
            n_actions_min=game.n_actions_min,
            c=float(c),
            L_V=8.0 / (1.0 - g) ** 3,
            L_H=(4.0 + 8.0 * la) / (1.0 - g) ** 3,
            C1=rmin * c**2 / (64.0 * LN2),
            C2=2.0 * math.sqrt(S) / (math.sqrt((1.0 - g) * rmin) * c),
            L_delta=4.0 * la + 3.0 * lb + lb / (1.0 - g),
            rewards_in_unit_interval=game.rewards_in_unit_interval,
        )

    def L(self, tau: float) -> float:
        return 3.0 * self.L_H * max(tau, 1.0)

    @property
    def eta(self) -> float:
        """Geometric decay factor for the nested loop: (C1 + 2 L_delta) / (2 C1 + 2 L_delta)."""
        return (self.C1 + 2.0 * self.L_delta) / (2.0 * self.C1 + 2.0 * self.L_delta)

    def contraction_rate(self, alpha: float, tau: float) -> float:
        """Per-iteration factor 1 - (1 - gamma) alpha tau rho_min^2 c^2 / (32 |S|)."""
        return 1.0 - (1.0 - self.gamma) * alpha * tau * self.rho_min**2 * self.c**2 / (32.0 * self.n_states)

    def nested_gap_bound(self, tau_T: float) -> float:
        return (self.C1 + self.L_delta) * tau_T


@dataclass(frozen=True)
class Constraint:
    name: str
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs


@dataclass(frozen=True)
class StepsizeReport:
    constraints: tuple

    @property
    def ok(self) -> bool:
        return all(c.satisfied for c in self.constraints)

    @property
    def violated(self) -> list:
        return [c.name for c in self.constraints if not c.satisfied]


def _theorem1_bounds(consts: TheoremConstants, tau: float):
    L = consts.L(tau)
    k = consts
    ratio = min((1 - k.gamma) * k.rho_min**3 * k.c**2 * tau**2 / (152 * LN2 * k.n_states * L**2), 8.0)
    a_max = min(1.0 / (L + k.C2 * L**2 / tau), 16 * k.n_states / ((1 - k.gamma) * k.rho_min**2 * k.c**2 * tau))
    return L, ratio, a_max


def check_theorem1_stepsizes(consts: TheoremConstants, tau: float, alpha: float, beta: float) -> StepsizeReport:
    """Evaluate the three fixed-weight step-size conditions literally."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    L, ratio, a_max = _theorem1_bounds(consts, tau)
    return StepsizeReport((
        Constraint("max{alpha,beta} <= 1/L", max(alpha, beta), 1.0 / L),
        Constraint("alpha/beta <= min{ratio bound, 8}", alpha / beta if beta > 0 else math.inf, ratio),
        Constraint("alpha <= min{(L + C2 L^2/tau)^-1, 16|S|/((1-gamma) rho_min^2 c^2 tau)}", alpha, a_max),
    ))


def feasible_theorem1_stepsizes(consts: TheoremConstants, tau: float) -> tuple[float, float]:
    """Largest alpha admitted by the conditions with beta = 1/L."""
    L, ratio, a_max = _theorem1_bounds(consts, tau)
    beta = 1.0 / L
    alpha = min(beta, ratio * beta, a_max) * (1.0 - 1e-12)  # strictly inside after rounding
    return alpha, beta


@dataclass(frozen=True)
class InitialConditionReport:
    satisfied: bool
    lhs: float
    rhs: float
    delta_pi: float
    delta_phi: float


def check_initial_condition(
    game: MarkovGame,
    params0: PolicyParams,
    tau: float,
    consts: TheoremConstants,
    tol: float = DEFAULT_TOL,
    cache: EquilibriumCache | None = None,
) -> InitialConditionReport:
    """Whether 3 delta_pi + delta_phi <= C1 tau at the starting point."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    cache = cache if cache is not None else EquilibriumCache(game, tol)
    dp, df = compute_deltas(game, params0, tau, cache, tol)
    lhs, rhs = 3.0 * dp + df, consts.C1 * tau
    return InitialConditionReport(lhs <= rhs, lhs, rhs, dp, df)


def search_initial_tau(
    game: MarkovGame,
    params0: PolicyParams,
    tau: float,
    consts: TheoremConstants,
    tol: float = DEFAULT_TOL,
    *,
    max_doublings: int = 80,
) -> tuple[float, InitialConditionReport]:
    """Double tau until the initial condition holds.

    Both deltas divided by tau vanish as tau grows, so this terminates for
    any starting point; ``max_doublings`` only guards against bad input.
    """
    cache = EquilibriumCache(game, tol)
    for _ in range(max_doublings + 1):
        rep = check_initial_condition(game, params0, tau, consts, tol, cache)
        if rep.satisfied:
            return tau, rep
        tau *= 2.0
    raise RuntimeError(f"initial condition still violated at tau = {tau:g}")


# -- core step ------------------------------------------------------------------

def _grads(game, theta, psi, tau):
    return _backend.kernels.gradients(game.transition, game.reward, game.rho, game.gamma, theta, psi, tau)


def _step_arrays(game, theta, psi, alpha, beta, tau):
    g_theta, _, _ = _grads(game, theta, psi, tau)
    if not np.all(np.isfinite(g_theta)):
        raise DivergenceError("non-finite gradient for theta")
    theta = theta + alpha * g_theta
    _, g_psi, _ = _grads(game, theta, psi, tau)
    if not np.all(np.isfinite(g_psi)):
        raise DivergenceError("non-finite gradient for psi")
    psi = psi - beta * g_psi
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(psi))):
        raise DivergenceError("non-finite iterate")
    return theta, psi


def gda_step(game: MarkovGame, params: PolicyParams, alpha: float, beta: float, tau: float) -> PolicyParams:
    """One alternating step; raises DivergenceError on non-finite values."""
    if alpha < 0 or beta < 0:
        raise ValueError("step sizes must be >= 0")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    theta, psi = _step_arrays(
        game, np.array(params.theta), np.array(params.psi), float(alpha), float(beta), float(tau)
    )
    return PolicyParams(theta, psi)


# -- runs -----------------------------------------------------------------------

@dataclass(frozen=True)
class StageInfo:
    """One outer stage of the nested loop."""

    t: int
    tau: float
    alpha: float
    beta: float
    iterations: int
    halved: bool
    composite_start: float
    composite_end: float


@dataclass
class RunResult:
    """Outcome of a solver run.

    ``log`` holds the records of the logged iterations (always k = 0 and the
    final iterate); with ``log_every = 1`` its length is
    ``wall_iterations + 1``.
    """

    params_final: PolicyParams
    log: list
    termination: str
    wall_iterations: int
    stages: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    average: PolicyPair | None = None
    message: str = ""

    @property
    def final(self) -> IterateRecord | None:
        return self.log[-1] if self.log else None


Callback = Callable[[IterateRecord], None]


def _emit(tracker, callbacks, k, theta, psi, tau, alpha, beta, average=None):
    if tracker is None:
        return
    rec = tracker.record(k, PolicyParams(theta, psi), tau, alpha, beta, average=average)
    for cb in callbacks or ():
        cb(rec)


def _init(game, params0):
    if params0 is None:
        params0 = PolicyParams.zeros(game)
    if not params0.finite:
        raise ValueError("initial logits must be finite")
    return np.array(params0.theta), np.array(params0.psi)


def _run_loop(game, params0, max_iters, step_at, tracker, callbacks, *, on_step=None):
    """Shared driver: ``step_at(k) -> (alpha, beta, tau)`` for the update at iteration k."""
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    theta, psi = _init(game, params0)
    avg = on_step(0, theta, psi) if on_step else None
    a, b, t = step_at(0)
    _emit(tracker, callbacks, 0, theta, psi, t, a, b, avg)
    k = 0
    try:
        while k < max_iters:
            a, b, t = step_at(k)
            theta, psi = _step_arrays(game, theta, psi, a, b, t)
            k += 1
            avg = on_step(k, theta, psi) if on_step else None
            if tracker is not None and tracker.due(k, final=k == max_iters):
                a1, b1, t1 = step_at(k)
                _emit(tracker, callbacks, k, theta, psi, t1, a1, b1, avg)
    except DivergenceError as exc:
        return RunResult(PolicyParams(np.nan_to_num(theta), np.nan_to_num(psi)), _records(tracker), "diverged", k,
                         message=str(exc))
    return RunResult(PolicyParams(theta, psi), _records(tracker), "completed", k)


def _records(tracker):
    return [] if tracker is None else list(tracker.records)


def run_fixed_tau(
    game: MarkovGame,
    params0: PolicyParams | None = None,
    tau: float = 1.0,
    alpha: float = 1e-3,
    beta: float = 1e-2,
    max_iters: int = 1000,
    callbacks=(),
    *,
    tracker: MetricTracker | None = None,
) -> RunResult:
    """GDA at a fixed weight ``tau > 0`` starting from ``params0`` (uniform policies by default)."""
    if not tau > 0:
        raise ValueError("run_fixed_tau needs tau > 0")
    return _run_loop(game, params0, max_iters, lambda k: (alpha, beta, tau), tracker, callbacks)


def run_algorithm2(
    game: MarkovGame,
    schedule: Schedule,
    max_iters: int,
    callbacks=(),
    *,
    params0: PolicyParams | None = None,
    tracker: MetricTracker | None = None,
) -> RunResult:
    """GDA with step sizes and a decaying weight taken from ``schedule`` at every k.

    Both half-steps of iteration k use the same weight tau_k.
    """
    if schedule.kind == "piecewise_geometric":
        raise ValueError("use run_algorithm1 for piecewise_geometric schedules")
    if not schedule.tau0 > 0:
        raise ValueError("the diminishing-weight solver needs tau0 > 0")
    return _run_loop(
        game, params0, max_iters, lambda k: (schedule.alpha(k), schedule.beta(k), schedule.tau(k)), tracker, callbacks
    )


def run_vanilla_gda(
    game: MarkovGame,
    alpha: float,
    beta: float,
    max_iters: int,
    average: bool = False,
    callbacks=(),
    *,
    params0: PolicyParams | None = None,
    tracker: MetricTracker | None = None,
) -> RunResult:
    """Unregularized GDA (tau = 0).

    With ``average`` the equal-weight running means of the policy matrices,
    (1/(k+1)) sum_{t<=k} pi_t and likewise phi, are tracked and their gaps
    logged next to the last iterate's.
    """
    state = {"sum_pi": None, "sum_phi": None}

    def on_step(k, theta, psi):
        if not average:
            return None
        pi, phi = softmax_rows(theta), softmax_rows(psi)
        if state["sum_pi"] is None:
            state["sum_pi"], state["sum_phi"] = pi.copy(), phi.copy()
        else:
            state["sum_pi"] += pi
            state["sum_phi"] += phi
        state["k"] = k
        if tracker is not None and tracker.due(k, final=k == max_iters):
            return _mean_pair(state, k)
        return None

    res = _run_loop(game, params0, max_iters, lambda k: (alpha, beta, 0.0), tracker, callbacks, on_step=on_step)
    if average and state["sum_pi"] is not None:
        res.average = _mean_pair(state, state["k"])
    return res


def _mean_pair(state, k):
    pi = state["sum_pi"] / (k + 1)
    phi = state["sum_phi"] / (k + 1)
    # renormalize away summation rounding
    return PolicyPair(pi / pi.sum(axis=1, keepdims=True), phi / phi.sum(axis=1, keepdims=True))


# -- nested loop ------------------------------------------------------------------

def default_alpha_rule(a0: float = 1e-3) -> Callable[[float], float]:
    """alpha_t = a0 / tau_t while tau_t >= 1 and a0 * tau_t^2 once tau_t < 1."""
    return lambda tau: a0 / tau if tau >= 1.0 else a0 * tau * tau


def default_beta_rule(ratio: float = 0.1) -> Callable[[float, float], float]:
    """beta_t = alpha_t / ratio."""
    return lambda tau, alpha: alpha / ratio


def run_algorithm1(
    game: MarkovGame,
    tau0: float,
    eta: float | None = None,
    alpha_rule: Callable[[float], float] | None = None,
    beta_rule: Callable[[float, float], float] | None = None,
    inner_stop: Callable | None = None,
    outer_iters: int = 8,
    callbacks=(),
    *,
    c: float | None = None,
    params0: PolicyParams | None = None,
    inner_cap: int = 100_000,
    check_every: int = 10,
    tol: float = DEFAULT_TOL,
    tracker: MetricTracker | None = None,
) -> RunResult:
    """Nested loop: GDA at fixed tau_t until the composite metric halves, then tau_{t+1} = eta tau_t.

    ``inner_stop(start, current, k)`` overrides the halving rule
    ``current <= start / 2``; the rule is evaluated every ``check_every``
    inner iterations and a stage also ends at ``inner_cap`` iterations (a
    warning is recorded).  ``eta`` defaults to the geometric factor of the
    theory constants, which needs ``c`` (estimated when omitted).
    """
    if not tau0 > 0:
        raise ValueError("tau0 must be > 0")
    if eta is None:
        if c is None:
            c = estimate_c(game, [tau0, tau0 / 10, tau0 / 100], tol)
        eta = TheoremConstants.from_game(game, c).eta
    if not (0 < eta < 1):
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    alpha_rule = alpha_rule or default_alpha_rule()
    beta_rule = beta_rule or default_beta_rule()
    inner_stop = inner_stop or (lambda start, cur, k: cur <= 0.5 * start)
    cache = tracker.cache if tracker is not None else EquilibriumCache(game, tol)

    theta, psi = _init(game, params0)
    stages, notes = [], []
    k_total = 0
    tau = float(tau0)

    def composite(theta, psi, tau, v0):
        pair = softmax_policies(PolicyParams(theta, psi))
        br = best_response_min(game, pair.pi, tau, tol, v0=v0)
        dp = cache.get(tau).j_star - br.j_value
        df = objective(game, pair, tau) - br.j_value
        return 3.0 * dp + df, -br.value_vector

    for t in range(outer_iters):
        alpha = float(alpha_rule(tau))
        beta = float(beta_rule(tau, alpha))
        if t == 0:
            _emit(tracker, callbacks, 0, theta, psi, tau, alpha, beta)
            last = 0
        start, w = composite(theta, psi, tau, None)
        cur, n, halved = start, 0, False
        try:
            while n < inner_cap:
                theta, psi = _step_arrays(game, theta, psi, alpha, beta, tau)
                n += 1
                k_total += 1
                if n % check_every == 0 or n == inner_cap:
                    cur, w = composite(theta, psi, tau, w)
                    if inner_stop(start, cur, n):
                        halved = True
                        break
                if tracker is not None and tracker.due(k_total) and n < inner_cap:
                    _emit(tracker, callbacks, k_total, theta, psi, tau, alpha, beta)
                    last = k_total
        except DivergenceError as exc:
            stages.append(StageInfo(t, tau, alpha, beta, n, False, start, cur))
            return RunResult(PolicyParams(np.nan_to_num(theta), np.nan_to_num(psi)), _records(tracker), "diverged",
                             k_total, stages, notes, message=str(exc))
        if not halved:
            notes.append(f"stage {t}: inner cap {inner_cap} reached before halving (tau={tau:g})")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
        stages.append(StageInfo(t, tau, alpha, beta, n, halved, start, cur))
        if tracker is not None and last != k_total:
            _emit(tracker, callbacks, k_total, theta, psi, tau, alpha, beta)
            last = k_total
        tau = tau * eta
    result = RunResult(PolicyParams(theta, psi), _records(tracker), "completed", k_total, stages, notes)
    result.message = f"final tau {tau:g}"
    return result


# -- diminishing-weight theory -------------------------------------------------

@dataclass(frozen=True)
class Theorem2Plan:
    """Outcome of the step-size feasibility search for the diminishing-weight schedule."""

    schedule: Schedule
    lam: float
    h: float
    beta_interval: tuple
    initial_condition: bool | None
    feasible: bool
    reasons: tuple


def schedule_from_theorem2(
    game: MarkovGame,
    c: float,
    lam: float,
    *,
    params0: PolicyParams | None = None,
    tol: float = DEFAULT_TOL,
    max_h: float = 1e300,
) -> Theorem2Plan:
    """Pick (alpha0, beta0, tau0, h) with tau0 = lam * h^(1/3).

    ``alpha0`` is fixed by the identity tying it to tau0; h is doubled until
    ``alpha0 / h^(2/3)`` is below its bound; beta0 is taken at the top of
    its admissible interval.  Every condition is reported, and
    ``feasible`` is False when the interval for beta0 is empty or the
    initial condition fails, in which case the returned schedule is only
    indicative.
    """
    if not (lam > 0 and c > 0):
        raise ValueError("lam and c must be > 0")
    k = TheoremConstants.from_game(game, c)
    la, lb = math.log(game.n_actions_max), math.log(game.n_actions_min)
    g, rm = k.gamma, k.rho_min
    K = (65536 * LN2 * (la + lb) + 96 * (1 - g) * rm * c**2) / (3 * (1 - g) ** 2 * rm**3 * c**4)

    def alpha0_of(h):
        return K / (lam * h ** (1.0 / 3.0))

    def rhs3(h):
        tau0 = lam * h ** (1.0 / 3.0)
        return (2 * k.L_H + 4 * k.L_H**2 * k.C2) * tau0 / h ** (1 / 3) + (k.L_H + 4 * k.L_H**2 * k.C2) + k.L_H**2 * k.C2 * h ** (1 / 3) / tau0

    h = 1.0
    while alpha0_of(h) / h ** (2.0 / 3.0) > rhs3(h):
        h *= 2.0
        if h > max_h:
            raise RuntimeError("no admissible h found")
    tau0 = lam * h ** (1.0 / 3.0)
    alpha0 = alpha0_of(h)
    L0 = k.L_H * (2 * tau0 + 1)
    ratio = min((1 - g) * tau0**2 * rm**3 * c**2 / (152 * LN2 * k.n_states * L0**2), 1.0)
    lo, hi = alpha0 / ratio, 1.0 / L0
    reasons = []
    if lo > hi:
        reasons.append(f"beta0 interval empty: need beta0 >= {lo:.3e} and <= 1/L0 = {hi:.3e}")
    p0 = params0 if params0 is not None else PolicyParams.zeros(game)
    dp, df = compute_deltas(game, p0, tau0, EquilibriumCache(game, tol), tol)
    ic = dp + df <= k.C1 * tau0 / h ** (1.0 / 3.0)
    if not ic:
        reasons.append(f"initial condition fails: {dp + df:.3e} > C1*lam = {k.C1 * lam:.3e}")
    beta0 = hi
    sched = Schedule.theorem2(alpha0, beta0, tau0, h)
    return Theorem2Plan(sched, lam, h, (lo, hi), ic, not reasons, tuple(reasons))


@dataclass(frozen=True)
class EnvelopeReport:
    status: str  # "ok", "violated" or "hypotheses unmet"
    checked: int
    violations: int
    worst_ratio: float


def theorem2_envelope(records, consts: TheoremConstants, tau0: float, h: float, hypotheses_met: bool) -> EnvelopeReport:
    """Compare logged unregularized gaps with the k^(-1/3) envelopes.

    gap_max <= (C1 + 3(log A + log B)) tau0 / (3 (k+h)^(1/3)) and
    gap_min <= ((1-gamma) C1 + log A + log B) tau0 / ((1-gamma)(k+h)^(1/3)).
    When the step-size hypotheses are not met the comparison is still made,
    but the status is "hypotheses unmet" instead of a failure.
    """
    s = math.log(consts.n_actions_max) + math.log(consts.n_actions_min)
    g = consts.gamma
    checked = violations = 0
    worst = 0.0
    for r in records:
        if r.gap_max_unreg is None or r.gap_min_unreg is None:
            continue
        base = (r.k + h) ** (1.0 / 3.0)
        b1 = (consts.C1 * tau0 + 3 * s * tau0) / (3 * base)
        b2 = ((1 - g) * consts.C1 * tau0 + s * tau0) / ((1 - g) * base)
        checked += 1
        ratio = max(r.gap_max_unreg / b1, r.gap_min_unreg / b2)
        worst = max(worst, ratio)
        if ratio > 1.0:
            violations += 1
    if not hypotheses_met:
        status = "hypotheses unmet"
    else:
        status = "ok" if violations == 0 else "violated"
    return EnvelopeReport(status, checked, violations, worst)
