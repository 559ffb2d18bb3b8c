"""Command-line interface: ``regmg {solve,equilibrium,verify-lemmas,gen}``.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
failure or divergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import _backend
from .equilibrium import EquilibriumError, estimate_c, shapley_solve
from .evaluation import NumericalError
from .game import GameValidationError, PolicyParams, game_digest, load_game, save_game
from .gda import (
    DivergenceError,
    Schedule,
    TheoremConstants,
    default_alpha_rule,
    default_beta_rule,
    run_algorithm1,
    run_algorithm2,
    run_fixed_tau,
    run_vanilla_gda,
)
from .lemmas import run_lemma_suites
from .library import PRNG_NAME, GeneratorSpec, builtin, generate, make_rng
from .metrics import EquilibriumCache, MetricTracker, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    pass


def _load(spec: str):
    if spec.startswith("builtin:"):
        return builtin(spec)
    try:
        with open(spec, encoding="utf-8") as fh:
            return load_game(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read game file {spec}: {exc.strerror}") from None


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def _print_block(title: str, items: dict) -> None:
    print(f"== {title} ==")
    width = max(len(k) for k in items)
    for k, v in items.items():
        print(f"{k.ljust(width)} : {_fmt(v)}")


def _finite_positive(name, v, allow_zero=False):
    if v is None:
        return
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"--{name} must be {'>= 0' if allow_zero else '> 0'}, got {v}")


# -- solve ----------------------------------------------------------------------

def cmd_solve(args) -> int:
    game = _load(args.game)
    if args.iters < 0:
        raise ConfigError("--iters must be >= 0")
    if args.log_every < 1:
        raise ConfigError("--log-every must be >= 1")
    _finite_positive("alpha0", args.alpha0, allow_zero=True)
    _finite_positive("beta0", args.beta0, allow_zero=True)
    _finite_positive("tol", args.tol)
    for name in ("alpha_exp", "beta_exp", "tau_exp"):
        _finite_positive(name.replace("_", "-"), getattr(args, name), allow_zero=True)
    if args.algo != "vanilla":
        _finite_positive("tau0", args.tau0)
    if args.h < 1:
        raise ConfigError("--h must be >= 1")
    if args.eta is not None and not 0 < args.eta < 1:
        raise ConfigError("--eta must lie in (0, 1)")
    if args.average and args.algo != "vanilla":
        raise ConfigError("--average applies to --algo vanilla only")

    if args.init == "random":
        rng = make_rng(args.seed)
        params0 = PolicyParams(
            rng.standard_normal((game.n_states, game.n_actions_max)),
            rng.standard_normal((game.n_states, game.n_actions_min)),
        )
    else:
        params0 = PolicyParams.zeros(game)

    cache = EquilibriumCache(game, args.tol)
    ne = cache.get(0.0)
    tracker = MetricTracker(game, log_every=args.log_every, tol=args.tol, reference=(ne.pi_star, ne.phi_star),
                            cache=cache)
    summary = {
        "command": "solve",
        "game": args.game,
        "game_hash": game_digest(game),
        "algorithm": args.algo,
        "backend": _backend.current(),
        "seed": args.seed,
        "prng": PRNG_NAME,
        "init": args.init,
        "oracle_tol": args.tol,
        "log_every": args.log_every,
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if args.algo == "diminishing":
            sched = Schedule("polynomial", args.alpha0, args.beta0, args.tau0,
                             (args.alpha_exp, args.beta_exp, args.tau_exp), args.h)
            summary["schedule"] = sched.describe()
            res = run_algorithm2(game, sched, args.iters, params0=params0, tracker=tracker)
        elif args.algo == "fixed":
            summary["schedule"] = f"constant alpha={args.alpha0:g} beta={args.beta0:g} tau={args.tau0:g}"
            res = run_fixed_tau(game, params0, args.tau0, args.alpha0, args.beta0, args.iters, tracker=tracker)
        elif args.algo == "vanilla":
            summary["schedule"] = f"constant alpha={args.alpha0:g} beta={args.beta0:g} tau=0"
            res = run_vanilla_gda(game, args.alpha0, args.beta0, args.iters, args.average,
                                  params0=params0, tracker=tracker)
        else:
            c = args.c
            if c is None:
                c = estimate_c(game, [args.tau0, args.tau0 / 10, args.tau0 / 100], args.tol)
                summary["c_source"] = "estimate_c over {tau0, tau0/10, tau0/100}"
            else:
                summary["c_source"] = "user"
            consts = TheoremConstants.from_game(game, c)
            eta = args.eta if args.eta is not None else consts.eta
            summary.update(c=c, C1=consts.C1, C2=consts.C2, L_H=consts.L_H, L_delta=consts.L_delta, eta=eta)
            summary["schedule"] = (f"piecewise_geometric tau0={args.tau0:g} eta={eta!r} "
                                   f"alpha=a0/tau or a0*tau^2 (a0={args.alpha0:g}) beta=alpha/{args.ratio:g}")
            res = run_algorithm1(
                game, args.tau0, eta, default_alpha_rule(args.alpha0), default_beta_rule(args.ratio),
                outer_iters=args.outer_iters, params0=params0, inner_cap=args.inner_cap, tol=args.tol,
                tracker=tracker,
            )
            summary["stages"] = len(res.stages)
            summary["stages_halved"] = sum(s.halved for s in res.stages)
    if args.out:
        write_csv(res.log, args.out, tol=args.tol, average_columns=args.average or None)
        summary["csv"] = args.out
    fin = res.final
    summary.update(
        termination=res.termination,
        iterations=res.wall_iterations,
        records=len(res.log),
        minimax_value=ne.j_star,
        final_tau=None if fin is None else fin.tau_k,
        final_gap_max_unreg=None if fin is None else fin.gap_max_unreg,
        final_gap_min_unreg=None if fin is None else fin.gap_min_unreg,
        final_nash_gap=None if fin is None else fin.nash_gap,
        final_delta_pi=None if fin is None else fin.delta_pi,
        final_delta_phi=None if fin is None else fin.delta_phi,
        final_dist_to_ne=None if fin is None else fin.dist_to_ne,
    )
    if args.average and fin is not None:
        summary["final_avg_nash_gap"] = fin.avg_nash_gap
    if res.message:
        summary["message"] = res.message
    _print_block("run summary", summary)
    return EXIT_NUMERIC if res.termination == "diverged" else EXIT_OK


# -- equilibrium ----------------------------------------------------------------

def cmd_equilibrium(args) -> int:
    game = _load(args.game)
    if not (math.isfinite(args.tau) and args.tau >= 0):
        raise ConfigError("--tau must be finite and >= 0")
    _finite_positive("tol", args.tol)
    sol = shapley_solve(game, args.tau, args.tol)
    np.set_printoptions(precision=6, suppress=True)
    _print_block("equilibrium", {
        "game": args.game,
        "game_hash": game_digest(game),
        "tau": args.tau,
        "tol": args.tol,
        "value_J": sol.j_star,
        "duality_gap": sol.duality_gap,
        "sweeps": sol.iterations,
    })
    for s in range(game.n_states):
        print(f"s{s}: pi = {np.array2string(sol.pi_star[s])}  phi = {np.array2string(sol.phi_star[s])}  "
              f"V = {sol.value_vector[s]:.10g}")
    if args.out:
        doc = {
            "tau": args.tau,
            "game_hash": game_digest(game),
            "pi": sol.pi_star.tolist(),
            "phi": sol.phi_star.tolist(),
            "value": sol.value_vector.tolist(),
            "j": sol.j_star,
            "duality_gap": sol.duality_gap,
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return EXIT_OK


# -- verify-lemmas ---------------------------------------------------------------

def cmd_verify_lemmas(args) -> int:
    if args.trials < 0:
        raise ConfigError("--trials must be >= 0")
    _finite_positive("tol", args.tol)
    if args.trials == 0:
        print("warning: --trials 0 runs no checks; vacuous pass", file=sys.stderr)
        return EXIT_OK
    rep = run_lemma_suites(args.trials, args.seed, args.tol, samples=args.samples)
    print(f"== lemma suites: {rep.games} games (2 built-in + {args.trials} random), seed {args.seed}, tol {args.tol:g} ==")
    for line in rep.lines():
        print(line)
    for name, r in rep.results.items():
        for v in r.violations[: args.show]:
            print(f"  violation [{name}] {v}")
    print("RESULT:", "PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_CONFIG


# -- gen -------------------------------------------------------------------------

_KINDS = {"mixed": "random_mixed_2x2", "general": "random_general",
          "paper-mixed": "paper_mixed", "paper-deterministic": "paper_deterministic"}


def cmd_gen(args) -> int:
    if args.kind not in _KINDS:
        raise ConfigError(f"--kind must be one of {sorted(_KINDS)}")
    spec = GeneratorSpec(_KINDS[args.kind], seed=args.seed, n_states=args.states, n_actions=args.actions,
                         gamma=args.gamma)
    game = generate(spec)
    text = save_game(game)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    info = {"kind": spec.kind, "seed": args.seed, "prng": PRNG_NAME, "game_hash": game_digest(game)}
    if args.check_mixed:
        sol = shapley_solve(game, 1e-3, 1e-10, compute_gap=False)
        info["min_entry_tau_1e-3"] = float(min(sol.pi_star.min(), sol.phi_star.min()))
    for k, v in info.items():
        print(f"{k}: {_fmt(v)}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regmg", description="Entropy-regularized GDA for zero-sum Markov games")
    p.add_argument("--backend", choices=["numpy", "cython"], help="kernel backend (default: compiled if built)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run a solver and log metrics")
    s.add_argument("--game", default="builtin:mixed")
    s.add_argument("--algo", choices=["fixed", "nested", "diminishing", "vanilla"], default="diminishing")
    s.add_argument("--iters", type=int, default=50_000)
    s.add_argument("--alpha0", type=float, default=1e-3)
    s.add_argument("--alpha-exp", type=float, default=0.0)
    s.add_argument("--beta0", type=float, default=1e-2)
    s.add_argument("--beta-exp", type=float, default=0.0)
    s.add_argument("--tau0", type=float, default=1.0)
    s.add_argument("--tau-exp", type=float, default=1.0 / 3.0)
    s.add_argument("--h", type=float, default=1.0)
    s.add_argument("--eta", type=float, default=None, help="nested loop decay (default from theory constants)")
    s.add_argument("--c", type=float, default=None, help="policy lower bound for the constants (default: estimated)")
    s.add_argument("--ratio", type=float, default=0.1, help="nested loop: beta = alpha / ratio")
    s.add_argument("--outer-iters", type=int, default=8)
    s.add_argument("--inner-cap", type=int, default=100_000)
    s.add_argument("--log-every", type=int, default=50)
    s.add_argument("--out", default=None, help="CSV destination")
    s.add_argument("--average", action="store_true", help="vanilla: log equal-weight averaged policies")
    s.add_argument("--init", choices=["zeros", "random"], default="zeros")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-10, help="oracle tolerance")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("equilibrium", help="solve for the (regularized) equilibrium")
    e.add_argument("--game", default="builtin:mixed")
    e.add_argument("--tau", type=float, default=0.0)
    e.add_argument("--tol", type=float, default=1e-10)
    e.add_argument("--out", default=None, help="write policies as JSON")
    e.set_defaults(func=cmd_equilibrium)

    v = sub.add_parser("verify-lemmas", help="run the inequality suites")
    v.add_argument("--trials", type=int, default=25)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--samples", type=int, default=2, help="random policy pairs per game")
    v.add_argument("--show", type=int, default=5, help="violations to print per suite")
    v.set_defaults(func=cmd_verify_lemmas)

    g = sub.add_parser("gen", help="generate a random game file")
    g.add_argument("--kind", default="mixed", help="mixed, general, paper-mixed or paper-deterministic")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--states", type=int, default=2)
    g.add_argument("--actions", type=int, default=2)
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument("--out", default=None)
    g.add_argument("--check-mixed", action="store_true", help="report the smallest equilibrium entry at tau=1e-3")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.backend:
            _backend.set_backend(args.backend)
        return args.func(args)
    except (DivergenceError, NumericalError, EquilibriumError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, GameValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
