"""Time the numpy and compiled kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from regmg import _backend
from regmg.library import GeneratorSpec, generate, paper_game_mixed


def _cases():
    mixed = paper_game_mixed()
    big = generate(GeneratorSpec("random_general", seed=1, n_states=20, n_actions=6))
    for name, g in (("builtin:mixed", mixed), ("random 20x6x6", big)):
        S, A, B = g.reward.shape
        rng = np.random.default_rng(0)
        theta = np.ascontiguousarray(rng.standard_normal((S, A)))
        psi = np.ascontiguousarray(rng.standard_normal((S, B)))
        P = np.ascontiguousarray(g.transition)
        r = np.ascontiguousarray(g.reward)
        yield f"gradients [{name}]", lambda k, P=P, r=r, g=g, th=theta, ps=psi: k.gradients(P, r, g.rho, g.gamma, th, ps, 0.5)

        phi = np.full((S, B), 1.0 / B)
        T = np.ascontiguousarray(np.einsum("sabt,sb->sat", P, phi))
        R = np.ascontiguousarray(np.einsum("sab,sb->sa", r, phi))
        bonus = np.zeros(S)
        yield f"soft value iteration [{name}]", lambda k, T=T, R=R, b=bonus, g=g: k.soft_value_iteration(
            T, R, b, g.gamma, 0.5, 1e-10, 100_000, np.zeros(len(b)))

        G = np.ascontiguousarray(r[0] * 10.0)
        yield f"QRE matrix [{name}]", lambda k, G=G: k.qre_matrix(
            G, 0.1, 1e-12, 10_000, np.full(G.shape[0], 1.0 / G.shape[0]), np.full(G.shape[1], 1.0 / G.shape[1]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _backend.available()
    if "cython" not in backends:
        print("compiled extension not built; timing numpy only")
    print(f"{'kernel':42s}" + "".join(f"{b:>14s}" for b in backends) + ("      speedup" if len(backends) > 1 else ""))
    for label, fn in _cases():
        times = {}
        for b in backends:
            k = _backend._AVAILABLE[b]
            n, _ = timeit.Timer(lambda: fn(k)).autorange()
            best = min(timeit.repeat(lambda: fn(k), number=n, repeat=args.repeat)) / n
            times[b] = best
        row = f"{label:42s}" + "".join(f"{times[b] * 1e6:12.1f}us" for b in backends)
        if len(backends) > 1:
            row += f"{times['numpy'] / times['cython']:12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
