"""Built-in games and seeded random game generators.

Random games use numpy's PCG64 bit generator, whose stream is specified
and identical across platforms, so a seed reproduces the same game
everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import MarkovGame

PRNG_NAME = "PCG64"
GAME_KINDS = ("paper_mixed", "paper_deterministic", "random_mixed_2x2", "random_general")
DOMINANCE_MARGIN = 0.5


def _two_state_transition():
    P = np.empty((2, 2, 2, 2))
    P[0, :, :, 0] = [[0.2, 0.5], [0.5, 0.1]]
    P[0, :, :, 1] = [[0.8, 0.5], [0.5, 0.9]]
    P[1, :, :, 0] = [[0.3, 0.2], [0.6, 0.2]]
    P[1, :, :, 1] = [[0.7, 0.8], [0.4, 0.8]]
    return P


def paper_game_mixed() -> MarkovGame:
    """Two states, two actions each, completely mixed equilibrium, gamma = 0.9."""
    r = np.array([[[1.0, 2.0], [2.0, 1.0]], [[6.0, 4.0], [3.0, 10.0]]])
    return MarkovGame(_two_state_transition(), r, 0.9, np.array([0.5, 0.5]))


def paper_game_deterministic() -> MarkovGame:
    """Same dynamics with r = [[1, 2], [3, 4]] in both states: a pure saddle (row 2, column 1)."""
    r = np.array([[[1.0, 2.0], [3.0, 4.0]]] * 2)
    return MarkovGame(_two_state_transition(), r, 0.9, np.array([0.5, 0.5]))


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    seed: int = 0
    n_states: int = 2
    n_actions: int = 2
    gamma: float | None = None
    rho: tuple | None = None

    def __post_init__(self):
        if self.kind not in GAME_KINDS:
            raise ValueError(f"unknown game kind {self.kind!r}; expected one of {GAME_KINDS}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("n_states and n_actions must be positive")
        if self.kind == "random_mixed_2x2" and self.n_actions != 2:
            raise ValueError("random_mixed_2x2 requires n_actions = 2")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _random_transition(rng, S, A, B):
    # uniform draws renormalized; the floor keeps every row strictly positive
    P = rng.uniform(0.05, 1.0, size=(S, A, B, S))
    return P / P.sum(axis=3, keepdims=True)


def _dominant_2x2(rng):
    """2x2 payoff in [0, 1] whose (anti-)diagonal beats every off-diagonal entry by >= 0.5."""
    hi = rng.uniform(0.75, 1.0, size=2)
    lo = rng.uniform(0.0, 0.25, size=2)
    m = np.array([[hi[0], lo[0]], [lo[1], hi[1]]])
    if rng.integers(2):
        m = m[:, ::-1].copy()
    return m


def generate(spec: GeneratorSpec) -> MarkovGame:
    """Deterministic function of ``spec``; defaults are gamma = 0.9 and uniform rho."""
    if spec.kind == "paper_mixed":
        return paper_game_mixed()
    if spec.kind == "paper_deterministic":
        return paper_game_deterministic()
    rng = make_rng(spec.seed)
    S, n = spec.n_states, spec.n_actions
    P = _random_transition(rng, S, n, n)
    if spec.kind == "random_mixed_2x2":
        r = np.stack([_dominant_2x2(rng) for _ in range(S)])
    else:
        r = rng.uniform(0.0, 1.0, size=(S, n, n))
    gamma = 0.9 if spec.gamma is None else float(spec.gamma)
    rho = np.full(S, 1.0 / S) if spec.rho is None else np.asarray(spec.rho, dtype=np.float64)
    return MarkovGame(P, r, gamma, rho)


def builtin(name: str) -> MarkovGame:
    table = {"mixed": paper_game_mixed, "deterministic": paper_game_deterministic}
    key = name.removeprefix("builtin:")
    if key not in table:
        raise ValueError(f"unknown builtin game {name!r}; expected builtin:mixed or builtin:deterministic")
    return table[key]()
