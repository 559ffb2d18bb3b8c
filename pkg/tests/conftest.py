import itertools

import numpy as np
import pytest

from regmg.game import MarkovGame, PolicyParams, softmax_policies
from regmg.library import GeneratorSpec, generate, paper_game_deterministic, paper_game_mixed


@pytest.fixture
def mixed():
    return paper_game_mixed()


@pytest.fixture
def det():
    return paper_game_deterministic()


@pytest.fixture
def small_random():
    return generate(GeneratorSpec("random_general", seed=11, n_states=3, n_actions=3))


def random_pair(game, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    params = PolicyParams(
        scale * rng.standard_normal((game.n_states, game.n_actions_max)),
        scale * rng.standard_normal((game.n_states, game.n_actions_min)),
    )
    return params, softmax_policies(params)


def rollout_value(game, pi, phi, tau, horizon=None):
    """Truncated-horizon backward recursion; independent of any linear solve."""
    g = game.gamma
    horizon = horizon or int(np.ceil(np.log(1e-15) / np.log(g)))
    with np.errstate(divide="ignore", invalid="ignore"):
        h_pi = -np.where(pi > 0, pi * np.log(pi), 0.0).sum(axis=1)
        h_phi = -np.where(phi > 0, phi * np.log(phi), 0.0).sum(axis=1)
    v = np.zeros(game.n_states)
    for _ in range(horizon):
        q = game.reward + g * game.transition @ v
        v = np.einsum("sa,sb,sab->s", pi, phi, q) + tau * (h_pi - h_phi)
    return v


def deterministic_policies(n_states, n_actions):
    for choice in itertools.product(range(n_actions), repeat=n_states):
        p = np.zeros((n_states, n_actions))
        p[np.arange(n_states), choice] = 1.0
        yield p


def lp_matrix_value(G):
    """max_x min_j (x'G)_j by linear programming (scipy), as an independent oracle."""
    from scipy.optimize import linprog

    A, B = G.shape
    c = np.zeros(A + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-G.T, np.ones((B, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(B), A_eq=np.r_[np.ones(A), 0.0][None], b_eq=[1.0],
                  bounds=[(0, None)] * A + [(None, None)], method="highs")
    assert res.status == 0
    return res.x[-1], res.x[:A]


def lp_shapley_value(game, sweeps=600):
    """Shapley iteration with LP stage solves."""
    v = np.zeros(game.n_states)
    for _ in range(sweeps):
        G = game.reward + game.gamma * game.transition @ v
        v = np.array([lp_matrix_value(G[s])[0] for s in range(game.n_states)])
    return v


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
