import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regmg.evaluation import (
    LogOfZeroError,
    advantage,
    check_gradient,
    evaluate,
    gradients,
    objective,
    policy_gradients,
    value_regularized,
    visitation,
)
from regmg.game import PolicyParams, policy_pair, softmax_policies
from regmg.library import GeneratorSpec, generate

from conftest import random_pair, rollout_value


@pytest.mark.parametrize("tau", [0.0, 0.3, 2.0])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_value_matches_truncated_rollout(mixed, small_random, tau, seed):
    for game in (mixed, small_random):
        _, pair = random_pair(game, seed)
        v = value_regularized(game, pair, tau)
        np.testing.assert_allclose(v, rollout_value(game, pair.pi, pair.phi, tau), rtol=1e-11, atol=1e-10)
        np.testing.assert_allclose(v, value_regularized(game, pair, tau, method="iterative"), atol=1e-10)


def test_uniform_value_closed_form(mixed):
    # uniform pair on the mixed game: constant stage reward 1.5 and 5.75, no net entropy
    pair = policy_pair(np.full((2, 2), 0.5), np.full((2, 2), 0.5))
    v = value_regularized(mixed, pair, 1.0)
    P = np.einsum("sabt->st", mixed.transition) / 4
    expected = np.linalg.solve(np.eye(2) - 0.9 * P, [1.5, 5.75])
    np.testing.assert_allclose(v, expected, rtol=1e-13)


def test_visitation_is_distribution_with_floor(small_random):
    _, pair = random_pair(small_random, 5)
    d = visitation(small_random, pair)
    assert d.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(d >= (1 - small_random.gamma) * small_random.rho - 1e-15)


@pytest.mark.parametrize("tau", [0.0, 0.7])
def test_expected_advantage_is_zero(small_random, tau):
    _, pair = random_pair(small_random, 3)
    ev = evaluate(small_random, pair, tau)
    exp_adv = np.einsum("sa,sb,sab->s", pair.pi, pair.phi, ev.adv)
    assert np.abs(exp_adv).max() < 1e-10


@pytest.mark.parametrize("tau", [0.0, 0.1, 1.0, 5.0])
@pytest.mark.parametrize("seed", [0, 4])
def test_gradients_match_central_differences(mixed, small_random, tau, seed):
    for game in (mixed, small_random):
        params, _ = random_pair(game, seed)
        rep = check_gradient(game, params, tau)
        assert rep.passed, rep


def test_kernel_and_reference_gradients_agree(small_random):
    params, pair = random_pair(small_random, 9, scale=2.0)
    gt, gp, j = policy_gradients(small_random, params, 0.4)
    rt, rp = gradients(small_random, pair, 0.4)
    np.testing.assert_allclose(gt, rt, atol=1e-11)
    np.testing.assert_allclose(gp, rp, atol=1e-11)
    assert j == pytest.approx(objective(small_random, pair, 0.4), abs=1e-10)


def test_check_gradient_catches_wrong_sign(mixed):
    params, _ = random_pair(mixed, 2)

    def flipped(game, p, tau):
        gt, gp = gradients(game, softmax_policies(p), tau)
        return gt, -gp

    assert not check_gradient(mixed, params, 0.5, grad_fn=flipped).passed


def test_zero_entry_policy_needs_logs_when_regularized(mixed):
    pi = np.array([[1.0, 0.0], [0.5, 0.5]])
    pair = policy_pair(pi, np.full((2, 2), 0.5))
    value_regularized(mixed, pair, 0.0)
    with pytest.raises(LogOfZeroError):
        value_regularized(mixed, pair, 0.5)


def test_saturated_logits_stay_finite(mixed):
    params = PolicyParams(np.array([[900.0, -900.0], [0.0, 1.0]]), np.zeros((2, 2)))
    gt, gp, j = policy_gradients(mixed, params, 1.0)
    assert np.all(np.isfinite(gt)) and np.all(np.isfinite(gp)) and np.isfinite(j)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_entropy_bonus_bounds(seed, tau):
    game = generate(GeneratorSpec("random_general", seed=seed, n_states=2, n_actions=3))
    _, pair = random_pair(game, seed)
    diff = objective(game, pair, tau) - objective(game, pair, 0.0)
    bound = tau * np.log(3) / (1 - game.gamma)
    assert -bound - 1e-9 <= diff <= bound + 1e-9
