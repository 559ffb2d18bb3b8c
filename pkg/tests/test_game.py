import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regmg.game import (
    GameValidationError,
    MarkovGame,
    PolicyParams,
    game_digest,
    game_from_dict,
    game_to_dict,
    load_game,
    log_softmax_rows,
    logits_from_policy,
    policy_entropy,
    policy_pair,
    save_game,
    softmax_policies,
    softmax_rows,
)


def test_builtin_shapes(mixed):
    assert mixed.reward.shape == (2, 2, 2)
    assert mixed.transition.shape == (2, 2, 2, 2)
    np.testing.assert_allclose(mixed.transition.sum(-1), 1.0)
    assert mixed.rho_min == 0.5
    assert not mixed.rewards_in_unit_interval


def test_arrays_are_read_only(mixed):
    with pytest.raises(ValueError):
        mixed.reward[0, 0, 0] = 5.0


@pytest.mark.parametrize(
    "mutate",
    [
        lambda P, r, g, rho: (P * 1.01, r, g, rho),
        lambda P, r, g, rho: (P, r, 1.0, rho),
        lambda P, r, g, rho: (P, r, -0.1, rho),
        lambda P, r, g, rho: (P, r, g, np.array([0.7, 0.7])),
        lambda P, r, g, rho: (P, r, g, np.array([1.2, -0.2])),
        lambda P, r, g, rho: (P, r * np.nan, g, rho),
        lambda P, r, g, rho: (P[:, :1], r, g, rho),
    ],
)
def test_validation_rejects(mixed, mutate):
    args = mutate(np.array(mixed.transition), np.array(mixed.reward), mixed.gamma, np.array(mixed.rho))
    with pytest.raises(GameValidationError):
        MarkovGame(*args)


def test_zero_rho_entry_is_allowed_but_flagged(mixed):
    g = MarkovGame(mixed.transition, mixed.reward, 0.9, np.array([1.0, 0.0]))
    assert not g.satisfies_positive_rho


def test_json_round_trip(mixed):
    text = save_game(mixed)
    back = load_game(text)
    assert back == mixed
    assert game_digest(back) == game_digest(mixed)
    doc = json.loads(text)
    doc["gamma"] = 0.5
    assert game_digest(game_from_dict(doc)) != game_digest(mixed)


def test_load_rejects_bad_json():
    with pytest.raises(GameValidationError):
        load_game("{not json")
    with pytest.raises(GameValidationError):
        game_from_dict({"n_states": 2})


def test_normalized_rewards(mixed):
    n = mixed.normalized_rewards()
    assert n.reward.min() == 0.0 and n.reward.max() == 1.0
    assert n.rewards_in_unit_interval


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=2, max_size=6))
def test_softmax_rows_stable(row):
    logits = np.array([row])
    p = softmax_rows(logits)
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1.0) < 1e-12
    lp = log_softmax_rows(logits)
    assert np.all(np.isfinite(lp))
    np.testing.assert_allclose(np.exp(lp), p, atol=1e-15)


def test_logits_round_trip():
    pi = np.array([[0.2, 0.8], [0.5, 0.5]])
    np.testing.assert_allclose(softmax_rows(logits_from_policy(pi)), pi, atol=1e-15)


def test_policy_entropy():
    assert policy_entropy([0.5, 0.5]) == pytest.approx(np.log(2))
    assert policy_entropy([1.0, 0.0]) == 0.0


def test_policy_pair_checks_rows(mixed):
    with pytest.raises(ValueError):
        policy_pair(np.array([[0.5, 0.6], [0.5, 0.5]]), np.full((2, 2), 0.5))


def test_softmax_policies_keeps_logs(mixed):
    params = PolicyParams(np.array([[800.0, 0.0], [0.0, 0.0]]), np.zeros((2, 2)))
    pair = softmax_policies(params)
    log_pi, _ = pair.logs()
    assert pair.pi[0, 1] == 0.0
    assert log_pi[0, 1] == pytest.approx(-800.0)
