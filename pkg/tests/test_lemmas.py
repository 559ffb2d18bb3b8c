import pytest

from regmg import evaluation
from regmg.game import MarkovGame
from regmg.lemmas import REQUIRED, run_lemma_suites, suite_games


def test_suite_games_layout():
    games = suite_games(4, 1)
    assert [n for n, _ in games[:2]] == ["builtin:mixed", "builtin:deterministic"]
    assert len(games) == 6


@pytest.fixture(scope="module")
def small_report():
    return run_lemma_suites(3, seed=2, tol=1e-8, samples=1)


@pytest.mark.parametrize("suite", ["a", "c", "d", "e", "f", "b_discounted"])
def test_suites_hold(small_report, suite):
    r = small_report.results[suite]
    assert r.checked > 0 and not r.violations, r.violations[:3]


def test_undiscounted_sandwich_is_violated(small_report):
    # the value and g_tau tiers need the 1/(1 - gamma) factor
    assert small_report.results["b"].violations
    assert not small_report.passed


def test_report_lines(small_report):
    lines = small_report.lines()
    assert len(lines) == 7 and all("pass" in line for line in lines)
    assert set(REQUIRED) < set(small_report.results)


def test_sign_mutation_is_detected(monkeypatch):
    orig = evaluation.gradients

    def mutated(game, pair, tau=0.0):
        return orig(MarkovGame(game.transition, -game.reward, game.gamma, game.rho), pair, tau)

    monkeypatch.setattr(evaluation, "gradients", mutated)
    rep = run_lemma_suites(3, seed=2, tol=1e-8, samples=1)
    assert rep.results["c"].violations


def test_negative_trials_rejected():
    with pytest.raises(ValueError):
        run_lemma_suites(-1)
