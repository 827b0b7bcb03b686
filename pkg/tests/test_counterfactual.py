import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaikit import counterfactual as cf
from xaikit.model_api import Feature, FeatureDomain, XaiError, predict_array
from xaikit.models import CreditScorerModel, LinearModel, SumModel
from xaikit.oracles import grid_optimum, grid_problems

X0 = np.array([21.0, 3.5, 5.0, 100.0])


def box(m, hi=10.0, mutable=None):
    return FeatureDomain.numeric([f"x{j}" for j in range(m)], [0.0] * m, [hi] * m, mutable=mutable)


def test_score_identity_candidate():
    s = cf.score(SumModel(), [1.0, 2.0], [1.0, 2.0], box(2), cf.CfGoal([5.0], tolerance=0.0))
    assert (s.h2, s.h3, s.s1, s.s2) == (0.0, 0.0, 0.0, 0.0)
    assert s.h1 == -4.0 and not s.valid


def test_score_immutable_change():
    s = cf.score(SumModel(), [1.0, 2.0], [3.0, 2.0], box(2, mutable=[False, True]), cf.CfGoal([5.0], tolerance=0.0))
    assert s.h2 == -1.0 and s.h1 == 0.0 and not s.valid


def test_score_credit_distance_example():
    credit = CreditScorerModel()
    s = cf.score(credit, X0, [21.0, 4.0221, 5.0, 100.0], credit.domain(), cf.CfGoal([1.0]))
    assert s.s2 == -1.0
    assert s.s1 == pytest.approx(0.5221, abs=1e-9)


def test_score_categorical_distance():
    dom = FeatureDomain((Feature.numeric("a", 0, 10), Feature.categorical("c", ["u", "v", "w"])))
    s = cf.score(SumModel(), [1.0, 0.0], [1.5, 2.0], dom, cf.CfGoal([0.0], tolerance=100.0))
    assert s.s1 == pytest.approx(1.5) and s.s2 == -2.0


def test_score_confidence_penalty():
    credit = CreditScorerModel()
    near = X0.copy()
    near[1] = credit.NEAR_CHANGE_POINT
    loose = cf.score(credit, X0, near, credit.domain(), cf.CfGoal([1.0]))
    strict = cf.score(credit, X0, near, credit.domain(), cf.CfGoal([1.0], thresholds=[0.8]))
    assert loose.valid and loose.h3 == 0.0
    assert strict.h3 == -1.0 and not strict.valid


def test_score_mad_scaling():
    data = np.array([[0.0, 0.0], [2.0, 1.0], [4.0, 2.0]])
    s = cf.score(SumModel(), [0.0, 0.0], [2.0, 2.0], box(2), cf.CfGoal([4.0], tolerance=0.0), data=data)
    assert s.s1 == pytest.approx(2.0 / 2.0 + 2.0 / 1.0)


def test_score_out_of_domain():
    with pytest.raises(XaiError, match="outside the domain"):
        cf.score(SumModel(), [1.0], [11.0], box(1), cf.CfGoal([0.0], tolerance=0.0))


def test_score_dict_has_no_negative_zero():
    s = cf.score(SumModel(), [1.0], [1.0], box(1), cf.CfGoal([1.0], tolerance=0.0))
    assert all(str(v) != "-0.0" for v in s.to_dict().values())


def test_regressor_tolerance_default():
    goal = cf.resolve_goal(SumModel(), cf.CfGoal([3.0]), box(2))
    assert 0 < goal.tolerance < 0.02
    assert cf.resolve_goal(LinearModel([1.0], link="logistic"), cf.CfGoal([1.0]), box(1)).tolerance == 0.0


def test_construct_goal_already_met():
    credit = CreditScorerModel()
    scorer = cf.Scorer(credit, X0, credit.domain(), cf.CfGoal([0.0]))
    c, s = cf.construct(scorer, np.random.default_rng(0))
    np.testing.assert_array_equal(c, X0)
    assert s.key == (0.0, 0.0) and scorer.evaluations == 1


def test_construct_all_invalid_and_deterministic():
    model = LinearModel([1.0, 1.0], -100.0, link="logistic")
    runs = []
    for _ in range(2):
        scorer = cf.Scorer(model, [1.0, 1.0], box(2), cf.CfGoal([1.0]))
        c, s = cf.construct(scorer, np.random.default_rng(5))
        assert not s.valid and scorer.evaluations == 21
        runs.append(c)
    np.testing.assert_array_equal(runs[0], runs[1])


def test_neighborhood_identity_has_no_reverts():
    rows, moves = cf.neighborhood(np.ones(3), np.ones(3), box(3), cf.SolverConfig(), np.random.default_rng(0))
    assert all(m.kind not in ("revert", "toward", "exchange") for m in moves)
    assert np.all(np.abs(rows - 1.0).sum(axis=1) > 0)


def test_neighborhood_single_mutable_feature():
    dom = box(3, mutable=[False, True, False])
    cur = np.array([1.0, 4.0, 1.0])
    rows, moves = cf.neighborhood(cur, np.ones(3), dom, cf.SolverConfig(), np.random.default_rng(1))
    assert {m.feature for m in moves} == {1}
    np.testing.assert_array_equal(rows[:, [0, 2]], 1.0)


def test_neighborhood_no_mutable():
    with pytest.raises(XaiError, match="nothing to search"):
        cf.neighborhood(np.ones(2), np.ones(2), box(2, mutable=[False, False]), cf.SolverConfig(), np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_neighborhood_in_bounds(seed):
    rng = np.random.default_rng(seed)
    dom = FeatureDomain((Feature.numeric("a", 0, 1), Feature.numeric("b", -5, 5), Feature.categorical("c", ["p", "q", "r"])))
    x = np.array([rng.uniform(0, 1), rng.uniform(-5, 5), float(rng.integers(3))])
    cur = np.array([rng.choice([0.0, 1.0]), rng.uniform(-5, 5), float(rng.integers(3))])
    rows, _ = cf.neighborhood(cur, x, dom, cf.SolverConfig(), rng)
    assert all(dom.contains(r) for r in rows)


def test_search_one_dimensional_sum():
    r = cf.search(SumModel(), [5.0], box(1), cf.CfGoal([3.0], tolerance=0.01))
    assert r.valid and abs(r.x_cf[0] - 3.0) <= 0.01


def test_search_credit_picks_nearer_change_point():
    credit = CreditScorerModel()
    r = cf.search(credit, X0, credit.domain(), cf.CfGoal([1.0]))
    assert r.valid and r.changed_features == ["Debt"]
    assert abs(r.x_cf[1] - credit.NEAR_CHANGE_POINT) < 0.05
    assert predict_array(credit, r.x_cf[None])[0, 0] == 1.0


def test_search_goal_already_met():
    credit = CreditScorerModel()
    r = cf.search(credit, X0, credit.domain(), cf.CfGoal([0.0]))
    assert r.valid and r.changed_features == [] and r.iterations_used <= 1


def test_search_deterministic():
    credit = CreditScorerModel()
    cfg = cf.SolverConfig(max_iterations=2000, rng_seed=3)
    a = cf.search(credit, X0, credit.domain(), cf.CfGoal([1.0]), cfg)
    b = cf.search(credit, X0, credit.domain(), cf.CfGoal([1.0]), cfg)
    assert a.to_dict() == b.to_dict() and a.history == b.history


@pytest.mark.parametrize("search", ["tabu", "hill"])
def test_best_key_non_decreasing(search):
    credit = CreditScorerModel()
    r = cf.search(credit, X0, credit.domain(), cf.CfGoal([1.0]), cf.SolverConfig(search=search, max_iterations=3000))
    assert all(b >= a for a, b in zip(r.history, r.history[1:]))


def test_budget_respected():
    model = LinearModel([1.0, 1.0], -100.0, link="logistic")
    r = cf.search(model, [1.0, 1.0], box(2), cf.CfGoal([1.0]), cf.SolverConfig(max_iterations=333))
    assert not r.valid and r.iterations_used == 333


def test_immutable_feature_never_changed_in_valid_result():
    p = [q for q in grid_problems() if q.name == "immutable"][0]
    r = cf.search(p.model, p.x, p.domain, p.goal)
    assert r.valid and r.x_cf[0] == p.x[0]


@pytest.mark.parametrize("problem", grid_problems(), ids=lambda p: p.name)
def test_grid_oracle_tabu_and_hill(problem):
    best, cells = grid_optimum(problem)
    assert best is not None and cells <= 10_000
    tabu = cf.search(problem.model, problem.x, problem.domain, problem.goal)
    hill = cf.search(problem.model, problem.x, problem.domain, problem.goal, cf.SolverConfig(search="hill"))
    assert tabu.valid and hill.valid
    assert tabu.score.soft >= best - 0.05 * abs(best)


def test_config_validation():
    with pytest.raises(XaiError):
        cf.SolverConfig(search="anneal")
    with pytest.raises(XaiError):
        cf.SolverConfig(tabu_tenure=0)
    with pytest.raises(XaiError):
        cf.CfGoal([1.0], thresholds=[1.5])
