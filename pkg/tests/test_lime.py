import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaikit import lime
from xaikit.model_api import Feature, FeatureDomain, XaiError
from xaikit.models import LinearModel, SumModel


class ConstantModel:
    n_outputs = 1
    output_names = ("c",)

    def predict(self, X):
        return np.ones((len(X), 1))


def numeric(m):
    return FeatureDomain.numeric([f"x{j}" for j in range(m)])


def test_perturb_statistics():
    rng = np.random.default_rng(0)
    S = lime.perturb(np.array([100.0]), 1000, 1, numeric(1), rng)
    assert abs(S.mean() - 100.0) <= 1.0
    assert 0.5 <= S.std(ddof=1) <= 2.0


def test_perturb_zero_value_uses_absolute_noise():
    S = lime.perturb(np.array([0.0]), 200, 1, numeric(1), np.random.default_rng(1), noise_ratio=0.01)
    assert np.all(S != 0.0)
    assert 0.005 < S.std() < 0.02


def test_perturb_binary_categorical_always_flips():
    dom = FeatureDomain((Feature.categorical("c", ["A", "B"]),))
    S = lime.perturb(np.array([0.0]), 100, 1, dom, np.random.default_rng(2))
    assert np.all(S == 1.0)


def test_perturb_respects_bounds_and_count():
    dom = FeatureDomain.numeric(["a", "b", "c"], [0, 0, 0], [1, 1, 1])
    x = np.array([1.0, 0.0, 0.5])
    S = lime.perturb(x, 500, 2, dom, np.random.default_rng(3), noise_ratio=0.5)
    assert np.all(S >= 0) and np.all(S <= 1)
    assert np.all((S != x).sum(axis=1) <= 2)


def test_perturb_rejects_too_many():
    with pytest.raises(XaiError):
        lime.perturb(np.ones(2), 5, 3, numeric(2), np.random.default_rng(0))


def test_encode_identity_is_all_ones():
    x = np.array([1.0, 2.0, 3.0])
    assert np.all(lime.encode(x, x[None, :], numeric(3)) == 1)


def test_encode_far_sample_zero_bit():
    x = np.zeros(2)
    rng = np.random.default_rng(0)
    S = rng.normal(scale=0.01, size=(50, 2))
    S[0, 0] = 10.0  # many scaled deviations away
    E = lime.encode(x, S, numeric(2))
    assert E[0, 0] == 0
    # hand evaluation: the cutoff is below the kernel drop at the far sample
    col = np.concatenate([[0.0], S[:, 0]])
    z = (col - col.mean()) / col.std()
    theta = 1 / math.sqrt(2 * math.pi)
    phi = math.exp(-0.5 * (z[1] - z[0]) ** 2) * theta
    assert abs(phi - theta) > theta * (1 - math.exp(-0.5 * 0.3**2))


def test_encode_categorical_equality():
    dom = FeatureDomain((Feature.categorical("c", ["a", "b", "c"]),))
    E = lime.encode(np.array([1.0]), np.array([[1.0], [0.0], [2.0]]), dom)
    np.testing.assert_array_equal(E[:, 0], [1, 0, 0])


def test_encode_constant_column_all_ones():
    E = lime.encode(np.array([1.0, 5.0]), np.array([[1.0, 4.0], [1.0, 6.0]]), numeric(2))
    np.testing.assert_array_equal(E[:, 0], [1, 1])


def test_balance_penalty_spot_values():
    eta = lime.balance_penalty([[1], [1], [1], [1]], [0, 0, 1, 1], 0.01, 10.0, 1)
    assert abs(eta[0] - math.tanh(0.11)) < 1e-9
    assert abs(eta[0] - 0.1096) < 1e-4
    # no bit set: b = 0 and d = 0.5 for both classes
    eta = lime.balance_penalty(np.zeros((4, 10)), [0, 0, 1, 1], 0.01, 10.0, 10)
    assert np.all(np.abs(eta - math.tanh(2.01)) < 1e-9)
    assert abs(eta[0] - 0.9647) < 1e-4


def test_balance_penalty_single_class_fallback():
    eta = lime.balance_penalty(np.ones((3, 2)), [1, 1, 1], 0.01, 10.0, 2)
    np.testing.assert_allclose(eta, math.tanh(0.01 + 1 + 0.2))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40))
def test_balance_penalty_increases_with_m(m1, m2):
    E = np.ones((4, 1))
    o = [0, 1, 0, 1]
    a = lime.balance_penalty(E, o, 0.01, 10.0, min(m1, m2))[0]
    b = lime.balance_penalty(E, o, 0.01, 10.0, max(m1, m2))[0]
    assert 0 < a < 1 and 0 < b < 1
    if m1 != m2:
        assert b > a


def test_adaptive_constant_model_runs_every_round():
    cfg = lime.LimeConfig(samples=20, max_variance_rounds=6, rng_seed=4)
    s = lime.adaptive_sample(ConstantModel(), np.ones(4), cfg, numeric(4))
    assert s.nonseparable
    assert s.rounds == 6
    assert s.sizes == [20 * 2**r for r in range(7)]
    assert len(s.X) == 20 * 2**6
    assert s.min_perturbed == 3  # capped at M - 1


def test_adaptive_boundary_classifier_passes_first_round():
    model = LinearModel([1.0, 1.0], link="logistic")
    s = lime.adaptive_sample(model, np.zeros(2), lime.LimeConfig(rng_seed=9), numeric(2))
    assert s.rounds == 0 and s.separable and s.min_perturbed == 1
    assert 0.1 < s.class_balance < 0.9


def test_adaptive_cap_for_two_features():
    cfg = lime.LimeConfig(samples=10, max_variance_rounds=4)
    s = lime.adaptive_sample(ConstantModel(), np.ones(2), cfg, numeric(2))
    assert s.min_perturbed == 1


def test_adaptive_is_deterministic():
    cfg = lime.LimeConfig(samples=20, max_variance_rounds=3, rng_seed=1)
    a = lime.adaptive_sample(ConstantModel(), np.ones(3), cfg, numeric(3))
    b = lime.adaptive_sample(ConstantModel(), np.ones(3), cfg, numeric(3))
    np.testing.assert_array_equal(a.X, b.X)


def test_proximity_filter_cases():
    keep, fb = lime.proximity_filter([1.0, 0.5, 0.9], 0.8, 1)
    np.testing.assert_array_equal(keep, [0, 2])
    assert not fb
    keep, fb = lime.proximity_filter([0.1, 0.5, 0.9], 0.0, 1)
    np.testing.assert_array_equal(keep, [0, 1, 2])
    keep, fb = lime.proximity_filter([0.1, 0.5, 0.3, 0.2], 0.8, 3)
    np.testing.assert_array_equal(keep, [1, 2, 3])
    assert fb


def test_proximity_identity_is_one():
    x = np.array([1.0, 2.0])
    S = np.array([[1.0, 2.0], [3.0, 1.0]])
    assert lime.proximity(x, S, numeric(2))[0] == 1.0


def test_retained_count_strictly_between():
    model = LinearModel([5.0, 0.0, 1.0])
    x = np.array([2.0, 2.5, 1.5])
    sal = lime.explain(model, x, lime.LimeConfig(rng_seed=0))
    assert sal.n_samples == 300
    assert 3 + 1 < sal.n_fit < 300
    assert not sal.fallback


def test_explain_ranking_oracle():
    model = LinearModel([5.0, 0.0, 1.0])
    x = np.array([2.0, 2.5, 1.5])
    hits = sum(lime.explain(model, x, lime.LimeConfig(rng_seed=s)).ranking() == [0, 2, 1] for s in range(100))
    assert hits >= 90


def test_explain_sum_model_signs():
    for s in range(10):
        sal = lime.explain(SumModel(), np.array([1.0, 2.0, 3.0, 4.0]), lime.LimeConfig(rng_seed=s))
        assert np.all(sal.saliency >= 0)


def test_explain_constant_model_zero():
    sal = lime.explain(ConstantModel(), np.array([1.0, 2.0]), lime.LimeConfig(samples=50, rng_seed=0))
    np.testing.assert_allclose(sal.saliency, 0.0, atol=1e-9)
    assert sal.nonseparable


def test_explain_deterministic_and_shrunk():
    model = LinearModel([3.0, -2.0, 0.5])
    cfg = lime.LimeConfig(rng_seed=12)
    a = lime.explain(model, np.ones(3), cfg)
    b = lime.explain(model, np.ones(3), cfg)
    assert a.to_dict() == b.to_dict()
    assert np.all((a.penalties > 0) & (a.penalties < 1))
    nz = a.weights != 0
    assert np.all(np.abs(a.saliency[nz]) < np.abs(a.weights[nz]))


def test_saliency_report_fields():
    sal = lime.explain(LinearModel([1.0, 2.0]), np.ones(2), lime.LimeConfig(rng_seed=0))
    d = sal.to_dict()
    assert [f["rank"] for f in d["features"]] == [2, 1]
    assert set(d["features"][0]) == {"name", "w", "eta", "w_prime", "rank"}


def test_config_validation():
    with pytest.raises(XaiError):
        lime.LimeConfig(proximity_kappa=1.5)
    with pytest.raises(XaiError):
        lime.LimeConfig(samples=0)
