import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaikit import metrics, shap
from xaikit.model_api import Dataset, Feature, FeatureDomain, XaiError, predict_array
from xaikit.models import FixedMlpModel, LinearModel, SumModel


def test_kernel_spot_values():
    assert shap.shap_kernel(4, 2) == 0.125
    assert shap.shap_kernel(4, 1) == 0.25


@pytest.mark.parametrize("size", [0, 4])
def test_kernel_edges_raise(size):
    with pytest.raises(XaiError, match="infinite weight"):
        shap.shap_kernel(4, size)


@given(st.integers(2, 30), st.data())
def test_kernel_symmetric_positive(m, data):
    s = data.draw(st.integers(1, m - 1))
    assert shap.shap_kernel(m, s) == pytest.approx(shap.shap_kernel(m, m - s), rel=1e-15)
    assert shap.shap_kernel(m, s) > 0


def test_synthesize():
    B = np.array([[9.0, 9.0], [7.0, 8.0]])
    x = np.array([1.0, 2.0])
    np.testing.assert_array_equal(shap.synthesize(x, [1, 0], B[:1]), [[1.0, 9.0]])
    np.testing.assert_array_equal(shap.synthesize(x, [1, 1], B), [x, x])
    np.testing.assert_array_equal(shap.synthesize(x, [0, 0], B), B)


def test_sum_zero_background():
    e = shap.explain(SumModel(), [1, 2, 3, 4], np.zeros((1, 4)))
    np.testing.assert_allclose(e.phi[0], [1, 2, 3, 4], atol=1e-6)
    assert abs(e.phi0[0]) < 1e-6


def test_sum_uniform_background_closed_form():
    rng = np.random.default_rng(42)
    B = rng.uniform(0, 10, size=(100, 4))
    x = np.array([1.0, 2.0, 3.0, 4.0])
    e = shap.explain(SumModel(), x, B)
    assert e.phi0[0] == pytest.approx(4 * B.mean(), abs=1e-6)
    np.testing.assert_allclose(e.phi[0], x - B.mean(axis=0), atol=1e-6)
    assert e.phi0[0] > 0 and np.all(e.phi[0] < 0)


def test_matches_permutation_oracle():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 9))
        model = FixedMlpModel.random([m, 6, 2], rng, activation="leaky_relu")
        x = rng.normal(size=m)
        B = rng.normal(size=(4, m))
        e = shap.explain(model, x, B)
        for k in range(2):
            np.testing.assert_allclose(e.phi[k], metrics.ground_truth_shapley(model, x, B, output_index=k), atol=1e-6)


def test_single_feature():
    e = shap.explain(LinearModel([3.0]), [2.0], np.array([[1.0], [0.0]]))
    np.testing.assert_allclose(e.phi[0], [4.5])
    assert e.phi0[0] == pytest.approx(1.5)


def test_symmetry_and_dummy():
    rng = np.random.default_rng(3)
    model = FixedMlpModel.random([3, 5, 1], rng)
    B = rng.normal(size=(6, 3))
    B[:, 1] = B[:, 0]
    B[:, 2] = 0.7
    x = np.array([0.4, 0.4, 0.7])
    # tie the first-layer rows of features 0 and 1 so the model treats them alike
    sym = FixedMlpModel.from_dict(model.to_dict())
    w = sym.layers[0].weights.copy()
    w[1] = w[0]
    sym.layers[0].weights[...] = w
    e = shap.explain(sym, x, B)
    assert e.phi[0, 0] == pytest.approx(e.phi[0, 1], abs=1e-6)
    assert abs(e.phi[0, 2]) < 1e-6


def test_sampled_mode_local_accuracy_and_accuracy():
    rng = np.random.default_rng(8)
    model = FixedMlpModel.random([14, 6, 1], rng)
    x = rng.normal(size=14)
    B = rng.normal(size=(8, 14))
    e = shap.explain(model, x, B, n_samples=4000, seed=1)
    assert not e.exhaustive
    assert abs(e.local_accuracy_gap()[0]) < 1e-9
    full = shap.explain(model, x, B, exhaustive_cap=14)
    assert np.abs(e.phi - full.phi).max() < 0.05 * np.abs(full.phi).max()


def test_sampled_mode_deterministic_and_underdetermined():
    rng = np.random.default_rng(0)
    model = LinearModel(rng.normal(size=13))
    x = rng.normal(size=13)
    B = rng.normal(size=(3, 13))
    a = shap.explain(model, x, B, n_samples=200, seed=4)
    b = shap.explain(model, x, B, n_samples=200, seed=4)
    np.testing.assert_array_equal(a.phi, b.phi)
    with pytest.raises(XaiError, match="underdetermined"):
        shap.explain(model, x, B, n_samples=5)


def test_sample_coalitions_unique_and_weighted():
    masks, w = shap.sample_coalitions(15, 500, np.random.default_rng(0))
    assert len(masks) == 500
    codes = {tuple(m) for m in masks}
    assert len(codes) == 500
    assert np.all((masks.sum(axis=1) >= 1) & (masks.sum(axis=1) <= 14))
    assert w.sum() == pytest.approx(1.0)


def test_receipt_shape():
    e = shap.explain(SumModel(), [1, 2], np.zeros((1, 2)), feature_names=("a", "b"))
    r = e.to_dict()
    out = r["outputs"][0]
    assert out["null_output"] == 0.0
    assert [f["name"] for f in out["features"]] == ["a", "b"]


def numeric_data(X):
    return Dataset(np.asarray(X, dtype=float), FeatureDomain.numeric([f"x{j}" for j in range(np.shape(X)[1])]))


def test_background_random():
    data = numeric_data(np.arange(20.0).reshape(10, 2))
    full = shap.background_random(data, 10, seed=1)
    assert sorted(map(tuple, full.X)) == sorted(map(tuple, data.X))
    a = shap.background_random(data, 4, seed=3)
    b = shap.background_random(data, 4, seed=3)
    np.testing.assert_array_equal(a.X, b.X)
    with pytest.raises(XaiError):
        shap.background_random(data, 11)


def test_background_random_distinct_rows_large():
    X = np.column_stack([np.arange(16512.0), np.zeros(16512)])
    bg = shap.background_random(numeric_data(X), 100, seed=0)
    assert len(np.unique(bg.X[:, 0])) == 100


def test_kmeans_fixed_points_and_k1():
    pts = np.array([[0.0, 0.0], [5.0, 5.0], [10.0, 0.0]])
    c = shap.background_kmeans(numeric_data(pts), 3, seed=0)
    assert sorted(map(tuple, c.X)) == sorted(map(tuple, pts))
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    c1 = shap.background_kmeans(numeric_data(X), 1)
    np.testing.assert_allclose(c1.X[0], X.mean(axis=0), atol=1e-12)


def test_kmeans_blobs():
    rng = np.random.default_rng(7)
    a = rng.normal(loc=[0, 0], scale=0.3, size=(200, 2))
    b = rng.normal(loc=[10, 10], scale=0.3, size=(200, 2))
    X = np.vstack([a, b])
    centers = shap.background_kmeans(numeric_data(X), 2, seed=1).X
    centers = centers[np.argsort(centers[:, 0])]
    np.testing.assert_allclose(centers[0], a.mean(axis=0), atol=0.1)
    np.testing.assert_allclose(centers[1], b.mean(axis=0), atol=0.1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_kmeans_sse_non_increasing(seed, k):
    X = np.random.default_rng(seed).normal(size=(60, 2))
    hist = shap.kmeans(X, k, seed=seed).sse_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_kmeans_rejects_categorical():
    schema = FeatureDomain((Feature.numeric("a"), Feature.categorical("c", ["u", "v"])))
    data = Dataset(np.array([[0.0, 0.0], [1.0, 1.0]]), schema)
    with pytest.raises(XaiError):
        shap.background_kmeans(data, 1)


def test_counterfactual_background_sum_model():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, size=(50, 3))
    data = Dataset(X, FeatureDomain.numeric(["a", "b", "c"], [-1, -1, -1], [1, 1, 1]))
    res = shap.background_counterfactual(SumModel(), data, [0.0], s=4, n=2, tolerance=0.05, seed=0)
    assert res.succeeded >= 1 and res.attempted == 8
    assert np.all(np.abs(res.data.X.sum(axis=1)) <= 0.05 + 1e-12)
    e = shap.explain(SumModel(), X[0], res.data)
    assert abs(e.phi0[0]) <= 0.05


def test_counterfactual_background_identity_row():
    X = np.array([[0.25, -0.25], [0.9, 0.9]])
    data = Dataset(X, FeatureDomain.numeric(["a", "b"], [-1, -1], [1, 1]))
    res = shap.background_counterfactual(SumModel(), data, [0.0], s=1, n=1, tolerance=0.05, noise_ratio=1e-6)
    assert abs(res.data.X.sum()) <= 0.05


class Unreachable:
    n_outputs = 1
    output_names = ("y",)

    def predict(self, X):
        return np.ones((len(X), 1))


def test_counterfactual_background_failure():
    data = Dataset(np.zeros((3, 2)), FeatureDomain.numeric(["a", "b"], [-1, -1], [1, 1]))
    from xaikit.counterfactual import SolverConfig

    with pytest.raises(XaiError, match="no background generated"):
        shap.background_counterfactual(Unreachable(), data, [5.0], 1, 1, 0.01, solver=SolverConfig(max_iterations=200))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_local_accuracy_property(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 7))
    model = FixedMlpModel.random([m, 4, 1], rng)
    x = rng.normal(size=m)
    e = shap.explain(model, x, rng.normal(size=(int(rng.integers(1, 6)), m)))
    assert abs(e.local_accuracy_gap()[0]) < 1e-6
    assert abs(e.phi0[0] + e.phi[0].sum() - predict_array(model, x[None])[0, 0]) < 1e-6
