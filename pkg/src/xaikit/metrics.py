"""Evaluation metrics for attributions and counterfactuals."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model_api import Dataset, FeatureDomain, XaiError, has_confidence, is_classifier, mad_per_feature, predict_array
from .models import LinearModel, retrain_without_feature
from .shap import coalition_values

SHAPLEY_CAP = 10


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    n: int = 1
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise XaiError(f"metric {self.name} is not finite")

    def to_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "n": int(self.n), "config": dict(self.config)}


def _rows(data) -> np.ndarray:
    if data is None:
        raise XaiError("this estimator needs data")
    return data.X if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))


@dataclass(frozen=True)
class MarginalEstimator:
    """How the contribution c_i of feature i at x is estimated.

    ``exclusion`` replaces feature i and measures the output drop:
    ``replacement="rows"`` averages over every data row's value,
    ``"mean"`` uses the column mean and ``"midpoint"`` the domain midpoint.
    ``retrain`` compares against a model refit without feature i.
    """

    mode: str = "exclusion"
    replacement: str = "rows"

    def __post_init__(self):
        if self.mode not in ("exclusion", "retrain"):
            raise XaiError(f"unknown estimator mode {self.mode!r}")
        if self.replacement not in ("rows", "mean", "midpoint"):
            raise XaiError(f"unknown replacement {self.replacement!r}")


def marginal_contributions(
    model, x, data=None, estimator: MarginalEstimator | None = None, domain: FeatureDomain | None = None,
    labels=None, output_index: int = 0,
) -> np.ndarray:
    est = MarginalEstimator() if estimator is None else estimator
    x = np.asarray(x, dtype=float).ravel()
    m = len(x)
    fx = predict_array(model, x[None, :])[0, output_index]
    if est.mode == "retrain":
        return roar_contributions(model, _rows(data), labels, x)
    if est.replacement == "rows":
        X = _rows(data)
        c = np.empty(m)
        for i in range(m):
            Z = np.repeat(x[None, :], len(X), axis=0)
            Z[:, i] = X[:, i]
            c[i] = fx - predict_array(model, Z)[:, output_index].mean()
        return c
    if est.replacement == "mean":
        base = _rows(data).mean(axis=0)
    else:
        if domain is None:
            raise XaiError("midpoint replacement needs a domain")
        base = domain.midpoints()
    Z = np.repeat(x[None, :], m, axis=0)
    Z[np.arange(m), np.arange(m)] = base
    return fx - predict_array(model, Z)[:, output_index]


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) != len(b):
        raise XaiError("vectors differ in length")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise XaiError("undefined correlation")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def faithfulness_from(w, c) -> float:
    if len(np.ravel(w)) < 2:
        raise XaiError("faithfulness needs at least two features")
    return pearson(w, c)


def monotonicity_from(w, c) -> float:
    """Fraction of adjacent pairs, in descending-w order, with strictly decreasing c."""
    w = np.asarray(w, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if len(w) < 2:
        raise XaiError("monotonicity needs at least two features")
    order = np.argsort(-w, kind="stable")
    cs = c[order]
    return float(np.mean(cs[:-1] > cs[1:]))


def faithfulness(w, model, x, estimator=None, data=None, **kw) -> float:
    return faithfulness_from(w, marginal_contributions(model, x, data, estimator, **kw))


def monotonicity(w, model, x, estimator=None, data=None, **kw) -> float:
    return monotonicity_from(w, marginal_contributions(model, x, data, estimator, **kw))


def roar_contributions(model: LinearModel, data, labels, x) -> np.ndarray:
    """c_i = f(x) - f*_i(x) with f*_i refit on (data, labels) without feature i."""
    X = _rows(data)
    if labels is None:
        raise XaiError("retraining needs labels")
    x = np.asarray(x, dtype=float).ravel()
    fx = predict_array(model, x[None, :])[0, 0]
    return np.array(
        [fx - predict_array(retrain_without_feature(model, X, labels, i), x[None, :])[0, 0] for i in range(X.shape[1])]
    )


def roar_variants(w, model: LinearModel, data, labels, x) -> tuple[float, float]:
    c = roar_contributions(model, data, labels, x)
    return faithfulness_from(w, c), monotonicity_from(w, c)


def ground_truth_shapley(model, x, background, output_index: int = 0, cap: int = SHAPLEY_CAP) -> np.ndarray:
    """Exact Shapley values by walking every feature ordering.

    Excluded features take background values and the coalition value is the
    mean output over the background. Coalition values are computed once and
    looked up by bitmask while orderings are enumerated.
    """
    x = np.asarray(x, dtype=float).ravel()
    m = len(x)
    if m > cap:
        raise XaiError(f"{m} features is too many for exact enumeration; use sampling explainer")
    B = background.X if isinstance(background, Dataset) else np.atleast_2d(np.asarray(background, dtype=float))
    codes = np.arange(2 ** m)
    masks = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    v = coalition_values(model, x, masks, B)[:, output_index]
    total = np.zeros(m)
    count = 0
    chunk = 20_000
    perms = itertools.permutations(range(m))
    bits = 1 << np.arange(m)
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.int64).reshape(-1, m)
        if len(block) == 0:
            break
        after = np.cumsum(bits[block], axis=1)
        before = after - bits[block]
        gains = v[after] - v[before]
        np.add.at(total, block.ravel(), gains.ravel())
        count += len(block)
    return total / count


def shapley_correlation(w, exact) -> float:
    return pearson(w, exact)


def shapley_mse(w, exact) -> float:
    w = np.asarray(w, dtype=float).ravel()
    exact = np.asarray(exact, dtype=float).ravel()
    return float(np.mean((w - exact) ** 2))


def infidelity(w, model, x, noise_scale=0.1, n_perturbations=100, seed=0, ranges=None, output_index=0) -> float:
    """Mean of ((dx . w) - (f(x) - f(x - dx)))^2 over Gaussian dx."""
    w = np.asarray(w, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    ranges = np.ones_like(x) if ranges is None else np.asarray(ranges, dtype=float)
    rng = np.random.default_rng(seed)
    dx = rng.normal(size=(n_perturbations, len(x))) * (noise_scale * ranges)
    fx = predict_array(model, x[None, :])[0, output_index]
    f_pert = predict_array(model, x - dx)[:, output_index]
    return float(np.mean((dx @ w - (fx - f_pert)) ** 2))


def _score_of(model, X, labels, output_index):
    """Score z per row: confidence of ``labels`` for classifiers, raw output otherwise."""
    Y = predict_array(model, X)[:, output_index]
    if not is_classifier(model):
        return Y, Y
    if has_confidence(model):
        conf = np.asarray(model.confidence(X), dtype=float).reshape(len(X), -1)[:, output_index]
        z = np.where(Y == labels, conf, 1.0 - conf)
    else:
        z = (Y == labels).astype(float)
    return Y, z


def impact_indicators(W, model, X, k: int, replacement, output_index: int = 0) -> np.ndarray:
    """Per input: 1 when removing its top-k attributed features flips the label or halves the score."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    replacement = np.asarray(replacement, dtype=float)
    m = X.shape[1]
    if not 1 <= k <= m:
        raise XaiError(f"k={k} must lie in [1, {m}]")
    top = np.argsort(-np.abs(W), axis=1, kind="stable")[:, :k]
    Z = X.copy()
    rows = np.arange(len(X))[:, None]
    Z[rows, top] = replacement[top]
    if is_classifier(model):
        y, z = _score_of(model, X, predict_array(model, X)[:, output_index], output_index)
        y2, z2 = _score_of(model, Z, y, output_index)
        return ((y2 != y) | (z2 <= 0.5 * z)).astype(float)
    _, z = _score_of(model, X, None, output_index)
    _, z2 = _score_of(model, Z, None, output_index)
    return (z2 <= 0.5 * z).astype(float)


def impact_score(W, model, X, k: int, replacement, output_index: int = 0) -> float:
    return float(impact_indicators(W, model, X, k, replacement, output_index).mean())


def top_k_set(w, k) -> frozenset:
    return frozenset(np.argsort(-np.abs(np.asarray(w, dtype=float)), kind="stable")[:k].tolist())


def stability_from(W, top_k: int, band: float = 0.1) -> tuple[float, float]:
    """(VSI, CSI) of a run-by-feature coefficient matrix.

    VSI is the mean pairwise Jaccard similarity of the top-k feature sets.
    CSI averages, over features, the fraction of run pairs whose coefficients
    differ by at most ``band`` times that feature's range across runs; a
    feature with zero range agrees everywhere.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    r = len(W)
    if r < 2:
        raise XaiError("stability needs at least two runs")
    sets = [top_k_set(w, top_k) for w in W]
    pairs = list(itertools.combinations(range(r), 2))
    vsi = np.mean([len(sets[a] & sets[b]) / len(sets[a] | sets[b]) for a, b in pairs])
    spread = W.max(axis=0) - W.min(axis=0)
    i, j = np.array(pairs).T
    agree = np.abs(W[i] - W[j]) <= band * spread
    csi = agree.mean(axis=0).mean()
    return float(vsi), float(csi)


def stability_indices(explainer, runs: int, top_k: int, seed: int = 0, band: float = 0.1) -> tuple[float, float]:
    """Run ``explainer(seed)`` for seeds seed, seed+1, ... and score the agreement."""
    W = np.array([np.asarray(explainer(seed + r), dtype=float).ravel() for r in range(runs)])
    return stability_from(W, top_k, band)


def _pairs(pairs):
    pairs = list(pairs)
    if not pairs:
        raise XaiError("at least one (x, x') pair is required")
    A = np.array([np.asarray(p[0], dtype=float).ravel() for p in pairs])
    B = np.array([np.asarray(p[1], dtype=float).ravel() for p in pairs])
    return A, B


def cf_proximity(pairs, data=None, mad=None) -> float:
    """Negative mean MAD-scaled L1 distance per feature; 0 when nothing changed."""
    A, B = _pairs(pairs)
    if mad is None:
        mad = np.ones(A.shape[1]) if data is None else mad_per_feature(data)
    return float(-np.mean(np.abs(A - B) / mad))


def cf_sparsity(pairs, tol: float = 1e-9) -> float:
    A, B = _pairs(pairs)
    return float(1.0 - np.mean(np.abs(A - B) > tol))
