"""Deterministic reference models used as explanation targets and oracles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model_api import Dataset, FeatureDomain, XaiError

LEAKY_SLOPE = 0.01


class SumModel:
    """f(x) = sum of the features."""

    n_outputs = 1
    output_names = ("sum",)
    is_classifier = False

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X.sum(axis=1, keepdims=True)

    def to_spec(self):
        return "sum"


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LinearModel:
    """f(x) = bias + w.x, optionally passed through a logistic link.

    With ``link="logistic"`` the model is a binary classifier: it emits the
    label ``1`` when ``bias + w.x >= 0`` and reports the probability of the
    emitted label as its confidence. :meth:`probability` gives P(label = 1).
    """

    def __init__(self, weights, bias=0.0, link=None, name="y"):
        self.weights = np.asarray(weights, dtype=float).ravel()
        self.bias = float(bias)
        if link not in (None, "logistic"):
            raise XaiError(f"unknown link {link!r}")
        self.link = link
        self.n_outputs = 1
        self.output_names = (name,)
        self.is_classifier = link == "logistic"
        if self.is_classifier:
            self.confidence = self._confidence
        self.weights.setflags(write=False)

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.weights + self.bias

    def predict(self, X):
        z = self.decision(X)
        if self.link is None:
            return z[:, None]
        return (z >= 0).astype(float)[:, None]

    def probability(self, X):
        return _sigmoid(self.decision(X))[:, None]

    def _confidence(self, X):
        p = self.probability(X)
        return np.maximum(p, 1.0 - p)

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": self.bias, "link": self.link}

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d.get("bias", 0.0), d.get("link"))


class CreditScorerModel:
    """Hand-authored credit approval rules over Age, Debt, YearsEmployed, Income.

    The approval log-odds add a piecewise-constant debt term to small linear
    terms in the other three features. Holding the others at
    ``x0 = (21, 3.5, 5, 100)`` the applicant is denied with confidence 0.6;
    approval is reached either by raising Debt to 4.0 (near, P = 0.55) or by
    lowering it below 0.7 (far, P = 0.90).
    """

    feature_names = ("Age", "Debt", "YearsEmployed", "Income")
    output_names = ("Approved",)
    n_outputs = 1
    is_classifier = True

    # (upper edge of the debt band, log-odds contribution)
    DEBT_BANDS = ((0.7, 2.0), (4.0, -0.6), (5.5, 0.0), (np.inf, -1.5))
    BASE = 0.2
    AGE_SLOPE, AGE_REF = 0.01, 21.0
    YEARS_SLOPE, YEARS_REF = 0.3, 5.0
    INCOME_SLOPE, INCOME_REF = 0.004, 100.0

    NEAR_CHANGE_POINT = 4.0
    FAR_CHANGE_POINT = 0.7

    @staticmethod
    def domain() -> FeatureDomain:
        return FeatureDomain.numeric(
            CreditScorerModel.feature_names, lower=[18.0, 0.0, 0.0, 0.0], upper=[80.0, 7.0, 30.0, 300.0]
        )

    def log_odds(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        age, debt, years, income = X.T
        edges = np.array([b[0] for b in self.DEBT_BANDS])
        terms = np.array([b[1] for b in self.DEBT_BANDS])
        debt_term = terms[np.searchsorted(edges, debt, side="right").clip(max=len(edges) - 1)]
        return (
            self.BASE
            + debt_term
            + self.AGE_SLOPE * (age - self.AGE_REF)
            + self.YEARS_SLOPE * (years - self.YEARS_REF)
            + self.INCOME_SLOPE * (income - self.INCOME_REF)
        )

    def probability(self, X):
        return _sigmoid(self.log_odds(X))[:, None]

    def predict(self, X):
        return (self.probability(X) >= 0.5).astype(float)

    def confidence(self, X):
        p = self.probability(X)
        return np.maximum(p, 1.0 - p)

    def to_spec(self):
        return "credit"


ACTIVATIONS = {
    "relu": lambda z: np.maximum(z, 0.0),
    "leaky_relu": lambda z: np.where(z > 0, z, LEAKY_SLOPE * z),
    "logistic": _sigmoid,
    "identity": lambda z: z,
}


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # shape (n_in, n_out)
    bias: np.ndarray
    activation: str


class FixedMlpModel:
    """Inference-only multilayer perceptron: ``h <- act(h @ W + b)`` per layer."""

    is_classifier = False

    def __init__(self, layers, output_names=None):
        self.layers = tuple(layers)
        if not self.layers:
            raise XaiError("an MLP needs at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise XaiError(f"layer {i}: unknown activation {layer.activation!r}")
            if layer.bias.shape != (layer.weights.shape[1],):
                raise XaiError(f"layer {i}: bias length {layer.bias.shape[0]} != {layer.weights.shape[1]} columns")
        for i in range(1, len(self.layers)):
            prev, cur = self.layers[i - 1].weights.shape, self.layers[i].weights.shape
            if prev[1] != cur[0]:
                raise XaiError(
                    f"dimension mismatch: layer {i - 1} is {prev[0]}x{prev[1]} but layer {i} is {cur[0]}x{cur[1]}"
                )
        self.n_inputs = self.layers[0].weights.shape[0]
        self.n_outputs = self.layers[-1].weights.shape[1]
        if output_names is None:
            output_names = tuple(f"y{j}" for j in range(self.n_outputs))
        self.output_names = tuple(output_names)

    def predict(self, X):
        h = np.atleast_2d(np.asarray(X, dtype=float))
        if h.shape[1] != self.n_inputs:
            raise XaiError(f"MLP expects {self.n_inputs} features, got {h.shape[1]}")
        for layer in self.layers:
            h = ACTIVATIONS[layer.activation](h @ layer.weights + layer.bias)
        return h

    def to_dict(self):
        return {
            "output_names": list(self.output_names),
            "layers": [
                {
                    "rows": int(l.weights.shape[0]),
                    "cols": int(l.weights.shape[1]),
                    "weights": l.weights.ravel().tolist(),
                    "bias": l.bias.tolist(),
                    "activation": l.activation,
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d):
        layers = []
        for i, spec in enumerate(d["layers"]):
            rows, cols = int(spec["rows"]), int(spec["cols"])
            w = np.asarray(spec["weights"], dtype=float)
            if w.size != rows * cols:
                raise XaiError(f"layer {i}: {w.size} weights for a {rows}x{cols} matrix")
            bias = np.asarray(spec.get("bias", [0.0] * cols), dtype=float)
            layers.append(Layer(w.reshape(rows, cols), bias, spec.get("activation", "relu")))
        return cls(layers, d.get("output_names"))

    @classmethod
    def random(cls, sizes, rng, activation="relu", output_activation="identity"):
        layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            act = output_activation if i == len(sizes) - 2 else activation
            layers.append(Layer(rng.normal(size=(a, b)) / np.sqrt(a), rng.normal(scale=0.1, size=b), act))
        return cls(layers)


def load_mlp(path) -> FixedMlpModel:
    with Path(path).open(encoding="utf-8") as fh:
        return FixedMlpModel.from_dict(json.load(fh))


def save_mlp(model: FixedMlpModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2), encoding="utf-8")


def fit_linear(X, y) -> tuple[np.ndarray, float]:
    """Closed-form least squares with intercept via the normal equations."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    A = np.hstack([X, np.ones((len(X), 1))])
    gram = A.T @ A
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise XaiError("degenerate design")
    coef = np.linalg.solve(gram, A.T @ y)
    return coef[:-1], float(coef[-1])


def retrain_without_feature(model: LinearModel, data: Dataset | np.ndarray, labels, excluded: int) -> LinearModel:
    """Refit a linear model on ``data`` with column ``excluded`` dropped (its weight fixed at 0)."""
    if not isinstance(model, LinearModel):
        raise XaiError("retraining is only supported for LinearModel")
    X = data.X if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    m = X.shape[1]
    if not 0 <= excluded < m:
        raise XaiError(f"feature index {excluded} out of range")
    keep = [j for j in range(m) if j != excluded]
    y = np.asarray(labels, dtype=float).ravel()
    if keep:
        w_keep, bias = fit_linear(X[:, keep], y)
    else:
        w_keep, bias = np.empty(0), float(y.mean())
    w = np.zeros(m)
    w[keep] = w_keep
    return LinearModel(w, bias, model.link, model.output_names[0])
