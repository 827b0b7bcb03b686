"""LIME without training data.

Samples are drawn around the explained point with Gaussian noise scaled to
each value, encoded to binary "still close to x" vectors through a kernel
threshold, filtered by proximity and fit with a proximity-weighted linear
model. Feature weights are finally shrunk by a class-balance penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model_api import FeatureDomain, XaiError, is_classifier, predict_array

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class LimeConfig:
    samples: int = 300
    min_perturbed: int = 1
    balance_tau: float = 0.01
    balance_rho: float = 10.0
    proximity_kappa: float = 0.8
    separability_threshold: float = 0.1
    noise_ratio: float = 0.01
    max_variance_rounds: int = 6
    encoding_width: float = 0.3
    kernel_width: float = 3.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.samples < 1 or self.min_perturbed < 1 or self.max_variance_rounds < 0:
            raise XaiError("samples and min_perturbed must be positive")
        if not 0.0 <= self.proximity_kappa <= 1.0:
            raise XaiError("proximity_kappa must lie in [0, 1]")
        if min(self.balance_tau, self.balance_rho, self.noise_ratio, self.encoding_width, self.kernel_width) <= 0:
            raise XaiError("balance, noise and width parameters must be positive")


def perturb(x, count, min_perturbed, domain: FeatureDomain, rng, noise_ratio=0.01) -> np.ndarray:
    """Draw ``count`` perturbed copies of the encoded point ``x``.

    Each copy perturbs a uniformly chosen subset of exactly ``min_perturbed``
    features. Numeric values get Normal(v, noise_ratio*|v|) noise (absolute
    ``noise_ratio`` when v == 0) clamped to the domain; categorical values
    switch to a different symbol.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    if count < 1:
        raise XaiError("count must be positive")
    if not 1 <= min_perturbed <= m:
        raise XaiError(f"min_perturbed={min_perturbed} must lie in [1, {m}]")
    ranks = np.argsort(rng.random((count, m)), axis=1).argsort(axis=1)
    chosen = ranks < min_perturbed

    out = np.tile(x, (count, 1))
    sigma = np.where(x == 0, noise_ratio, noise_ratio * np.abs(x))
    noise = rng.standard_normal((count, m)) * sigma
    for j, feat in enumerate(domain):
        if feat.is_numeric:
            out[chosen[:, j], j] = x[j] + noise[chosen[:, j], j]
        else:
            n_cat = len(feat.categories)
            if n_cat < 2:
                continue
            # shift by 1..n_cat-1 positions so the current symbol is never drawn
            shift = rng.integers(1, n_cat, size=count)
            out[chosen[:, j], j] = (x[j] + shift[chosen[:, j]]) % n_cat
    return domain.clip(out)


def _scaled_columns(x, samples, domain):
    stack = np.vstack([x[None, :], samples])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    xs = (x - mean) / safe
    ss = (samples - mean) / safe
    ss[:, std == 0] = xs[std == 0]
    return xs, ss


def encode(x, samples, domain: FeatureDomain, width=0.3) -> np.ndarray:
    """Binary closeness encoding of samples relative to ``x``.

    Numeric columns are standard-scaled together with ``x``; a bit is 1 when
    the unit Gaussian kernel centred on the scaled ``x`` stays within
    ``theta * (1 - exp(-width**2 / 2))`` of its peak ``theta``, i.e. when the
    sample lies within ``width`` scaled deviations. Categorical bits are 1 on
    equality.
    """
    x = np.asarray(x, dtype=float)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise XaiError("no samples to encode")
    xs, ss = _scaled_columns(x, samples, domain)
    theta = 1.0 / _SQRT_2PI
    phi = np.exp(-0.5 * (ss - xs) ** 2) / _SQRT_2PI
    cutoff = theta * -math.expm1(-0.5 * width * width)
    bits = np.abs(phi - theta) <= cutoff * (1 + 1e-12)
    cat = ~domain.numeric_mask
    if cat.any():
        bits[:, cat] = samples[:, cat] == x[cat]
    return bits.astype(np.int8)


def proximity(x, samples, domain: FeatureDomain, width=1.0) -> np.ndarray:
    """exp(-||x~ - s~||^2 / (M * width^2)) over standard-scaled features.

    Categorical mismatches contribute 1 to the squared distance.
    """
    x = np.asarray(x, dtype=float)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    xs, ss = _scaled_columns(x, samples, domain)
    sq = (ss - xs) ** 2
    cat = ~domain.numeric_mask
    if cat.any():
        sq[:, cat] = (samples[:, cat] != x[cat]).astype(float)
    return np.exp(-sq.sum(axis=1) / (len(x) * width * width))


def preservation(model, y_samples, y_x) -> np.ndarray:
    """How well each sample keeps the explained prediction, in [0, 1].

    Classifiers score 1 on an unchanged label and 0 otherwise. Regression
    outputs score ``exp(-dev^2 / (2 s^2))`` where ``dev`` is the deviation from
    the explained output and ``s`` its median over the samples.
    """
    y_samples = np.asarray(y_samples, dtype=float)
    if is_classifier(model):
        return (y_samples == y_x).astype(float)
    dev = np.abs(y_samples - y_x)
    s = np.median(dev)
    if s == 0:
        return (dev == 0).astype(float)
    return np.exp(-0.5 * (dev / s) ** 2)


def binary_target(preserved) -> np.ndarray:
    """Binarized preservation: 1 iff within one median deviation (or same label)."""
    return (np.asarray(preserved) >= math.exp(-0.5) * (1 - 1e-12)).astype(np.int8)


@dataclass
class LimeSamples:
    X: np.ndarray
    encoded: np.ndarray
    outputs: np.ndarray
    preserved: np.ndarray
    targets: np.ndarray
    proximity: np.ndarray
    rounds: int
    min_perturbed: int
    class_balance: float
    separable: bool
    sizes: list = field(default_factory=list)

    @property
    def nonseparable(self) -> bool:
        return not self.separable


def adaptive_sample(model, x, config: LimeConfig, domain: FeatureDomain, output_index=0, rng=None) -> LimeSamples:
    """Sample until the predictions are not dominated by one class.

    Each failed round raises the minimum number of perturbed features by one
    (capped at M-1) and doubles the sample count.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    rng = np.random.default_rng(config.rng_seed) if rng is None else rng
    y_x = predict_array(model, x[None, :])[0, output_index]
    cap = max(1, m - 1)
    z, omega = config.samples, min(config.min_perturbed, m)
    lo, hi = config.separability_threshold, 1.0 - config.separability_threshold
    sizes = []
    for round_no in range(config.max_variance_rounds + 1):
        X = perturb(x, z, omega, domain, rng, config.noise_ratio)
        y = predict_array(model, X)[:, output_index]
        preserved = preservation(model, y, y_x)
        targets = binary_target(preserved)
        beta = float(targets.mean())
        sizes.append(z)
        separable = lo < beta < hi
        if separable or round_no == config.max_variance_rounds:
            break
        omega = min(omega + 1, cap) if omega < cap else omega
        z *= 2
    return LimeSamples(
        X=X,
        encoded=encode(x, X, domain, config.encoding_width),
        outputs=y,
        preserved=preserved,
        targets=targets,
        proximity=proximity(x, X, domain, config.kernel_width),
        rounds=round_no,
        min_perturbed=omega,
        class_balance=beta,
        separable=separable,
        sizes=sizes,
    )


def proximity_filter(prox, kappa, min_keep) -> tuple[np.ndarray, bool]:
    """Indices with proximity >= kappa, or the ``min_keep`` closest if too few survive.

    Returns the kept indices (ascending) and whether the fallback was used.
    """
    prox = np.asarray(prox, dtype=float)
    keep = np.flatnonzero(prox >= kappa)
    if len(keep) >= min_keep:
        return keep, False
    order = np.argsort(-prox, kind="stable")[:min_keep]
    return np.sort(order), True


def balance_penalty(encoded, targets, tau=0.01, rho=10.0, n_features=None) -> np.ndarray:
    """Per-feature shrink factor tanh(tau + d0 + d1 + M/rho).

    ``d_o`` is the distance from 0.5 of the fraction of the dataset that has
    the feature's bit set and output ``o``. Without both output classes the
    maximal distance (d0 + d1 = 1) is used.
    """
    E = np.atleast_2d(np.asarray(encoded, dtype=float))
    o = np.asarray(targets).ravel()
    m = E.shape[1] if n_features is None else n_features
    if not ((o == 0).any() and (o == 1).any()):
        return np.full(E.shape[1], math.tanh(tau + 1.0 + m / rho))
    n = len(E)
    b0 = E[o == 0].sum(axis=0) / n
    b1 = E[o == 1].sum(axis=0) / n
    return np.tanh(tau + np.abs(0.5 - b0) + np.abs(0.5 - b1) + m / rho)


def weighted_linear_fit(E, y, w) -> tuple[np.ndarray, float]:
    """Weighted least squares with intercept; constant columns get weight 0."""
    E = np.asarray(E, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    sw = w / w.sum()
    e_bar = sw @ E
    y_bar = float(sw @ y)
    root = np.sqrt(sw)[:, None]
    Ec = (E - e_bar) * root
    yc = (y - y_bar) * root[:, 0]
    coef = np.zeros(E.shape[1])
    live = np.abs(Ec).max(axis=0) > 0
    if live.any() and np.abs(yc).max() > 0:
        coef[live] = np.linalg.lstsq(Ec[:, live], yc, rcond=None)[0]
    return coef, y_bar - float(e_bar @ coef)


@dataclass
class Saliency:
    feature_names: tuple
    weights: np.ndarray
    penalties: np.ndarray
    saliency: np.ndarray
    output_name: str
    intercept: float = 0.0
    nonseparable: bool = False
    fallback: bool = False
    n_samples: int = 0
    n_fit: int = 0
    rounds: int = 0

    def ranking(self) -> list[int]:
        """Feature indices by decreasing |w'|, ties by index."""
        return sorted(range(len(self.saliency)), key=lambda i: (-abs(self.saliency[i]), i))

    def to_dict(self) -> dict:
        rank = {j: r + 1 for r, j in enumerate(self.ranking())}
        return {
            "output": self.output_name,
            "intercept": float(self.intercept),
            "nonseparable": bool(self.nonseparable),
            "proximity_fallback": bool(self.fallback),
            "samples": int(self.n_samples),
            "fit_samples": int(self.n_fit),
            "variance_rounds": int(self.rounds),
            "features": [
                {
                    "name": name,
                    "w": float(self.weights[j]),
                    "eta": float(self.penalties[j]),
                    "w_prime": float(self.saliency[j]),
                    "rank": rank[j],
                }
                for j, name in enumerate(self.feature_names)
            ],
        }


def explain(model, x, config: LimeConfig | None = None, domain: FeatureDomain | None = None, output_index=0) -> Saliency:
    config = LimeConfig() if config is None else config
    x = np.asarray(x, dtype=float)
    m = len(x)
    if domain is None:
        domain = FeatureDomain.numeric([f"x{j}" for j in range(m)])
    if len(domain) != m:
        raise XaiError("domain and input differ in length")
    samples = adaptive_sample(model, x, config, domain, output_index)
    keep, fallback = proximity_filter(samples.proximity, config.proximity_kappa, m + 1)
    if len(keep) < m + 1:
        raise XaiError("insufficient samples")
    E, o, prox = samples.encoded[keep], samples.targets[keep], samples.proximity[keep]
    w, intercept = weighted_linear_fit(E, samples.preserved[keep], prox)
    eta = balance_penalty(E, o, config.balance_tau, config.balance_rho, m)
    return Saliency(
        feature_names=domain.names,
        weights=w,
        penalties=eta,
        saliency=w * eta,
        output_name=model.output_names[output_index],
        intercept=intercept,
        nonseparable=samples.nonseparable,
        fallback=fallback,
        n_samples=len(samples.X),
        n_fit=len(keep),
        rounds=samples.rounds,
    )
