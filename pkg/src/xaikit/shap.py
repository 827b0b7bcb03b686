"""Kernel SHAP with pluggable background generation.

The null output is the mean model output over the background. Coalition
values are estimated by replacing excluded features with background values
and averaging. Attributions solve the kernel-weighted least squares problem
with local accuracy imposed exactly by eliminating the last attribution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import lime
from .model_api import Dataset, FeatureDomain, XaiError, predict_array

EXHAUSTIVE_CAP = 12


def shap_kernel(m: int, size: int) -> float:
    """Shapley kernel weight (M-1) / (C(M, |z|) |z| (M - |z|))."""
    if size <= 0 or size >= m:
        raise XaiError("infinite weight; handle analytically")
    return (m - 1) / (comb(m, size) * size * (m - size))


def synthesize(x, mask, background) -> np.ndarray:
    """One row per background row: ``x`` where mask is 1, background elsewhere."""
    B = np.atleast_2d(np.asarray(background, dtype=float))
    mask = np.asarray(mask, dtype=bool)
    out = B.copy()
    out[:, mask] = np.asarray(x, dtype=float)[mask]
    return out


def coalition_values(model, x, masks, background, batch_rows=200_000) -> np.ndarray:
    """Mean model output over synthesized rows, per mask: shape (n_masks, n_outputs)."""
    B = np.atleast_2d(np.asarray(background, dtype=float))
    masks = np.asarray(masks, dtype=bool)
    n_b = len(B)
    per_batch = max(1, batch_rows // n_b)
    values = []
    for start in range(0, len(masks), per_batch):
        chunk = masks[start:start + per_batch]
        rows = np.where(chunk[:, None, :], np.asarray(x, dtype=float), B[None, :, :])
        y = predict_array(model, rows.reshape(-1, B.shape[1]))
        values.append(y.reshape(len(chunk), n_b, -1).mean(axis=1))
    if not values:
        return np.empty((0, model.n_outputs))
    return np.vstack(values)


@dataclass
class ShapExplanation:
    phi: np.ndarray  # (n_outputs, M)
    phi0: np.ndarray  # (n_outputs,)
    fx: np.ndarray  # (n_outputs,)
    feature_names: tuple
    output_names: tuple
    n_coalitions: int = 0
    exhaustive: bool = True

    def local_accuracy_gap(self) -> np.ndarray:
        return self.phi0 + self.phi.sum(axis=1) - self.fx

    def to_dict(self) -> dict:
        return {
            "exhaustive": bool(self.exhaustive),
            "coalitions": int(self.n_coalitions),
            "outputs": [
                {
                    "output": name,
                    "null_output": float(self.phi0[k]),
                    "prediction": float(self.fx[k]),
                    "features": [
                        {"name": f, "phi": float(self.phi[k, j])} for j, f in enumerate(self.feature_names)
                    ],
                }
                for k, name in enumerate(self.output_names)
            ],
        }


def enumerate_coalitions(m: int) -> tuple[np.ndarray, np.ndarray]:
    """All 2^M - 2 proper coalitions with their kernel weights."""
    codes = np.arange(1, 2 ** m - 1)
    masks = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    sizes = masks.sum(axis=1)
    table = np.array([0.0] + [shap_kernel(m, s) for s in range(1, m)] + [0.0])
    return masks, table[sizes]


def sample_coalitions(m: int, n_samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Kernel-proportional coalition sample without repeated masks.

    Sizes are visited in complementary pairs from the outside in; a pair is
    enumerated completely while the remaining budget covers it, the rest of the
    budget is drawn at random with probability proportional to kernel mass.
    Returned weights sum to 1.
    """
    sizes = list(range(1, m))
    mass = np.array([(m - 1) / (s * (m - s)) for s in sizes])
    mass /= mass.sum()
    masks, weights = [], []
    budget = n_samples
    remaining_mass = 1.0
    n_pairs = (m - 1 + 1) // 2
    done_sizes = set()
    for p in range(1, n_pairs + 1):
        pair = {p, m - p}
        count = sum(comb(m, s) for s in pair)
        if count > budget:
            break
        for s in sorted(pair):
            w = mass[s - 1] / comb(m, s)
            for idx in itertools.combinations(range(m), s):
                z = np.zeros(m, dtype=bool)
                z[list(idx)] = True
                masks.append(z)
                weights.append(w)
            remaining_mass -= mass[s - 1]
            done_sizes.add(s)
        budget -= count
    left = [s for s in sizes if s not in done_sizes]
    if left and budget > 0:
        p_size = np.array([mass[s - 1] for s in left])
        p_size /= p_size.sum()
        seen = set()
        drawn = []
        attempts = 0
        while len(drawn) < budget and attempts < 50 * budget:
            attempts += 1
            s = left[rng.choice(len(left), p=p_size)]
            idx = rng.choice(m, size=s, replace=False)
            key = int(np.sum(1 << idx.astype(np.int64)))
            if key in seen:
                continue
            seen.add(key)
            z = np.zeros(m, dtype=bool)
            z[idx] = True
            drawn.append(z)
        for z in drawn:
            masks.append(z)
            weights.append(remaining_mass / len(drawn))
    return np.array(masks), np.array(weights)


def solve_constrained(masks, weights, values, phi0, fx) -> np.ndarray:
    """Kernel-weighted least squares with sum(phi) = fx - phi0, per output."""
    masks = np.asarray(masks, dtype=float)
    m = masks.shape[1]
    total = fx - phi0  # (n_out,)
    if m == 1:
        return total[:, None].copy()
    # eliminate the last attribution: phi_last = total - sum(phi_rest)
    A = masks[:, :-1] - masks[:, -1:]
    b = values - phi0[None, :] - masks[:, -1:] * total[None, :]
    root = np.sqrt(weights)[:, None]
    rest = np.linalg.lstsq(A * root, b * root, rcond=None)[0]  # (m-1, n_out)
    last = total - rest.sum(axis=0)
    return np.vstack([rest, last[None, :]]).T


def explain(
    model,
    x,
    background,
    n_samples: int | None = None,
    seed: int = 0,
    exhaustive_cap: int = EXHAUSTIVE_CAP,
    feature_names=None,
) -> ShapExplanation:
    x = np.asarray(x, dtype=float).ravel()
    B = background.X if isinstance(background, Dataset) else np.atleast_2d(np.asarray(background, dtype=float))
    if B.shape[0] == 0:
        raise XaiError("empty background")
    m = len(x)
    if B.shape[1] != m:
        raise XaiError(f"background has {B.shape[1]} features, input has {m}")
    if feature_names is None:
        feature_names = background.schema.names if isinstance(background, Dataset) else tuple(f"x{j}" for j in range(m))
    fx = predict_array(model, x[None, :])[0]
    phi0 = predict_array(model, B).mean(axis=0)
    exhaustive = m <= exhaustive_cap
    if m == 1:
        masks, weights = np.zeros((0, 1), dtype=bool), np.zeros(0)
    elif exhaustive or (n_samples is not None and n_samples >= 2 ** m - 2):
        masks, weights = enumerate_coalitions(m)
        exhaustive = True
    else:
        n_samples = 2 * m + 2048 if n_samples is None else n_samples
        if n_samples < m:
            raise XaiError("underdetermined")
        masks, weights = sample_coalitions(m, n_samples, np.random.default_rng(seed))
    values = coalition_values(model, x, masks, B) if len(masks) else np.empty((0, len(fx)))
    phi = solve_constrained(masks, weights, values, phi0, fx)
    return ShapExplanation(phi, phi0, fx, tuple(feature_names), tuple(model.output_names), len(masks), exhaustive)


# -- background strategies ---------------------------------------------------


def background_random(data: Dataset, size: int, seed: int = 0) -> Dataset:
    """Uniform sample of ``size`` rows without replacement."""
    if size < 1 or size > len(data):
        raise XaiError(f"cannot sample {size} rows from {len(data)}")
    idx = np.sort(np.random.default_rng(seed).choice(len(data), size=size, replace=False))
    return data.subset(idx)


def kmeans_plus_plus(X, k, rng) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total == 0:
            i = rng.integers(n)
        else:
            i = rng.choice(n, p=d2 / total)
        centers.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(axis=1))
    return np.array(centers)


@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    sse_history: list = field(default_factory=list)
    iterations: int = 0


def kmeans(X, k, seed=0, max_iter=100, tol=1e-6) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; stops when no center moves more than ``tol``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not 1 <= k <= len(X):
        raise XaiError(f"k={k} must lie in [1, {len(X)}]")
    rng = np.random.default_rng(seed)
    centers = kmeans_plus_plus(X, k, rng)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), labels].sum()))
        new = centers.copy()
        for j in range(k):
            members = X[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = np.abs(new - centers).max()
        centers = new
        if shift < tol:
            break
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    history.append(float(d2[np.arange(len(X)), labels].sum()))
    return KMeansResult(centers, labels, history, it)


def background_kmeans(data: Dataset, k: int, seed: int = 0) -> Dataset:
    if not data.schema.all_numeric:
        raise XaiError("k-means backgrounds need numeric features; use a random or explicit background")
    return Dataset(kmeans(data.X, k, seed).centers, data.schema)


@dataclass
class CounterfactualBackground:
    data: Dataset
    attempted: int
    succeeded: int

    @property
    def success_fraction(self) -> float:
        return self.succeeded / self.attempted if self.attempted else 0.0


def background_counterfactual(
    model,
    data: Dataset,
    reference,
    s: int,
    n: int,
    tolerance: float,
    domain: FeatureDomain | None = None,
    solver=None,
    seed: int = 0,
    noise_ratio: float = 0.01,
) -> CounterfactualBackground:
    """Background of counterfactuals whose outputs sit within ``tolerance`` of ``reference``.

    The ``s`` rows with outputs nearest the reference seed the search; each
    seed is perturbed once per counterfactual before searching from it.
    """
    from . import counterfactual as cf

    if s * n < 1:
        raise XaiError("s * n must be at least 1")
    reference = np.atleast_1d(np.asarray(reference, dtype=float))
    domain = data.schema if domain is None else domain
    if not all(f.finite_bounds for f in domain if f.is_numeric):
        domain = FeatureDomain.from_data(data.schema.names, data.X)
    solver = cf.SolverConfig() if solver is None else solver
    Y = predict_array(model, data.X)
    order = np.argsort(np.linalg.norm(Y - reference, axis=1), kind="stable")[:s]
    goal = cf.CfGoal(reference, tolerance=tolerance)
    rng = np.random.default_rng(seed)
    rows = []
    attempted = 0
    for i in order:
        starts = lime.perturb(data.X[i], n, 1, domain, rng, noise_ratio)
        for start in starts:
            attempted += 1
            cfg = solver.with_seed(int(rng.integers(2 ** 31)))
            result = cf.search(model, start, domain, goal, cfg)
            if result.valid:
                rows.append(result.x_cf)
    if not rows:
        raise XaiError("no background generated")
    return CounterfactualBackground(Dataset(np.array(rows), data.schema), attempted, len(rows))
