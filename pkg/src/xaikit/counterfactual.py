"""Counterfactual search with lexicographic hard/soft scoring and local search.

A candidate's hard score collects the goal distance, changed immutable
features and low-confidence outputs; it must be zero for the candidate to be
valid. The soft score trades L1 distance against the number of changed
features. Search starts from a first-fit construction and continues with
tabu search or hill climbing over single-feature moves.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .model_api import Dataset, FeatureDomain, XaiError, has_confidence, is_classifier, predict_array

CHANGE_TOL = 1e-9


@dataclass(frozen=True)
class CfGoal:
    """Desired outputs, per-output confidence thresholds and validity tolerance.

    A threshold of 1 switches the confidence penalty off for that output.
    ``tolerance=None`` means exact match for classifiers and 1e-3 of the
    output range for regressors (resolved by :func:`resolve_goal`).
    """

    target: np.ndarray
    thresholds: np.ndarray | None = None
    tolerance: float | None = None

    def __post_init__(self):
        target = np.atleast_1d(np.asarray(self.target, dtype=float))
        object.__setattr__(self, "target", target)
        thr = np.ones_like(target) if self.thresholds is None else np.atleast_1d(np.asarray(self.thresholds, dtype=float))
        if thr.shape != target.shape:
            raise XaiError("one confidence threshold per output is required")
        if ((thr < 0) | (thr > 1)).any():
            raise XaiError("confidence thresholds must lie in [0, 1]")
        object.__setattr__(self, "thresholds", thr)
        if self.tolerance is not None and self.tolerance < 0:
            raise XaiError("tolerance must be non-negative")


def resolve_goal(model, goal: CfGoal, domain: FeatureDomain, n_probe: int = 256, seed: int = 0) -> CfGoal:
    """Fill in a default tolerance when the goal leaves it open."""
    if goal.tolerance is not None:
        return goal
    if is_classifier(model):
        return dataclasses.replace(goal, tolerance=0.0)
    if not all(f.finite_bounds for f in domain if f.is_numeric):
        raise XaiError("a tolerance is required when the domain is unbounded")
    rng = np.random.default_rng(seed)
    probe = random_points(domain, n_probe, rng)
    Y = predict_array(model, probe)
    span = float((Y.max(axis=0) - Y.min(axis=0)).max())
    return dataclasses.replace(goal, tolerance=1e-3 * (span if span > 0 else 1.0))


def random_points(domain: FeatureDomain, n: int, rng) -> np.ndarray:
    out = np.empty((n, len(domain)))
    for j, f in enumerate(domain):
        if f.is_numeric:
            out[:, j] = rng.uniform(f.lower, f.upper, size=n)
        else:
            out[:, j] = rng.integers(len(f.categories), size=n)
    return out


@dataclass(frozen=True)
class CandidateScore:
    h1: float
    h2: float
    h3: float
    s1: float
    s2: float
    valid: bool
    w_dist: float = 1.0
    w_sparse: float = 1.0
    tolerance: float = 0.0

    @property
    def hard(self) -> float:
        return self.h1 + self.h2 + self.h3

    @property
    def soft(self) -> float:
        return -self.w_dist * self.s1 + self.w_sparse * self.s2

    @property
    def key(self) -> tuple[float, float]:
        """Comparison key; goal distances inside the tolerance count as zero."""
        h1 = 0.0 if -self.h1 <= self.tolerance ** 2 else self.h1
        return (h1 + self.h2 + self.h3, self.soft)

    def to_dict(self) -> dict:
        parts = {"hard": self.hard, "soft": self.soft, "H1": self.h1, "H2": self.h2, "H3": self.h3, "S1": self.s1, "S2": self.s2}
        out = {k: float(v) + 0.0 for k, v in parts.items()}  # + 0.0 turns -0.0 into 0.0
        out["valid"] = self.valid
        return out


@dataclass(frozen=True)
class SolverConfig:
    search: str = "tabu"
    tabu_tenure: int = 7
    max_iterations: int = 10_000
    construction_candidates: int = 20
    moves_per_step: int = 40
    numeric_step_fraction: float = 0.05
    stall_window: int = 2000
    w_dist: float = 1.0
    w_sparse: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.search not in ("tabu", "hill"):
            raise XaiError(f"unknown search {self.search!r}; use 'tabu' or 'hill'")
        ints = (self.tabu_tenure, self.max_iterations, self.construction_candidates, self.moves_per_step, self.stall_window)
        if min(ints) < 1 or self.numeric_step_fraction <= 0 or self.w_dist < 0 or self.w_sparse < 0:
            raise XaiError("solver settings must be positive")

    def with_seed(self, seed: int) -> "SolverConfig":
        return dataclasses.replace(self, rng_seed=int(seed))


class Scorer:
    """Vectorised scoring of candidates against one original point and goal."""

    def __init__(self, model, x, domain: FeatureDomain, goal: CfGoal, config: SolverConfig | None = None, data=None):
        config = SolverConfig() if config is None else config
        self.model = model
        self.x = np.asarray(x, dtype=float).ravel()
        self.domain = domain
        self.goal = resolve_goal(model, goal, domain)
        if len(self.goal.target) != model.n_outputs:
            raise XaiError(f"goal has {len(self.goal.target)} outputs, model has {model.n_outputs}")
        self.config = config
        self.numeric = domain.numeric_mask
        self.immutable = ~domain.mutable_mask
        self.scale = np.ones(len(domain))
        if data is not None:
            X = data.X if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
            mad = np.median(np.abs(X - np.median(X, axis=0)), axis=0)
            self.scale = np.where(self.numeric & (mad > 0), mad, 1.0)
        self.use_confidence = has_confidence(model) and bool((self.goal.thresholds < 1).any())
        self.evaluations = 0

    def changed(self, C) -> np.ndarray:
        return np.abs(np.atleast_2d(C) - self.x) > CHANGE_TOL

    def score_batch(self, C) -> list[CandidateScore]:
        C = np.atleast_2d(np.asarray(C, dtype=float))
        for row in C:
            if not self.domain.contains(row):
                raise XaiError(f"candidate outside the domain: {row.tolist()}")
        Y = predict_array(self.model, C)
        self.evaluations += len(C)
        h1 = -((Y - self.goal.target) ** 2).sum(axis=1)
        changed = self.changed(C)
        h2 = -(changed & self.immutable).sum(axis=1).astype(float)
        h3 = np.zeros(len(C))
        if self.use_confidence:
            conf = np.asarray(self.model.confidence(C), dtype=float).reshape(Y.shape)
            active = self.goal.thresholds < 1
            h3 = -((conf < self.goal.thresholds) & active).sum(axis=1).astype(float)
        diff = np.abs(C - self.x) / self.scale
        diff = np.where(self.numeric, diff, changed.astype(float))
        s1 = diff.sum(axis=1)
        s2 = -changed.sum(axis=1).astype(float)
        tol2 = self.goal.tolerance ** 2
        valid = (h2 == 0) & (h3 == 0) & (-h1 <= tol2)
        cfg = self.config
        return [
            CandidateScore(
                float(h1[i]), float(h2[i]), float(h3[i]), float(s1[i]), float(s2[i]), bool(valid[i]),
                cfg.w_dist, cfg.w_sparse, self.goal.tolerance,
            )
            for i in range(len(C))
        ]


def score(model, x, candidate, domain: FeatureDomain, goal: CfGoal, config: SolverConfig | None = None, data=None):
    return Scorer(model, x, domain, goal, config, data).score_batch(candidate)[0]


def construct(scorer: Scorer, rng) -> tuple[np.ndarray, CandidateScore]:
    """First fit: the original point and random single-feature resamples, best wins.

    Ties go to fewer changed features, then to generation order.
    """
    x = scorer.x
    first = scorer.score_batch(x)[0]
    if first.valid and first.key == (0.0, 0.0):
        return x.copy(), first
    mutable = np.flatnonzero(scorer.domain.mutable_mask)
    if len(mutable) == 0:
        return x.copy(), first
    cands = [x.copy()]
    for _ in range(scorer.config.construction_candidates):
        j = int(rng.choice(mutable))
        c = x.copy()
        c[j] = _resample(scorer.domain[j], x[j], rng)
        cands.append(c)
    scores = [first] + scorer.score_batch(np.array(cands[1:]))
    best = max(range(len(cands)), key=lambda i: (scores[i].key, scores[i].s2, -i))
    return cands[best], scores[best]


def _resample(feature, current, rng) -> float:
    if feature.is_numeric:
        return float(rng.uniform(feature.lower, feature.upper))
    k = len(feature.categories)
    if k == 1:
        return current
    return float((int(current) + rng.integers(1, k)) % k)


@dataclass(frozen=True)
class Move:
    feature: int
    kind: str  # nudge | swap | revert | jump | toward | exchange
    direction: int = 0

    @property
    def key(self) -> tuple:
        return (self.feature, self.kind, self.direction)


def move_keys(domain: FeatureDomain) -> list[tuple]:
    keys = []
    for j, f in enumerate(domain):
        if not f.mutable:
            continue
        if f.is_numeric:
            keys += [(j, "nudge", 1), (j, "nudge", -1), (j, "jump", 0), (j, "toward", 0)]
        else:
            keys += [(j, "swap", 0)]
        keys += [(j, "revert", 0), (j, "exchange", 0)]
    return keys


def neighborhood(current, x, domain: FeatureDomain, config: SolverConfig, rng) -> tuple[np.ndarray, list[Move]]:
    """Moves around ``current``; no-op moves are dropped.

    Besides single-feature moves, ``exchange`` reverts one changed feature and
    resamples another in the same step, which lets the search trade one
    changed feature for another without crossing an invalid candidate.
    """
    current = np.asarray(current, dtype=float)
    x = np.asarray(x, dtype=float)
    mutable = np.flatnonzero(domain.mutable_mask)
    if len(mutable) == 0:
        raise XaiError("nothing to search")
    ranges = domain.ranges()
    rows, moves = [], []
    for _ in range(config.moves_per_step):
        j = int(rng.choice(mutable))
        f = domain[j]
        changed = abs(current[j] - x[j]) > CHANGE_TOL
        others = [k for k in np.flatnonzero(np.abs(current - x) > CHANGE_TOL) if k != j]
        if f.is_numeric:
            kinds = ["nudge", "nudge", "jump"] + (["toward", "revert"] if changed else [])
        else:
            kinds = ["swap"] + (["revert"] if changed else [])
        if others:
            kinds.append("exchange")
        kind = kinds[int(rng.integers(len(kinds)))]
        c = current.copy()
        direction = 0
        if kind == "exchange":
            k = others[int(rng.integers(len(others)))]
            c[k] = x[k]
            c[j] = _resample(f, c[j], rng)
        elif kind == "nudge":
            direction = 1 if rng.random() < 0.5 else -1
            step = rng.random() * config.numeric_step_fraction * ranges[j]
            c[j] = min(max(c[j] + direction * step, f.lower), f.upper)
        elif kind == "jump" or kind == "swap":
            c[j] = _resample(f, c[j], rng)
        elif kind == "toward":
            c[j] = x[j] + rng.random() * (c[j] - x[j])
        else:
            c[j] = x[j]
        if np.abs(c - current).max() <= CHANGE_TOL:
            continue
        rows.append(c)
        moves.append(Move(j, kind, direction))
    if not rows:
        return np.empty((0, len(x))), []
    return np.array(rows), moves


@dataclass
class CfResult:
    x: np.ndarray
    x_cf: np.ndarray
    score: CandidateScore
    valid: bool
    iterations_used: int
    changed_features: list
    history: list = field(default_factory=list)

    def to_dict(self, domain: FeatureDomain | None = None) -> dict:
        def values(row):
            if domain is None:
                return [float(v) for v in row]
            return list(domain.decode(row).values)

        return {
            "x": values(self.x),
            "x_cf": values(self.x_cf),
            "score": self.score.to_dict(),
            "valid": self.valid,
            "changed_features": list(self.changed_features),
            "iterations": self.iterations_used,
        }


def search(model, x, domain: FeatureDomain, goal: CfGoal, config: SolverConfig | None = None, data=None) -> CfResult:
    """Construction followed by tabu search or hill climbing.

    The budget counts model evaluations. Search stops early once the best
    valid candidate's soft score has not improved for ``stall_window``
    evaluations. ``history`` records the best key after every step.
    """
    config = SolverConfig() if config is None else config
    x = np.asarray(x, dtype=float).ravel()
    if not domain.contains(x):
        raise XaiError("the original point lies outside the domain")
    rng = np.random.default_rng(config.rng_seed)
    scorer = Scorer(model, x, domain, goal, config, data)
    current, cur_score = construct(scorer, rng)
    best, best_score = current, cur_score
    history = [best_score.key]
    if (best_score.valid and best_score.key == (0.0, 0.0)) or not domain.mutable_mask.any():
        return _result(scorer, x, best, best_score, history)

    n_keys = len(move_keys(domain))
    tenure = max(1, min(config.tabu_tenure, n_keys // 2))
    tabu: dict[tuple, int] = {}
    step = 0
    last_improvement = scorer.evaluations
    while scorer.evaluations < config.max_iterations:
        step += 1
        room = config.max_iterations - scorer.evaluations
        cfg = config if room >= config.moves_per_step else dataclasses.replace(config, moves_per_step=room)
        rows, moves = neighborhood(current, x, domain, cfg, rng)
        if not moves:
            continue
        scores = scorer.score_batch(rows)
        order = sorted(range(len(moves)), key=lambda i: scores[i].key, reverse=True)
        if config.search == "tabu":
            pick = None
            for i in order:
                admissible = tabu.get(moves[i].key, 0) < step
                if admissible or scores[i].key > best_score.key:
                    pick = i
                    break
            if pick is None:
                pick = order[0]
            current, cur_score = rows[pick], scores[pick]
            tabu[moves[pick].key] = step + tenure
        else:
            i = order[0]
            if scores[i].key > cur_score.key:
                current, cur_score = rows[i], scores[i]
        if cur_score.key > best_score.key:
            if best_score.valid and cur_score.soft > best_score.soft or not best_score.valid:
                last_improvement = scorer.evaluations
            best, best_score = current, cur_score
        history.append(best_score.key)
        if best_score.valid and scorer.evaluations - last_improvement >= config.stall_window:
            break
    return _result(scorer, x, best, best_score, history)


def _result(scorer, x, best, best_score, history) -> CfResult:
    names = scorer.domain.names
    changed = [names[j] for j in np.flatnonzero(scorer.changed(best)[0])]
    return CfResult(x.copy(), np.array(best, dtype=float), best_score, best_score.valid, scorer.evaluations, changed, history)
