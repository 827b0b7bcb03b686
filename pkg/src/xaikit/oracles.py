"""Independent oracle checks shared by ``xaikit validate`` and the test suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import counterfactual as cf
from . import lime, metrics, shap
from .model_api import FeatureDomain, predict_array
from .models import CreditScorerModel, FixedMlpModel, LinearModel, SumModel


class SliceModel:
    """A model restricted to some features, the rest held at fixed values."""

    def __init__(self, model, base, free):
        self.model = model
        self.base = np.asarray(base, dtype=float)
        self.free = list(free)
        self.n_outputs = model.n_outputs
        self.output_names = model.output_names
        self.is_classifier = getattr(model, "is_classifier", False)
        if callable(getattr(model, "confidence", None)):
            self.confidence = lambda X: model.confidence(self._full(X))

    def _full(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        full = np.repeat(self.base[None, :], len(X), axis=0)
        full[:, self.free] = X
        return full

    def predict(self, X):
        return self.model.predict(self._full(X))


@dataclass
class GridProblem:
    name: str
    model: object
    x: np.ndarray
    domain: FeatureDomain
    goal: cf.CfGoal


def grid_problems() -> list[GridProblem]:
    """Five bounded two-feature counterfactual problems."""
    credit = CreditScorerModel()
    x0 = np.array([21.0, 3.5, 5.0, 100.0])
    mlp = FixedMlpModel.random([2, 6, 1], np.random.default_rng(11), activation="leaky_relu")
    box = FeatureDomain.numeric(["a", "b"], [0.0, 0.0], [10.0, 10.0])
    return [
        GridProblem(
            "logistic", LinearModel([1.0, 2.0], -12.0, link="logistic"),
            np.array([2.0, 3.0]), box, cf.CfGoal([1.0]),
        ),
        GridProblem("sum-target", SumModel(), np.array([1.0, 1.0]), box, cf.CfGoal([7.0], tolerance=0.05)),
        GridProblem(
            "credit-debt-years", SliceModel(credit, x0, [1, 2]), np.array([3.5, 5.0]),
            FeatureDomain.numeric(["Debt", "YearsEmployed"], [0.0, 0.0], [7.0, 30.0]), cf.CfGoal([1.0]),
        ),
        GridProblem(
            "mlp-target", mlp, np.array([3.0, 7.0]), box,
            cf.CfGoal([float(mlp.predict([[6.0, 4.0]])[0, 0])], tolerance=0.05),
        ),
        GridProblem(
            "immutable", LinearModel([1.0, 1.0], -9.0, link="logistic"), np.array([2.0, 3.0]),
            FeatureDomain.numeric(["a", "b"], [0.0, 0.0], [10.0, 10.0], mutable=[False, True]), cf.CfGoal([1.0]),
        ),
    ]


def grid_optimum(problem: GridProblem, per_axis: int = 100, config: cf.SolverConfig | None = None):
    """Best feasible soft score over a grid that contains the original point."""
    axes = []
    for j, f in enumerate(problem.domain):
        axis = np.linspace(f.lower, f.upper, per_axis - 1)
        axes.append(np.unique(np.append(axis, problem.x[j])))
    G = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T
    scorer = cf.Scorer(problem.model, problem.x, problem.domain, problem.goal, config)
    scores = scorer.score_batch(G)
    feasible = [s.soft for s in scores if s.valid]
    return (max(feasible) if feasible else None), len(G)


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str


def _check(name, fn) -> OracleResult:
    try:
        ok, detail = fn()
    except Exception as exc:  # an oracle that crashes has failed
        return OracleResult(name, False, f"error: {exc}")
    return OracleResult(name, bool(ok), detail)


def oracle_kernel_values():
    got = (shap.shap_kernel(4, 2), shap.shap_kernel(4, 1))
    ok = math.isclose(got[0], 0.125, abs_tol=1e-15) and math.isclose(got[1], 0.25, abs_tol=1e-15)
    return ok, f"kernel(4,2)={got[0]}, kernel(4,1)={got[1]}"


def oracle_shap_zero_background():
    e = shap.explain(SumModel(), [1.0, 2.0, 3.0, 4.0], np.zeros((1, 4)))
    err = max(np.abs(e.phi[0] - [1, 2, 3, 4]).max(), abs(e.phi0[0]))
    return err < 1e-6, f"max error {err:.2e}"


def oracle_exact_shapley(cases: int = 20, seed: int = 0):
    worst = 0.0
    for c in range(cases):
        rng = np.random.default_rng(seed + c)
        m = int(rng.integers(2, 7))
        model = FixedMlpModel.random([m, 5, 1], rng)
        x = rng.normal(size=m)
        B = rng.normal(size=(int(rng.integers(1, 8)), m))
        got = shap.explain(model, x, B).phi[0]
        worst = max(worst, float(np.abs(got - metrics.ground_truth_shapley(model, x, B)).max()))
    return worst < 1e-6, f"max deviation {worst:.2e} over {cases} random MLPs"


def oracle_local_accuracy(cases: int = 20, seed: int = 0):
    worst = 0.0
    for c in range(cases):
        rng = np.random.default_rng(seed + c)
        m = int(rng.integers(1, 7))
        model = FixedMlpModel.random([m, 4, 2], rng)
        x = rng.normal(size=m)
        e = shap.explain(model, x, rng.normal(size=(5, m)))
        worst = max(worst, float(np.abs(e.local_accuracy_gap()).max()))
    return worst < 1e-6, f"max gap {worst:.2e}"


def oracle_cf_grid(config: cf.SolverConfig | None = None):
    config = cf.SolverConfig() if config is None else config
    notes = []
    ok = True
    for p in grid_problems():
        best, _ = grid_optimum(p)
        r = cf.search(p.model, p.x, p.domain, p.goal, config)
        good = r.valid and best is not None and r.score.soft >= best - 0.05 * abs(best)
        ok &= good
        notes.append(f"{p.name}: {r.score.soft:.3f} vs grid {best:.3f}")
    return ok, "; ".join(notes)


def oracle_lime_ranking(runs: int = 20, need: int = 18):
    model = LinearModel([8.0, -4.0, 2.0, 1.0])
    x = np.ones(4)
    hits = sum(lime.explain(model, x, lime.LimeConfig(rng_seed=s)).ranking()[:3] == [0, 1, 2] for s in range(runs))
    return hits >= need, f"{hits}/{runs} runs ranked by coefficient magnitude"


def oracle_balance_penalty():
    a = lime.balance_penalty([[1], [1], [1], [1]], [1, 1, 0, 0], 0.01, 10.0, 1)[0]
    err = abs(a - math.tanh(0.11))
    return err < 1e-9, f"eta={a:.12f}, error {err:.1e}"


def oracle_metric_identities():
    rng = np.random.default_rng(0)
    model = LinearModel([3.0, 1.0, 2.0])
    data = rng.normal(size=(50, 3))
    x = np.array([1.0, -2.0, 0.5])
    c = metrics.marginal_contributions(model, x, data)
    phi = shap.explain(model, x, data).phi[0]
    r = metrics.faithfulness_from(phi, c)
    inf = metrics.infidelity(model.weights, model, x)
    eff = abs(metrics.ground_truth_shapley(model, x, data).sum() - (predict_array(model, x[None])[0, 0] - model.predict(data).mean()))
    ok = abs(r - 1) < 1e-9 and inf < 1e-9 and eff < 1e-9
    return ok, f"faithfulness={r:.12f}, infidelity={inf:.1e}, efficiency gap={eff:.1e}"


ORACLES = (
    ("shap kernel spot values", oracle_kernel_values),
    ("shap zero-background exactness", oracle_shap_zero_background),
    ("shap vs exact Shapley", oracle_exact_shapley),
    ("shap local accuracy", oracle_local_accuracy),
    ("counterfactual grid optimum", oracle_cf_grid),
    ("lime linear ranking", oracle_lime_ranking),
    ("lime balance penalty", oracle_balance_penalty),
    ("metric identities", oracle_metric_identities),
)


def run_all() -> tuple[list[OracleResult], float]:
    start = time.perf_counter()
    results = [_check(name, fn) for name, fn in ORACLES]
    return results, time.perf_counter() - start
