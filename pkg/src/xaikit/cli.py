"""Command-line harness: single explanations, benchmark protocols and the oracle suite.

Reports are JSON with sorted keys and no timestamps, so identical runs give
identical bytes; wall-clock data goes to a ``<report>.meta.json`` sidecar.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import counterfactual as cf
from . import lime, metrics, oracles, shap
from .model_api import Dataset, FeatureDomain, XaiError, ingest_csv, is_classifier, predict_array, read_csv_header
from .models import CreditScorerModel, FixedMlpModel, LinearModel, SumModel, load_mlp

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
PROTOCOLS = ("impact-score-sweep", "stability", "cf-stability", "cf-quality", "shap-background-compare")


class UsageError(Exception):
    """Bad flags, config or missing inputs: exit code 2."""


class CountingModel:
    """Proxy that counts the rows a model is asked to evaluate."""

    def __init__(self, model):
        self.model = model
        self.n_outputs = model.n_outputs
        self.output_names = model.output_names
        self.is_classifier = is_classifier(model)
        self.calls = 0
        self._lock = threading.Lock()
        if callable(getattr(model, "confidence", None)):
            self.confidence = model.confidence

    def predict(self, X):
        X = np.atleast_2d(X)
        with self._lock:
            self.calls += len(X)
        return self.model.predict(X)


class PhaseCounter:
    def __init__(self, model: CountingModel):
        self.model = model
        self.counts: dict[str, int] = {}

    def phase(self, name):
        counter = self

        class _Phase:
            def __enter__(self):
                self.start = counter.model.calls

            def __exit__(self, *exc):
                counter.counts[name] = counter.counts.get(name, 0) + counter.model.calls - self.start

        return _Phase()


# -- loading -----------------------------------------------------------------


def parse_floats(text: str, what: str) -> np.ndarray:
    try:
        values = np.array([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r} as comma-separated numbers") from None
    if values.size == 0 or not np.isfinite(values).all():
        raise UsageError(f"{what} must be finite numbers")
    return values


def load_model(spec: str):
    if spec == "sum":
        return SumModel()
    if spec == "credit":
        return CreditScorerModel()
    kind, _, arg = spec.partition(":")
    if kind == "linear" and arg:
        path = Path(arg)
        if path.exists():
            try:
                return LinearModel.from_dict(json.loads(path.read_text(encoding="utf-8")))
            except (ValueError, KeyError) as exc:
                raise UsageError(f"bad linear model file {path}: {exc}") from None
        if arg.endswith(".json"):
            raise UsageError(f"no such file: {arg}")
        return LinearModel(parse_floats(arg, "linear weights"))
    if kind == "mlp" and arg:
        if not Path(arg).exists():
            raise UsageError(f"no such file: {arg}")
        try:
            return load_mlp(arg)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad MLP file {arg}: {exc}") from None
    raise UsageError(f"unknown model spec {spec!r}; use sum, credit, linear:<file|weights> or mlp:<file>")


def model_width(model) -> int | None:
    if isinstance(model, CreditScorerModel):
        return 4
    if isinstance(model, LinearModel):
        return len(model.weights)
    if isinstance(model, FixedMlpModel):
        return model.n_inputs
    return None


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {p} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {p} must be a JSON object")
    return cfg


def resolve_seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get("XAIKIT_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"XAIKIT_SEED must be an integer, got {env!r}") from None
    return 0


def build_schema(model, args, cfg, width: int | None) -> FeatureDomain:
    if "schema" in cfg:
        return FeatureDomain.from_dict(cfg["schema"])
    if isinstance(model, CreditScorerModel):
        return CreditScorerModel.domain()
    if args.data:
        _existing(args.data)
        names = read_csv_header(args.data) if args.header else None
        if names is None:
            with open(args.data, encoding="utf-8") as fh:
                first = fh.readline()
            names = [f"x{j}" for j in range(len(first.split(",")))]
        return FeatureDomain.numeric(names)
    if width is None:
        raise UsageError("cannot infer the number of features; pass --input, --data or a schema in --config")
    return FeatureDomain.numeric([f"x{j}" for j in range(width)])


def _existing(path) -> str:
    if not Path(path).exists():
        raise UsageError(f"no such file: {path}")
    return path


def load_data(args, schema) -> Dataset | None:
    if not args.data:
        return None
    _existing(args.data)
    return ingest_csv(args.data, schema, has_header=args.header)


def bounded(schema: FeatureDomain, data: Dataset | None) -> FeatureDomain:
    """A schema with finite numeric bounds, taken from the data when missing."""
    if all(f.finite_bounds for f in schema if f.is_numeric):
        return schema
    if data is None:
        raise UsageError("this command needs finite feature bounds: supply --data or a schema in --config")
    lo, hi = data.X.min(axis=0), data.X.max(axis=0)
    feats = []
    for j, f in enumerate(schema):
        if f.is_numeric and not f.finite_bounds:
            feats.append(dataclasses.replace(f, lower=float(lo[j]), upper=float(hi[j] if hi[j] > lo[j] else lo[j] + 1)))
        else:
            feats.append(f)
    return FeatureDomain(tuple(feats))


def synthetic_data(schema: FeatureDomain, n: int, seed: int) -> Dataset:
    return Dataset(cf.random_points(schema, n, np.random.default_rng(seed)), schema)


def select_input(args, schema, data) -> np.ndarray:
    if args.input is not None:
        parts = args.input.split(",")
        try:
            x = schema.encode(parts) if not schema.all_numeric else parse_floats(args.input, "--input")
        except XaiError as exc:
            raise UsageError(str(exc)) from None
        if len(x) != len(schema):
            raise UsageError(f"--input has {len(x)} values but the schema has {len(schema)} features")
        return np.asarray(x, dtype=float)
    if data is None:
        raise UsageError("pass --input or --data with --row")
    if not 0 <= args.row < len(data):
        raise UsageError(f"--row {args.row} outside 0..{len(data) - 1}")
    return data.X[args.row].copy()


def make_lime_config(cfg, seed) -> lime.LimeConfig:
    try:
        return lime.LimeConfig(**{**cfg.get("lime", {}), "rng_seed": seed})
    except TypeError as exc:
        raise UsageError(f"bad lime settings: {exc}") from None


def make_solver(cfg, seed) -> cf.SolverConfig:
    opts = {k: v for k, v in cfg.get("cf", {}).items() if k in {f.name for f in dataclasses.fields(cf.SolverConfig)}}
    try:
        return cf.SolverConfig(**{**opts, "rng_seed": seed})
    except TypeError as exc:
        raise UsageError(f"bad cf settings: {exc}") from None


def make_goal(model, cfg, fallback_target=None) -> cf.CfGoal:
    c = cfg.get("cf", {})
    target = c.get("target", fallback_target)
    if target is None:
        raise UsageError("counterfactual target missing: set cf.target in --config or pass --target")
    return cf.CfGoal(np.atleast_1d(np.asarray(target, dtype=float)), c.get("thresholds"), c.get("tolerance"))


def build_background(spec: str, model, data: Dataset | None, schema, x, cfg, seed) -> tuple[Dataset, dict]:
    kind, _, arg = spec.partition(":")
    info: dict = {"strategy": kind}
    if kind == "zeros":
        return Dataset(np.zeros((1, len(schema))), schema), info
    if kind == "file":
        return ingest_csv(_existing(arg), schema, has_header=False), info
    if data is None:
        raise UsageError(f"background {spec!r} needs --data")
    if kind == "data":
        return data, info
    if kind == "random":
        size = int(arg) if arg else min(100, len(data))
        return shap.background_random(data, size, seed), {**info, "size": size}
    if kind == "kmeans":
        k = int(arg) if arg else 10
        return shap.background_kmeans(data, k, seed), {**info, "k": k}
    if kind == "counterfactual":
        s, _, n = (arg or "10,1").partition(",")
        c = cfg.get("background", {})
        reference = c.get("reference")
        if reference is None:
            reference = [float(np.median(predict_array(model, data.X)[:, 0]))]
        Y = predict_array(model, data.X)
        span = float((Y.max(axis=0) - Y.min(axis=0)).max()) or 1.0
        tol = float(c.get("tolerance", 1e-2 * span))
        solver = make_solver(cfg, seed)
        res = shap.background_counterfactual(
            model, data, reference, int(s), int(n or 1), tol, bounded(schema, data), solver, seed
        )
        return res.data, {**info, "s": int(s), "n": int(n or 1), "tolerance": tol, "reference": list(map(float, reference)),
                          "attempted": res.attempted, "succeeded": res.succeeded}
    raise UsageError(f"unknown background {spec!r}; use zeros, data, random[:N], kmeans[:K], counterfactual[:S,N] or file:<csv>")


# -- output ------------------------------------------------------------------


def dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(payload: dict, out: str | None, runtime: float) -> None:
    text = dumps(payload)
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "runtime_seconds": round(runtime, 6),
        "report": path.name,
    }
    path.with_name(path.stem + ".meta.json").write_text(dumps(meta), encoding="utf-8")


def write_csv_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def provenance(args, cfg, seed, command) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": {
            "model": args.model,
            "data": args.data,
            "input": getattr(args, "input", None),
            "row": getattr(args, "row", None),
            "background": getattr(args, "background", None),
            "file": cfg,
        },
    }


# -- commands ----------------------------------------------------------------


def cmd_explain(args) -> int:
    start = time.perf_counter()
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    model = CountingModel(load_model(args.model))
    width = model_width(model.model)
    if width is None and args.input is not None:
        width = len(args.input.split(","))
    schema = build_schema(model.model, args, cfg, width)
    data = load_data(args, schema)
    x = select_input(args, schema, data)
    phases = PhaseCounter(model)
    payload = provenance(args, cfg, seed, f"explain {args.method}")
    try:
        if args.method == "lime":
            with phases.phase("explain"):
                sal = lime.explain(model, x, make_lime_config(cfg, seed), schema, args.output)
            payload["explanation"] = sal.to_dict()
        elif args.method == "shap":
            spec = args.background or ("data" if data is not None else "zeros")
            with phases.phase("background"):
                bg, info = build_background(spec, model, data, schema, x, cfg, seed)
            opts = cfg.get("shap", {})
            with phases.phase("explain"):
                e = shap.explain(model, x, bg, opts.get("n_samples"), seed, opts.get("exhaustive_cap", shap.EXHAUSTIVE_CAP),
                                 schema.names)
            payload["background"] = {**info, "rows": len(bg)}
            payload["explanation"] = e.to_dict()
        else:
            domain = bounded(schema, data)
            target = None if args.target is None else parse_floats(args.target, "--target").tolist()
            goal = make_goal(model, cfg, target)
            with phases.phase("search"):
                r = cf.search(model, x, domain, goal, make_solver(cfg, seed), data if cfg.get("cf", {}).get("mad") else None)
            payload["explanation"] = r.to_dict(domain)
    except UsageError:
        raise
    except XaiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    payload["evaluations"] = phases.counts
    write_report(payload, args.out, time.perf_counter() - start)
    return EXIT_OK


def _run_trials(fn, n, jobs):
    """Run fn(i) for i in range(n); failures become None, order is kept."""

    def safe(i):
        try:
            return fn(i)
        except XaiError as exc:
            return {"failed": True, "error": str(exc)}

    if jobs <= 1:
        return [safe(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(safe, range(n)))


def _mean_sd(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def _weights(method, model, x, schema, cfg, seed, background=None):
    if method == "lime":
        return lime.explain(model, x, make_lime_config(cfg, seed), schema).saliency
    return shap.explain(model, x, background, cfg.get("shap", {}).get("n_samples"), seed).phi[0]


def bench_impact(args, cfg, seed, model, schema, data, out: Path):
    p = cfg.get("benchmark", {})
    method = p.get("explainer", "lime")
    K = int(p.get("K", min(len(schema), 10)))
    R = int(p.get("repeats", 10))
    m = int(p.get("inputs", 20))
    replacement = data.X.mean(axis=0)
    bg = shap.background_kmeans(data, min(10, len(data)), seed) if method == "shap" else None

    def trial(r):
        rng = np.random.default_rng(seed + r)
        X = data.X[rng.choice(len(data), size=min(m, len(data)), replace=False)]
        W = np.array([_weights(method, model, x, schema, cfg, seed + r * 1000 + i, bg) for i, x in enumerate(X)])
        return {"trial": r, "seed": seed + r,
                "impact_score": [metrics.impact_score(W, model, X, k, replacement) for k in range(1, K + 1)]}

    trials = _run_trials(trial, R, args.jobs)
    ok = [t for t in trials if not t.get("failed")]
    rows = []
    for k in range(1, K + 1):
        mean, sd = _mean_sd([t["impact_score"][k - 1] for t in ok])
        rows.append([k, mean, sd, len(ok)])
    header = ["k", "impact_score_mean", "impact_score_sd", "trials"]
    return trials, header, rows, header, rows


def bench_stability(args, cfg, seed, model, schema, data, out):
    p = cfg.get("benchmark", {})
    method = p.get("explainer", "lime")
    runs = int(p.get("runs", 10))
    top_k = int(p.get("top_k", min(3, len(schema))))
    n_inputs = int(p.get("inputs", 5))
    band = float(p.get("band", 0.1))
    bg = shap.background_random(data, min(int(p.get("background_size", 20)), len(data)), seed) if method == "shap" else None

    def trial(i):
        x = data.X[np.random.default_rng(seed + i).integers(len(data))]
        if method == "lime":
            explainer = lambda s: _weights("lime", model, x, schema, cfg, s)
        else:
            explainer = lambda s: _weights("shap", model, x, schema, cfg, s, shap.background_random(data, len(bg), s))
        vsi, csi = metrics.stability_indices(explainer, runs, top_k, seed + 1000 * i, band)
        return {"trial": i, "seed": seed + i, "vsi": vsi, "csi": csi}

    trials = _run_trials(trial, n_inputs, args.jobs)
    ok = [t for t in trials if not t.get("failed")]
    vm, vs = _mean_sd([t["vsi"] for t in ok])
    cm, cs = _mean_sd([t["csi"] for t in ok])
    summary = [["vsi", vm, vs, len(ok)], ["csi", cm, cs, len(ok)]]
    plot = [[t["trial"], t["vsi"], t["csi"]] for t in ok]
    return trials, ["metric", "mean", "sd", "trials"], summary, ["input", "vsi", "csi"], plot


def _cf_trials(args, cfg, seed, model, domain, X, data, goal):
    solver = make_solver(cfg, seed)

    def trial(i):
        r = cf.search(model, X[i], domain, goal, solver.with_seed(seed + i), data)
        return {"trial": i, "seed": seed + i, "valid": r.valid, "distance": r.score.s1,
                "changed": len(r.changed_features), "x": X[i].tolist(), "x_cf": r.x_cf.tolist(),
                "iterations": r.iterations_used}

    return _run_trials(trial, len(X), args.jobs)


def _histogram_rows(name, values, bins):
    counts, edges = np.histogram(values, bins=bins)
    return [[name, float(edges[i]), float(edges[i + 1]), int(counts[i])] for i in range(len(counts))]


def bench_cf_stability(args, cfg, seed, model, schema, data, out):
    p = cfg.get("benchmark", {})
    n = int(p.get("n", 200))
    domain = bounded(schema, data)
    goal = make_goal(model, cfg, [1.0])
    rng = np.random.default_rng(seed)
    X = np.empty((0, len(domain)))
    while len(X) < n:
        cand = cf.random_points(domain, 4 * n, rng)
        Y = predict_array(model, cand)
        far = np.linalg.norm(Y - goal.target, axis=1) > (goal.tolerance or 0.0)
        X = np.vstack([X, cand[far]])
    X = X[:n]
    trials = _cf_trials(args, cfg, seed, model, domain, X, None, goal)
    valid = [t for t in trials if t.get("valid")]
    dm, ds = _mean_sd([t["distance"] for t in valid])
    single = float(np.mean([t["changed"] == 1 for t in valid])) if valid else 0.0
    summary = [["success_fraction", len(valid) / n, 0.0, n], ["distance", dm, ds, len(valid)],
               ["single_feature_fraction", single, 0.0, len(valid)]]
    plot = []
    if valid:
        plot += _histogram_rows("distance", [t["distance"] for t in valid], 10)
        changed = np.array([t["changed"] for t in valid])
        plot += [["changed_features", float(c) - 0.5, float(c) + 0.5, int((changed == c).sum())]
                 for c in range(0, len(domain) + 1)]
    return trials, ["metric", "mean", "sd", "n"], summary, ["histogram", "bin_left", "bin_right", "count"], plot


def bench_cf_quality(args, cfg, seed, model, schema, data, out):
    p = cfg.get("benchmark", {})
    n = int(p.get("n", 20))
    domain = bounded(schema, data)
    goal = make_goal(model, cfg, [1.0])
    Y = predict_array(model, data.X)
    pool = np.flatnonzero(np.linalg.norm(Y - goal.target, axis=1) > (goal.tolerance or 0.0))
    if len(pool) == 0:
        raise XaiError("every data row already meets the goal")
    idx = np.random.default_rng(seed).choice(pool, size=min(n, len(pool)), replace=False)
    trials = _cf_trials(args, cfg, seed, model, domain, data.X[idx], data if p.get("mad", True) else None, goal)
    valid = [t for t in trials if t.get("valid")]
    pairs = [(t["x"], t["x_cf"]) for t in valid]
    prox = metrics.cf_proximity(pairs, data) if pairs else float("nan")
    spars = metrics.cf_sparsity(pairs) if pairs else float("nan")
    summary = [["success_fraction", len(valid) / len(idx), len(idx)], ["proximity", prox, len(valid)],
               ["sparsity", spars, len(valid)]]
    plot = [[t["trial"], t["distance"], t["changed"]] for t in valid]
    return trials, ["metric", "value", "n"], summary, ["trial", "distance", "changed"], plot


def bench_background_compare(args, cfg, seed, model, schema, data, out):
    p = cfg.get("benchmark", {})
    strategies = p.get("strategies", ["random:10", "kmeans:10", "counterfactual:10,1", "data"])
    trials_per = int(p.get("trials", 10))
    x = select_input(args, schema, data) if (args.input is not None or args.row is not None) else data.X[0]
    jobs = []
    for spec in strategies:
        ranged = spec.partition(":")[0] in ("random", "counterfactual")
        jobs += [(spec, t) for t in range(trials_per if ranged else 1)]

    def trial(i):
        spec, t = jobs[i]
        bg, info = build_background(spec, model, data, schema, x, cfg, seed + t)
        e = shap.explain(model, x, bg, cfg.get("shap", {}).get("n_samples"), seed + t)
        return {"trial": t, "strategy": spec, "seed": seed + t, "phi0": float(e.phi0[0]),
                "phi": e.phi[0].tolist(), "background": info}

    trials = _run_trials(trial, len(jobs), args.jobs)
    summary, plot = [], []
    for spec in strategies:
        ok = [t for t in trials if t.get("strategy") == spec and not t.get("failed")]
        if not ok:
            continue
        P = np.array([t["phi"] for t in ok])
        for j, name in enumerate(schema.names):
            row = [spec, name, float(P[:, j].min()), float(P[:, j].max()), float(P[:, j].mean()), len(ok)]
            summary.append(row)
            plot.append(row[:5])
        phi0 = [t["phi0"] for t in ok]
        summary.append([spec, "phi0", min(phi0), max(phi0), float(np.mean(phi0)), len(ok)])
    return (trials, ["strategy", "feature", "phi_min", "phi_max", "phi_mean", "trials"], summary,
            ["strategy", "feature", "phi_min", "phi_max", "phi_mean"], plot)


BENCHMARKS = {
    "impact-score-sweep": bench_impact,
    "stability": bench_stability,
    "cf-stability": bench_cf_stability,
    "cf-quality": bench_cf_quality,
    "shap-background-compare": bench_background_compare,
}


def cmd_benchmark(args) -> int:
    start = time.perf_counter()
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    model = CountingModel(load_model(args.model))
    width = model_width(model.model)
    schema = build_schema(model.model, args, cfg, width)
    data = load_data(args, schema)
    if data is None and args.protocol != "cf-stability":
        n = int(cfg.get("benchmark", {}).get("synthetic_rows", 200))
        data = synthetic_data(bounded(schema, None), n, seed)
    out = Path(args.out or f"{args.protocol}-report")
    out.mkdir(parents=True, exist_ok=True)
    try:
        trials, s_head, s_rows, p_head, p_rows = BENCHMARKS[args.protocol](args, cfg, seed, model, schema, data, out)
    except XaiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    payload = provenance(args, cfg, seed, f"benchmark {args.protocol}")
    payload["evaluations"] = {"total": model.calls}
    payload["trials"] = trials
    payload["failed_trials"] = sum(1 for t in trials if t.get("failed"))
    write_report(payload, str(out / "trials.json"), time.perf_counter() - start)
    write_csv_rows(out / "summary.csv", s_head, s_rows)
    write_csv_rows(out / "plot_data.csv", p_head, p_rows)
    print(f"wrote {out / 'trials.json'}, {out / 'summary.csv'}, {out / 'plot_data.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    results, runtime = oracles.run_all()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    print(f"runtime {runtime:.2f}s")
    if args.out:
        payload = {"version": __version__, "oracles": [dataclasses.asdict(r) for r in results],
                   "passed": all(r.passed for r in results)}
        write_report(payload, args.out, runtime)
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xaikit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"xaikit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="sum, credit, linear:<file|w1,w2,...> or mlp:<file>")
        p.add_argument("--data", help="CSV dataset (numeric or schema-encoded)")
        p.add_argument("--header", action="store_true", help="the CSV has a header row")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="RNG seed (falls back to the config, then XAIKIT_SEED)")
        p.add_argument("--out", help="report path (explain) or output directory (benchmark)")
        p.add_argument("--input", help="comma-separated input row")
        p.add_argument("--row", type=int, default=None, help="index of the input row in --data")

    ex = sub.add_parser("explain", help="explain one input")
    ex.add_argument("method", choices=("lime", "shap", "cf"))
    common(ex)
    ex.add_argument("--background", help="zeros, data, random[:N], kmeans[:K], counterfactual[:S,N] or file:<csv>")
    ex.add_argument("--target", help="counterfactual target output(s), comma-separated")
    ex.add_argument("--output", type=int, default=0, help="output index explained by LIME")
    ex.set_defaults(func=cmd_explain)

    bench = sub.add_parser("benchmark", help="run an experiment protocol")
    bench.add_argument("protocol", choices=PROTOCOLS)
    common(bench)
    bench.add_argument("--jobs", type=int, default=1, help="concurrent trials")
    bench.set_defaults(func=cmd_benchmark)

    val = sub.add_parser("validate", help="run the built-in oracle suite")
    val.add_argument("--out", help="write a JSON report here")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "row", None) is None and hasattr(args, "row") and args.input is None and args.command == "explain":
        args.row = 0
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except XaiError as exc:
        # data/schema problems found while loading inputs
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
