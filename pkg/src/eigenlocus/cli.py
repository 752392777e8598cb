"""Command-line entry point.

Exit codes: 0 success, 1 a checked bound failed, 2 usage or config error,
3 I/O error.  ``EIGENLOCUS_SEED`` overrides every seed read from a config
or flag.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import DatasetFormatError, LabeledDataset, load_csv
from .diagnostics import KKT_AUDIT_TOL, diagnose, weak_dual_experiment
from .gaussian import (ConfigError, ExperimentConfig, bayes_error, bayes_oracle,
                       classifier_error, covariances_equal, load_config, sample, sample_pair,
                       make_rng)
from .model import ModelFormatError, deserialize, fit, margin_geometry, serialize
from .multiclass import engine_predict, grade, multimeter, save_engine, train_engine

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
BUNDLED = ("example-one", "example-two", "homogeneous", "skewed-weak-dual", "two-point", "three-class")

log = logging.getLogger("eigenlocus")


class UsageError(Exception):
    pass


def _seed(value: int) -> int:
    env = os.environ.get("EIGENLOCUS_SEED")
    if env is None or env == "":
        return value
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"EIGENLOCUS_SEED must be an integer, got {env!r}") from None


def _penalty(text: str) -> float:
    try:
        c = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"C must be a number, got {text!r}") from None
    if not c > 0:
        raise argparse.ArgumentTypeError("C must be > 0")
    return c


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < v <= 0.5:
        raise argparse.ArgumentTypeError("held-out fraction must lie in (0, 0.5]")
    return v


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("eigenlocus") / "configs" / f"{name}.json"))


def _resolve_config(arg: str) -> Path:
    p = Path(arg)
    if not p.exists() and arg in BUNDLED:
        return bundled_config(arg)
    return p


def _read_model(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    return deserialize(path.read_text(encoding="utf-8"))


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])


# --- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    data = load_csv(args.data)
    model = fit(data, args.c)
    Path(args.out).write_text(serialize(model), encoding="utf-8")
    print(f"N={model.n} d={model.d} sv={model.n_extremes} |tau|={model.tau_norm:.10g} "
          f"tau0={model.tau0:.10g} gap={model.duality_gap:.3g} converged={model.converged}")
    print("tau=" + " ".join(f"{v:.10g}" for v in model.tau))
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _read_model(args.model)
    data = load_csv(args.data)
    if data.d != model.d:
        raise UsageError(f"model expects d={model.d}, data has d={data.d}")
    scores = model.decision_function(data.X)
    labels = model.predict(data.X)
    rows = [(float(s), int(l)) for s, l in zip(scores, labels)]
    if args.out:
        _write_csv(Path(args.out), ["score", "label"], rows)
    else:
        for s, l in rows:
            print(f"{s:.17g},{l:+d}")
    print(f"error={np.mean(labels != data.y):.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model = _read_model(args.model)
    data = load_csv(args.data)
    if data.d != model.d or data.n != model.n:
        raise UsageError(f"model was trained on N={model.n}, d={model.d}; data has N={data.n}, d={data.d}")
    report = diagnose(model, data, tol=args.tol)
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.table())
    if not report.passed:
        print("failing: " + ", ".join(report.failures), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _line_samples(normal, offset_value, lo, hi, k=101):
    """Points on ``normal'x + offset_value = 0`` across ``[lo, hi]`` (2-D only)."""
    a, b = normal
    if abs(b) >= abs(a):
        xs = np.linspace(lo[0], hi[0], k)
        return np.column_stack([xs, -(a * xs + offset_value) / b])
    ys = np.linspace(lo[1], hi[1], k)
    return np.column_stack([-(b * ys + offset_value) / a, ys])


def _check(checks, name, value, ok):
    checks[name] = {"value": value, "passed": bool(ok)}


def _run_binary(cfg: ExperimentConfig, expect: dict, outdir: Path, seed: int) -> dict:
    checks: dict = {}
    out: dict = {}
    if cfg.class1 is not None:
        data = sample_pair(cfg.class1, cfg.class2, cfg.n_train, cfg.n_train, seed)
    else:
        data = load_csv(cfg.data_path)
    model = fit(data, cfg.C)
    out["model"] = {"n": model.n, "d": model.d, "C": model.C if math.isfinite(model.C) else None,
                    "tau": model.tau.tolist(), "tau0": model.tau0,
                    "sv_fraction": model.sv_fraction, "converged": model.converged,
                    "iterations": model.iterations}
    rep = diagnose(model, data)
    out["diagnostics"] = {"passed": rep.passed, "failures": rep.failures}
    if model.tau_norm > 0:
        g = margin_geometry(model)
        out["model"]["full_width"] = g.full_width
    if data.d == 2 and model.tau[1] != 0:
        out["model"]["slope"] = float(-model.tau[0] / model.tau[1])
        out["model"]["intercept"] = float(-model.tau0 / model.tau[1])

    if cfg.class1 is not None:
        oracle = bayes_oracle(cfg.class1, cfg.class2)
        common = covariances_equal(cfg.class1.covariance, cfg.class2.covariance)
        analytic = (bayes_error(cfg.class1, cfg.class2) if common
                    and math.isclose(cfg.class1.prior, cfg.class2.prior) else None)
        mc = bayes_error(cfg.class1, cfg.class2, "monte-carlo", cfg.n_test, seed + 1)
        svm_err = classifier_error(model.predict, cfg.class1, cfg.class2, cfg.n_test, seed + 1)
        nw = float(np.linalg.norm(oracle.w))
        angle = None
        if nw > 0 and model.tau_norm > 0:
            cos = float(model.tau @ oracle.w) / (nw * model.tau_norm)
            angle = math.degrees(math.acos(max(-1.0, min(1.0, cos))))
        flag, grd = grade(svm_err, model.sv_fraction)
        out["bayes"] = {"kind": oracle.kind, "w": oracle.w.tolist(), "c": oracle.c,
                        "eta": oracle.eta, "analytic_error": analytic, "mc_error": mc,
                        "boundary_line": None if oracle.boundary_line() is None
                        else list(map(float, oracle.boundary_line()))}
        out["svm_error"] = svm_err
        out["angle_deg"] = angle
        out["homogeneity_flag"] = flag
        out["separability_grade"] = grd
        ref = analytic if analytic is not None else mc
        if "max_error_excess" in expect:
            _check(checks, "error_excess", abs(svm_err - ref), abs(svm_err - ref) <= expect["max_error_excess"])
        if "error_range" in expect:
            lo, hi = expect["error_range"]
            _check(checks, "error_range", svm_err, lo <= svm_err <= hi)
        if "max_angle_deg" in expect:
            _check(checks, "angle_deg", angle, angle is not None and angle <= expect["max_angle_deg"])
        if "homogeneity_flag" in expect:
            _check(checks, "homogeneity_flag", flag, flag == expect["homogeneity_flag"])
    if "min_sv_fraction" in expect:
        _check(checks, "sv_fraction", model.sv_fraction, model.sv_fraction >= expect["min_sv_fraction"])
    for key in ("slope", "intercept"):
        if f"{key}_range" in expect:
            v = out["model"].get(key)
            lo, hi = expect[f"{key}_range"]
            _check(checks, key, v, v is not None and lo <= v <= hi)
    if expect.get("diagnostics_pass"):
        _check(checks, "diagnostics", rep.failures, rep.passed)

    # plot data
    ext = np.zeros(data.n, dtype=bool)
    ext[model.extreme_idx] = True
    _write_csv(outdir / "scatter.csv", ["label"] + [f"f{k + 1}" for k in range(data.d)] + ["psi", "extreme"],
               [(int(y), *map(float, x), float(p), int(e))
                for x, y, p, e in zip(data.X, data.y, model.psi, ext)])
    if data.d == 2 and model.tau_norm > 0:
        lo, hi = data.X.min(axis=0) - 1.0, data.X.max(axis=0) + 1.0
        rows = []
        for name, off in (("boundary", model.tau0), ("border_plus", model.tau0 - 1.0),
                          ("border_minus", model.tau0 + 1.0)):
            rows += [(name, float(a), float(b)) for a, b in _line_samples(model.tau, off, lo, hi)]
        if cfg.class1 is not None:
            oracle = bayes_oracle(cfg.class1, cfg.class2)
            if oracle.kind == "linear" and np.linalg.norm(oracle.w) > 0:
                rows += [("bayes", float(a), float(b))
                         for a, b in _line_samples(oracle.w, oracle.c - oracle.eta, lo, hi)]
        _write_csv(outdir / "boundary.csv", ["curve", "x1", "x2"], rows)
    out["checks"] = checks
    return out


def _run_weak_dual(cfg: ExperimentConfig, expect: dict, outdir: Path, seed: int) -> dict:
    seeds = int(expect.get("seeds", 1))
    runs = []
    for k in range(seeds):
        s = seed + k
        data = sample_pair(cfg.class1, cfg.class2, cfg.n_train, cfg.n_train, s)
        rng = make_rng(s + 10_000)
        test = LabeledDataset.from_classes(sample(cfg.class1, cfg.n_test, rng),
                                           sample(cfg.class2, cfg.n_test, rng))
        rep = weak_dual_experiment(data, cfg.C, test)
        runs.append({
            "seed": s,
            "note": rep.note,
            "regularized": asdict(rep.regularized),
            "unregularized": asdict(rep.unregularized),
            "sv_fraction_gap": rep.sv_fraction_gap,
        })
    checks: dict = {}
    if "min_sv_gap" in expect:
        wins = sum(r["sv_fraction_gap"] >= expect["min_sv_gap"] for r in runs)
        need = int(expect.get("min_wins", seeds))
        _check(checks, "sv_gap_wins", wins, wins >= need)
    _write_csv(outdir / "weak_dual.csv",
               ["seed", "reg_sv_fraction", "unreg_sv_fraction", "reg_error", "unreg_error"],
               [(r["seed"], r["regularized"]["sv_fraction"], r["unregularized"]["sv_fraction"],
                 r["regularized"]["test_error"], r["unregularized"]["test_error"]) for r in runs])
    return {"runs": runs, "checks": checks}


def _run_multiclass(cfg: ExperimentConfig, expect: dict, outdir: Path, seed: int) -> dict:
    specs = [cfg.class1, cfg.class2, *cfg.extra_classes]
    rng = make_rng(seed)
    train = [sample(s, cfg.n_train, rng) for s in specs]
    engine = train_engine(train, cfg.C)
    test = [sample(s, cfg.n_test, rng) for s in specs]
    m = len(specs)
    conf = np.zeros((m, m), dtype=int)
    for k, pts in enumerate(test):
        pred = engine_predict(engine, pts)
        conf[k] = np.bincount(pred, minlength=m)
    acc = float(np.trace(conf) / conf.sum())
    train_acc = float(np.mean(np.concatenate(
        [engine_predict(engine, pts) == k for k, pts in enumerate(train)])))
    save_engine(engine, outdir / "engine")
    checks: dict = {}
    if "min_accuracy" in expect:
        _check(checks, "accuracy", acc, acc >= expect["min_accuracy"])
    _write_csv(outdir / "confusion.csv", ["true"] + [f"pred_{k}" for k in range(m)],
               [(k, *map(int, row)) for k, row in enumerate(conf)])
    return {"n_models": engine.n_models, "confusion": conf.tolist(), "accuracy": acc,
            "train_accuracy": train_acc, "checks": checks}


def cmd_experiment(args) -> int:
    path = _resolve_config(args.config)
    cfg = load_config(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    kind = raw.get("kind", "binary")
    expect = raw.get("expect", {})
    if not isinstance(expect, dict):
        raise ConfigError("field 'expect' must be an object")
    seed = _seed(cfg.seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    if kind == "binary":
        body = _run_binary(cfg, expect, outdir, seed)
    elif kind == "weak-dual":
        if cfg.class1 is None:
            raise ConfigError("weak-dual configs need 'classes'")
        body = _run_weak_dual(cfg, expect, outdir, seed)
    elif kind == "multiclass":
        if cfg.class1 is None:
            raise ConfigError("multiclass configs need 'classes'")
        body = _run_multiclass(cfg, expect, outdir, seed)
    else:
        raise ConfigError(f"field 'kind' must be binary, weak-dual or multiclass, got {kind!r}")
    elapsed = time.perf_counter() - t
    summary = {"version": 1, "name": cfg.name, "kind": kind, "seed": seed, **body,
               "passed": all(c["passed"] for c in body["checks"].values()),
               "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "elapsed_s": elapsed}
    (outdir / "summary.json").write_text(json.dumps(summary, indent=1, default=float), encoding="utf-8")
    for name, c in body["checks"].items():
        print(f"{name:<20} {c['value']!s:<28} {'PASS' if c['passed'] else 'FAIL'}")
    print(f"{cfg.name}: {'PASS' if summary['passed'] else 'FAIL'} ({elapsed:.1f} s)")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def cmd_multimeter(args) -> int:
    if (args.data is None) == (args.config is None):
        raise UsageError("give exactly one of --data or --config")
    C, heldout = args.c, args.heldout
    if args.data is not None:
        data = load_csv(args.data)
        seed = _seed(0 if args.seed is None else args.seed)
    else:
        cfg = load_config(_resolve_config(args.config))
        seed = _seed(cfg.seed if args.seed is None else args.seed)
        if cfg.class1 is not None:
            data = sample_pair(cfg.class1, cfg.class2, cfg.n_train, cfg.n_train, seed)
        else:
            data = load_csv(cfg.data_path)
        C = cfg.C if args.c is None else C
        heldout = cfg.heldout if args.heldout is None else heldout
    reading = multimeter(data, 1.0 if C is None else C, 0.3 if heldout is None else heldout, seed)
    if args.json:
        print(json.dumps(reading.to_document(), indent=1))
    else:
        for k, v in reading.to_document().items():
            print(f"{k:<20} {v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eigenlocus", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model on a CSV dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--c", type=_penalty, default=1.0, help="slack penalty C ('inf' for hard margin)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="score a CSV dataset with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    d = sub.add_parser("diagnose", help="audit a model against its training data")
    d.add_argument("--model", required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--tol", type=float, default=KKT_AUDIT_TOL)
    d.add_argument("--out", help="write the report document here")
    d.set_defaults(func=cmd_diagnose)

    e = sub.add_parser("experiment", help="run a config (path or bundled name)")
    e.add_argument("--config", required=True, help=f"path or one of: {', '.join(BUNDLED)}")
    e.add_argument("--outdir", required=True)
    e.set_defaults(func=cmd_experiment)

    m = sub.add_parser("multimeter", help="separability / homogeneity reading")
    m.add_argument("--data")
    m.add_argument("--config")
    m.add_argument("--c", type=_penalty, default=None)
    m.add_argument("--heldout", type=_fraction, default=None)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_multimeter)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, DatasetFormatError, ModelFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
