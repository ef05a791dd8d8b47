"""Batch command-line front end.

Subcommands: fit (coefficient cascade), eval (polynomialized model
diagnostics), baseline (fixed-interval scalar fits), cost (CKKS cost plan),
report (render a stored JSON report as a summary table).

Reports are written append-only with content-hash filenames, so identical
runs map to identical files and nothing is silently overwritten.  Exit
codes: 0 success, 2 schema error, 3 dimension error, 4 infeasible where
exactness was required, 5 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, fhecost
from .cascade import CascadeOptions, FitReport, fit_binary, fit_multiclass
from .errors import (
    DimensionMismatch,
    KindMismatch,
    LengthMismatch,
    QuadcalError,
    SchemaError,
)
from .evaluator import evaluate, forward_poly, poly_decisions, top_margins
from .lift import binary_lift, class_stats, hidden_preacts, pairwise_lifts, save_lift_cache
from .model_io import load_dataset, load_matrix, load_model, relu_decisions

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_DIMENSION = 3
EXIT_INFEASIBLE = 4
EXIT_IO = 5


def _write_report(out_dir: Path, kind: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(payload, indent=1, sort_keys=False) + "\n"
    digest = hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
    path = out_dir / f"{kind}_{digest}.json"
    if not path.exists():  # append-only: same content, same name, no rewrite
        path.write_text(blob, encoding="utf-8")
    return path


def _fit_summary(report: FitReport) -> str:
    cols = [
        ("Regime", report.regime_label),
        ("Exact", "Y" if report.exact else "N"),
        ("n_c", str(report.n_c)),
        ("|P|", "--" if report.pair_count is None else str(report.pair_count)),
        ("Cal.Agr(%)", f"{report.cal_agreement:.2f}"),
        ("Test.Agr(%)", "--" if report.test_agreement is None else f"{report.test_agreement:.2f}"),
        ("Cal.mis", str(report.cal_mismatches)),
        ("Test.mis", "--" if report.test_mismatches is None else str(report.test_mismatches)),
        ("Norm.marg", f"{report.normalized_margin:.4g}"),
        ("#xi>0", "--" if report.slack_count is None else str(report.slack_count)),
        ("sum xi", "--" if report.slack_sum is None else f"{report.slack_sum:.1f}"),
    ]
    widths = [max(len(h), len(v)) for h, v in cols]
    head = "  ".join(h.ljust(w) for (h, _), w in zip(cols, widths))
    vals = "  ".join(v.ljust(w) for (_, v), w in zip(cols, widths))
    coeffs = report.coeffs
    lines = [
        head,
        vals,
        f"coefficients: alpha={coeffs.alpha:.6g} beta={coeffs.beta:.6g} eta={coeffs.eta:.6g}"
        f"  (threshold={report.threshold:.6g}, mode={report.threshold_mode})",
    ]
    if report.quantization is not None:
        q = report.quantization
        lines.append(
            f"quantization: step={q['step']:g} certified={q['certified']} "
            f"bound={q['margin_bound']:.4g} empirical={q['empirical_margin']:.4g}"
        )
    return "\n".join(lines)


def cmd_fit(args) -> int:
    model = load_model(args.model)
    features, supplied = load_dataset(args.cal)
    targets = supplied if args.use_supplied_targets else None
    from .model_io import make_calibration_set

    cal = make_calibration_set(model, features, targets)
    test_features = load_matrix(args.test) if args.test else None
    opts = CascadeOptions(
        mu_grid=tuple(args.mu_grid) if args.mu_grid else CascadeOptions.mu_grid,
        C_grid=tuple(args.c_grid) if args.c_grid else CascadeOptions.C_grid,
        threshold_mode=args.threshold_mode,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
        quantization_step=args.quantize,
    )
    if args.cache_lifts:
        preacts = hidden_preacts(model, cal.features)
        if model.kind == "binary":
            cache = binary_lift(model, preacts, cal.targets)
        else:
            cache = pairwise_lifts(class_stats(model, preacts), cal.targets)
        save_lift_cache(Path(args.out) / "lifts.json", cache)
    if model.kind == "binary":
        report = fit_binary(model, cal, opts, test_features)
    else:
        report = fit_multiclass(model, cal, opts, test_features)
    path = _write_report(Path(args.out), "fit", report.to_dict())
    print(_fit_summary(report))
    print(f"report: {path}")
    if args.require_exact and report.regime != "hard":
        print("exact replacement required but not attained", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _load_activation(path: str):
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if "coefficients" in raw:
        return baselines.PolyActivation(
            coefficients=np.asarray(raw["coefficients"], dtype=np.float64),
            fit_interval=tuple(raw.get("fit_interval", (-1.0, 1.0))),
            method=raw.get("method", "least_squares"),
            max_error=float(raw.get("max_error", 0.0)),
        )
    if "coeffs" in raw:  # a stored FitReport
        c = raw["coeffs"]
        from .cascade import QuadCoeffs

        return QuadCoeffs(float(c["alpha"]), float(c["beta"]), float(c["eta"]))
    if {"alpha", "beta", "eta"} <= set(raw):
        from .cascade import QuadCoeffs

        return QuadCoeffs(float(raw["alpha"]), float(raw["beta"]), float(raw["eta"]))
    raise SchemaError(f"{path}: not a recognizable activation file")


def cmd_eval(args) -> int:
    model = load_model(args.model)
    activation = _load_activation(args.activation)
    features, _ = load_dataset(args.data)
    labels = None
    if args.labels:
        labels = np.loadtxt(args.labels, delimiter=",", dtype=np.int64).reshape(-1)
    logits = forward_poly(model, activation, features)
    decisions = poly_decisions(model, activation, features, args.threshold)
    reference = relu_decisions(model, features)
    record = evaluate(decisions, reference, labels=labels, logits=logits.values)
    payload = {
        "schema_version": 1,
        "agreement_vs_relu": record.agreement_vs_relu,
        "mismatch_count": int(record.mismatch_indices.shape[0]),
        "mismatch_indices": [int(i) for i in record.mismatch_indices],
        "accuracy_vs_labels": record.accuracy_vs_labels,
        "macro_f1": record.macro_f1,
    }
    path = _write_report(Path(args.out), "eval", payload)
    print(
        f"agreement vs ReLU: {record.agreement_vs_relu:.2f}%  "
        f"mismatches: {record.mismatch_indices.shape[0]}"
        + (
            f"  accuracy: {record.accuracy_vs_labels:.2f}%  macroF1: {record.macro_f1:.4f}"
            if labels is not None
            else ""
        )
    )
    if args.margins_csv:
        np.savetxt(args.margins_csv, top_margins(logits.values), delimiter=",")
    print(f"report: {path}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    if args.interval is not None:
        interval = (args.interval[0], args.interval[1])
    else:
        model = load_model(args.model)
        features, _ = load_dataset(args.data)
        interval = baselines.empirical_interval(hidden_preacts(model, features))
    if args.method == "square":
        act = baselines.square_activation()
    elif args.method == "least_squares":
        act = baselines.fit_least_squares(args.degree, interval, args.grid_size)
    else:
        act = baselines.fit_remez(args.degree, interval, args.grid_size)
    payload = {
        "schema_version": 1,
        "method": act.method,
        "coefficients": act.coefficients.tolist(),
        "fit_interval": list(act.fit_interval),
        "max_error": act.max_error,
        "alternations": act.alternations,
    }
    path = _write_report(Path(args.out), "baseline", payload)
    print(
        f"{act.method} degree {act.degree} on [{act.fit_interval[0]:.4g}, "
        f"{act.fit_interval[1]:.4g}]: max error {act.max_error:.6g}"
    )
    print(f"report: {path}")
    return EXIT_OK


def cmd_cost(args) -> int:
    shape = fhecost.TaskShape(d=args.d, m=args.m, k=args.k, ring_degree=args.ring_degree)
    if args.act not in fhecost.ACTIVATIONS:
        raise SchemaError(f"unknown activation scheme {args.act!r}")
    report = fhecost.op_counts(shape, fhecost.ACTIVATIONS[args.act])
    payload = {"task": {"d": args.d, "m": args.m, "k": args.k}, **report.to_dict()}
    path = _write_report(Path(args.out), "cost", payload)
    print(
        f"enc {report.encryptions}  ct-ct {report.ctct}  ct-pt {report.ctpt}  "
        f"rot {report.rotations}  rescale {report.rescales}  depth {report.total_depth}"
    )
    if report.feasible_config:
        n_ring, depth, logq = report.feasible_config
        print(f"minimum feasible: N=2^{n_ring.bit_length()-1} depth={depth} logQ={logq}")
        print(f"modulus chain: {list(report.modulus_chain)}")
    else:
        print("no feasible configuration in the search grid")
    if args.grid:
        for row in fhecost.feasibility_grid():
            cfg = row["config"]
            cfg_s = (
                f"N=2^{cfg['ring_degree'].bit_length()-1} depth={cfg['depth']} logQ={cfg['log_q']}"
                if cfg
                else "infeasible"
            )
            print(f"  {row['scheme']:<8} deg {row['degree']}  depth {row['depth']}  {cfg_s}")
    print(f"report: {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    raw = json.loads(Path(args.input).read_text(encoding="utf-8"))
    if "regime_label" in raw:
        print(
            f"regime {raw['regime_label']}  exact {raw['exact']}  "
            f"cal agreement {raw['cal_agreement']:.2f}%  "
            f"mismatches {raw['cal_mismatches']}  "
            f"norm margin {raw['normalized_margin']:.4g}"
        )
    print(json.dumps(raw, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadcal", description=__doc__)
    p.add_argument("--threads", type=int, default=1, help="parallelism cap (reserved; computation is deterministic regardless)")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit replacement coefficients")
    f.add_argument("--model", required=True)
    f.add_argument("--cal", required=True, help="calibration dataset (csv or json)")
    f.add_argument("--test", help="optional held-out dataset for test agreement")
    f.add_argument("--out", default="reports")
    f.add_argument("--threshold-mode", choices=["fixed_zero", "free"], default="fixed_zero")
    f.add_argument("--mu-grid", type=float, nargs="*")
    f.add_argument("--c-grid", type=float, nargs="*")
    f.add_argument("--validation-fraction", type=float, default=0.2)
    f.add_argument("--seed", type=int, default=2026)
    f.add_argument("--quantize", type=float, help="coefficient quantization step (hard regime)")
    f.add_argument("--require-exact", action="store_true")
    f.add_argument("--cache-lifts", action="store_true")
    f.add_argument("--use-supplied-targets", action="store_true")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate a polynomialized model")
    e.add_argument("--model", required=True)
    e.add_argument("--activation", required=True, help="QuadCoeffs/PolyActivation/FitReport json")
    e.add_argument("--data", required=True)
    e.add_argument("--labels", help="optional ground-truth labels csv")
    e.add_argument("--threshold", type=float, default=0.0)
    e.add_argument("--margins-csv", help="write per-sample top1-top2 margins")
    e.add_argument("--out", default="reports")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("baseline", help="fixed-interval scalar ReLU fit")
    b.add_argument("--method", choices=["square", "least_squares", "remez"], required=True)
    b.add_argument("--degree", type=int, default=2)
    b.add_argument("--model")
    b.add_argument("--data")
    b.add_argument("--interval", type=float, nargs=2, help="explicit [a b] instead of model+data")
    b.add_argument("--grid-size", type=int, default=baselines.DEFAULT_GRID_SIZE)
    b.add_argument("--out", default="reports")
    b.set_defaults(func=cmd_baseline)

    c = sub.add_parser("cost", help="CKKS cost plan")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--ring-degree", type=int, default=2**14)
    c.add_argument("--act", default="quad")
    c.add_argument("--grid", action="store_true", help="print the full feasibility matrix")
    c.add_argument("--out", default="reports")
    c.set_defaults(func=cmd_cost)

    r = sub.add_parser("report", help="render a stored report")
    r.add_argument("--input", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError,) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DimensionMismatch, KindMismatch, LengthMismatch) as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QuadcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
