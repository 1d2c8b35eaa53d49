"""Command-line front end: synthesize, fit, detect, evaluate, bound-check, inspect.

Every command is deterministic given its flags; all randomness is seeded.
Exit codes: 0 success, 1 runtime failure, 2 usage error (argparse reports its
own parse failures as 2 as well).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import __version__
from .detector import (
    DetectorConfig,
    detect_batch,
    fit_detector,
    load_model,
    save_model,
)
from .errors import GpoodError
from .hyperfit import OptimizerConfig
from .interchange import SynthConfig, load_dataset, save_dataset, synthesize
from .metrics import evaluate, roc_curve
from .theory import class_bounds, theorem_check


class UsageError(Exception):
    """Bad flag values or missing input paths; exits with code 2."""


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _positive(value: float, name: str):
    if value <= 0:
        raise UsageError(f"--{name} must be positive, got {value}")


def cmd_synth(args) -> int:
    if args.n < 1 or args.k < 1 or args.p < 1:
        raise UsageError("--n, --k, --p must all be >= 1")
    _positive(args.cluster_separation, "cluster-separation")
    if args.ood_offset < 0:
        raise UsageError("--ood-offset must be non-negative")
    cfg = SynthConfig(
        K=args.k,
        p=args.p,
        n_per_class=args.n,
        cluster_separation=args.cluster_separation,
        ood_offset=args.ood_offset,
        score_scale=args.score_scale,
        seed=args.seed,
    )
    ind, ood = synthesize(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ind, out / "ind.csv")
    save_dataset(ood, out / "ood.csv")
    print(f"wrote {out / 'ind.csv'} ({ind.n} rows) and {out / 'ood.csv'} ({ood.n} rows)")
    return 0


def _detector_config(args) -> DetectorConfig:
    if not 0.0 < args.alpha < 1.0:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if not 0.0 < args.gp_fraction < 1.0:
        raise UsageError(f"--gp-fraction must lie in (0, 1), got {args.gp_fraction}")
    if args.max_gp_points is not None and args.max_gp_points < 2:
        raise UsageError("--max-gp-points must be >= 2")
    return DetectorConfig(
        alpha=args.alpha,
        gp_fraction=args.gp_fraction,
        split_seed=args.seed,
        optimizer=OptimizerConfig(seed=args.seed, n_restarts=args.restarts),
        max_gp_points=args.max_gp_points,
    )


def cmd_fit(args) -> int:
    cfg = _detector_config(args)
    ind = load_dataset(_require_file(args.ind, "--ind dataset"))
    model = fit_detector(ind, cfg)
    save_model(model, args.out)
    print(f"fit {model.K} classes (p={model.p}, alpha={cfg.alpha})")
    for k, gp in enumerate(model.gps):
        theta = gp.ls.theta
        print(
            f"  class {k}: m_gp={gp.m} theta=[{theta.min():.4g}, {theta.max():.4g}] "
            f"tau2={gp.tau2:.6g} jitter={gp.jitter_applied:g} "
            f"gamma={model.gammas[k]:.6g}"
        )
    print(f"model written to {args.out}")
    return 0


def cmd_detect(args) -> int:
    model = load_model(_require_file(args.model, "--model file"))
    ds = load_dataset(_require_file(args.ind, "--ind dataset"))
    results = detect_batch(model, ds)
    lines = ["index,predicted_class,score,threshold,margin,is_ood"]
    for i, r in enumerate(results):
        lines.append(
            f"{i},{r.predicted_class},{r.score!r},{r.threshold!r},"
            f"{r.margin!r},{int(r.is_ood)}"
        )
    Path(args.out).write_text("\n".join(lines) + "\n")
    flagged = sum(r.is_ood for r in results)
    print(f"{flagged}/{len(results)} rows flagged OOD; verdicts in {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(_require_file(args.model, "--model file"))
    ind = load_dataset(_require_file(args.ind, "--ind dataset"))
    ood = load_dataset(_require_file(args.ood, "--ood dataset"))
    report = evaluate(model, ind, ood)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "tpr": report.tpr,
        "tnr": report.tnr,
        "auroc": report.auroc,
        "n_ind": report.n_ind,
        "n_ood": report.n_ood,
    }
    (out / "report.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    sample_lines = ["margin,truth_ood,verdict_ood"]
    for m, t, v in zip(report.margins, report.truth, report.verdict):
        sample_lines.append(f"{m!r},{int(t)},{int(v)}")
    (out / "samples.csv").write_text("\n".join(sample_lines) + "\n")
    roc_lines = ["fpr,tpr"] + [f"{x!r},{y!r}" for x, y in roc_curve(report)]
    (out / "roc.csv").write_text("\n".join(roc_lines) + "\n")
    print(f"TPR  {report.tpr:.4f}  (n_ind={report.n_ind})")
    print(f"TNR  {report.tnr:.4f}  (n_ood={report.n_ood})")
    print(f"AUROC {report.auroc:.4f}")
    print(f"report written to {out}")
    return 0


def cmd_bound_check(args) -> int:
    model = load_model(_require_file(args.model, "--model file"))
    if args.ind is None and args.ood is None:
        raise UsageError("bound-check needs --ind and/or --ood")
    datasets = []
    if args.ind is not None:
        datasets.append(load_dataset(_require_file(args.ind, "--ind dataset")))
    if args.ood is not None:
        datasets.append(load_dataset(_require_file(args.ood, "--ood dataset")))
    bounds = class_bounds(model)
    lines = ["class_k,a_k,lambda_min,rhs,d_min_sq,implied_ood,detector_ood"]
    n_implied = n_detected = n_violations = 0
    for ds in datasets:
        for sample in ds.rows:
            rep = theorem_check(model, sample, precomputed=bounds)
            lines.append(
                f"{rep.class_k},{rep.a_k!r},{rep.lambda_min!r},{rep.rhs!r},"
                f"{rep.d_min_sq!r},{int(rep.implied_ood)},{int(rep.detector_ood)}"
            )
            n_implied += rep.implied_ood
            n_detected += rep.detector_ood
            n_violations += rep.implied_ood and not rep.detector_ood
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"bound implies OOD for {n_implied} rows; detector flagged {n_detected}")
    print(f"implication violations: {n_violations}")
    print(f"reports written to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    model = load_model(_require_file(args.model, "--model file"))
    cfg = model.config
    print(f"detector model: K={model.K} p={model.p}")
    print(
        f"  alpha={cfg.alpha} gp_fraction={cfg.gp_fraction} "
        f"split_seed={cfg.split_seed} max_gp_points={cfg.max_gp_points}"
    )
    for k, (gp, valid) in enumerate(zip(model.gps, model.valid_sets)):
        theta = gp.ls.theta
        print(
            f"  class {k}: m_gp={gp.m} m_valid={valid.m} "
            f"theta=[{theta.min():.4g}, {theta.max():.4g}] tau2={gp.tau2:.6g} "
            f"jitter={gp.jitter_applied:g} gamma={model.gammas[k]:.6g}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpood",
        description="GP-based out-of-distribution detection for classifier scores",
    )
    parser.add_argument("--version", action="version", version=f"gpood {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic InD/OOD datasets")
    p.add_argument("--k", type=int, default=3, help="number of classes")
    p.add_argument("--p", type=int, default=4, help="feature dimension")
    p.add_argument("--n", type=int, default=100, help="rows per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cluster-separation", type=float, default=6.0)
    p.add_argument("--ood-offset", type=float, default=20.0)
    p.add_argument("--score-scale", type=float, default=10.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a detector on labeled InD data")
    p.add_argument("--ind", required=True, help="labeled InD dataset file")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gp-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-gp-points", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=3)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="batch-classify rows of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--ind", required=True, help="dataset file with rows to classify")
    p.add_argument("--out", required=True, help="verdict CSV to write")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="evaluate TPR/TNR/AUROC on labeled test sets")
    p.add_argument("--model", required=True)
    p.add_argument("--ind", required=True, help="InD test dataset")
    p.add_argument("--ood", required=True, help="OOD test dataset")
    p.add_argument("--out", required=True, help="output directory for report files")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound-check", help="evaluate the detection bound per row")
    p.add_argument("--model", required=True)
    p.add_argument("--ind", default=None, help="dataset of probe rows")
    p.add_argument("--ood", default=None, help="additional dataset of probe rows")
    p.add_argument("--out", required=True, help="bound report CSV to write")
    p.set_defaults(func=cmd_bound_check)

    p = sub.add_parser("inspect", help="print a model file summary")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GpoodError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
