"""Command-line interface: estimate, simulate, sweep.

Exit codes: 0 success, 2 data/configuration errors, 3 estimation errors.
All randomness flows through --seed; rerunning with identical flags
reproduces outputs byte for byte (estimate reports differ only in their
timestamp field).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import DataFormatError, RdlassoError
from .io import (
    build_rdd_dataset,
    estimate_report,
    load_dgp_spec,
    read_dataset_csv,
    report_to_csv_rows,
    write_manifest,
    write_replications_csv,
    write_summary_csv,
)
from .pipeline import PipelineConfig, run_conventional, run_pipeline
from .sim import McConfig, default_dgp, run_monte_carlo, summary_rows, sweep_sample_size

KERNEL_ALIASES = {"tri": "triangular", "uni": "uniform", "epa": "epanechnikov"}

EXIT_OK = 0
EXIT_DATA = 2
EXIT_ESTIMATION = 3


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _bandwidth_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or a number, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"bandwidth must be positive, got {text}")
    return value


def _gamma_arg(text: str):
    if text == "cv":
        return "cv"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be 'cv' or a number, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"gamma must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdlasso",
        description="Sharp discontinuity estimation with automated covariate selection.",
    )
    parser.add_argument("--version", action="version", version=f"rdlasso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a treatment effect from a CSV dataset")
    est.add_argument("--data", required=True, help="path to the CSV dataset")
    est.add_argument("--outcome", required=True, help="outcome column name")
    est.add_argument("--running", required=True, help="running-variable column name")
    est.add_argument("--cutoff", type=float, default=0.0)
    est.add_argument(
        "--covariates",
        default="all",
        help="'all' or a comma-separated list of covariate columns",
    )
    est.add_argument(
        "--protect",
        default="",
        help="comma-separated covariates exempt from the penalty",
    )
    est.add_argument("--bandwidth", type=_bandwidth_arg, default="auto")
    est.add_argument("--kernel", choices=sorted(KERNEL_ALIASES), default="tri")
    est.add_argument("--gamma", type=_gamma_arg, default=2.0)
    est.add_argument("--folds", type=_positive_int, default=None)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument(
        "--conventional",
        action="store_true",
        help="also report the no-selection comparison arm",
    )
    est.add_argument("--format", choices=("json", "csv"), default="json")
    est.add_argument("--out", default=None, help="output path (default stdout)")

    simp = sub.add_parser("simulate", help="run the coverage/bias Monte Carlo")
    group = simp.add_mutually_exclusive_group(required=True)
    group.add_argument("--dgp", help="path to a JSON data-generating-process spec")
    group.add_argument(
        "--default-dgp",
        action="store_true",
        help="use the documented default design",
    )
    simp.add_argument("--n", type=_positive_int, required=True, help="observations per dataset")
    simp.add_argument("--reps", type=_positive_int, required=True)
    simp.add_argument("--seed", type=int, default=0)
    simp.add_argument("--fixed-bandwidth", type=float, default=None)
    simp.add_argument("--out-dir", required=True)

    sw = sub.add_parser("sweep", help="repeat the Monte Carlo across sample sizes")
    group = sw.add_mutually_exclusive_group(required=True)
    group.add_argument("--dgp")
    group.add_argument("--default-dgp", action="store_true")
    sw.add_argument("--n-from", type=_positive_int, required=True)
    sw.add_argument("--n-to", type=_positive_int, required=True)
    sw.add_argument("--n-by", type=_positive_int, required=True)
    sw.add_argument("--reps", type=_positive_int, required=True)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--fixed-bandwidth", type=float, default=None)
    sw.add_argument("--out-dir", required=True)
    return parser


def cmd_estimate(args) -> int:
    columns = read_dataset_csv(args.data)
    if args.covariates == "all":
        covariates = None
    else:
        covariates = [c.strip() for c in args.covariates.split(",") if c.strip()]
    protect = tuple(c.strip() for c in args.protect.split(",") if c.strip())
    data = build_rdd_dataset(
        columns, args.outcome, args.running, cutoff=args.cutoff, covariates=covariates
    )
    config = PipelineConfig(
        gamma=args.gamma,
        bandwidth=args.bandwidth,
        kernel=KERNEL_ALIASES[args.kernel],
        k_folds=args.folds,
        seed=args.seed,
        protect=protect,
    )
    result = run_pipeline(data, config)
    conventional = run_conventional(data, config) if args.conventional else None
    resolved = dict(config.as_dict(), outcome=args.outcome, running=args.running,
                    cutoff=args.cutoff, covariates=list(data.covariate_names))
    report = estimate_report(
        result,
        conventional,
        args.data,
        resolved,
        __version__,
        datetime.now(timezone.utc).isoformat(),
    )
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        lines = ["key,value"]
        for key, value in report_to_csv_rows(report):
            lines.append(f"{key},{value}")
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _resolve_dgp(args):
    if getattr(args, "default_dgp", False):
        return default_dgp(), "default"
    return load_dgp_spec(args.dgp), str(args.dgp)


def _pipeline_from_sim_args(args) -> PipelineConfig:
    bandwidth = "auto" if args.fixed_bandwidth is None else float(args.fixed_bandwidth)
    return PipelineConfig(bandwidth=bandwidth, seed=args.seed)


def cmd_simulate(args) -> int:
    dgp, dgp_source = _resolve_dgp(args)
    config = McConfig(
        dgp=dgp,
        n_obs=args.n,
        n_reps=args.reps,
        pipeline=_pipeline_from_sim_args(args),
        master_seed=args.seed,
    )
    adaptive, conventional = run_monte_carlo(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(
        out_dir / "summary.csv", [(args.n, adaptive), (args.n, conventional)]
    )
    write_replications_csv(out_dir / "replications.csv", [adaptive, conventional])
    write_manifest(
        out_dir / "manifest.json",
        {
            "command": "simulate",
            "version": __version__,
            "master_seed": args.seed,
            "n_obs": args.n,
            "n_reps": args.reps,
            "dgp_source": dgp_source,
            "dgp": dgp.as_dict(),
            "pipeline": config.pipeline.as_dict(),
            "outputs": ["summary.csv", "replications.csv"],
        },
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.n_from > args.n_to:
        raise DataFormatError(f"--n-from {args.n_from} exceeds --n-to {args.n_to}")
    dgp, dgp_source = _resolve_dgp(args)
    grid = list(range(args.n_from, args.n_to + 1, args.n_by))
    config = McConfig(
        dgp=dgp,
        n_obs=grid[0],
        n_reps=args.reps,
        pipeline=_pipeline_from_sim_args(args),
        master_seed=args.seed,
    )
    results = sweep_sample_size(config, grid)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = summary_rows(results)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["n", "arm", "coverage", "mean_bias", "mean_tau", "mean_bandwidth",
             "mean_se", "n_failed", "n_reps"]
        )
        for r in rows:
            writer.writerow(
                [r["n"], r["arm"]]
                + [format(r[k], ".12g") for k in
                   ("coverage", "mean_bias", "mean_tau", "mean_bandwidth", "mean_se")]
                + [r["n_failed"], r["n_reps"]]
            )
    write_manifest(
        out_dir / "manifest.json",
        {
            "command": "sweep",
            "version": __version__,
            "master_seed": args.seed,
            "n_grid": grid,
            "n_reps": args.reps,
            "dgp_source": dgp_source,
            "dgp": dgp.as_dict(),
            "pipeline": config.pipeline.as_dict(),
            "outputs": ["sweep.csv"],
        },
    )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"estimate": cmd_estimate, "simulate": cmd_simulate, "sweep": cmd_sweep}[
        args.command
    ]
    try:
        return handler(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RdlassoError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
