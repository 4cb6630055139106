"""File formats: dataset CSV ingestion, DGP specification files, and report
serialization. Parsing is strict — a malformed cell fails with its location
rather than being coerced."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .linreg import DesignMatrix
from .pipeline import PipelineResult
from .rdd import RddDataset
from .sim import DgpSpec, SimulationSummary

# Summary outputs round to 12 significant digits: reproducible across
# platforms without printing noise digits.
def fmt12(x) -> str:
    return format(float(x), ".12g")


def read_dataset_csv(path) -> dict[str, np.ndarray]:
    """Read a delimited dataset with a header row; every column numeric."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataFormatError(f"{path}: duplicate column names in header")
        columns: list[list[float]] = [[] for _ in header]
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            for j, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {row_num}, column {header[j]!r}: "
                        f"could not parse {cell.strip()!r} as a number"
                    ) from None
                columns[j].append(value)
    if not columns[0]:
        raise DataFormatError(f"{path}: no data rows")
    return {name: np.array(col) for name, col in zip(header, columns)}


def build_rdd_dataset(
    columns: dict[str, np.ndarray],
    outcome: str,
    running: str,
    cutoff: float = 0.0,
    covariates=None,
) -> RddDataset:
    """Assemble an estimation dataset from named columns.

    ``covariates=None`` means every remaining column; pass an explicit list to
    restrict.
    """
    for required in (outcome, running):
        if required not in columns:
            raise DataFormatError(f"required column {required!r} not found in the data")
    if covariates is None:
        cov_names = [c for c in columns if c not in (outcome, running)]
    else:
        cov_names = list(covariates)
        missing = [c for c in cov_names if c not in columns]
        if missing:
            raise DataFormatError(f"covariate columns not found: {missing}")
    cov = None
    if cov_names:
        cov = DesignMatrix(
            np.column_stack([columns[c] for c in cov_names]), tuple(cov_names)
        )
    return RddDataset(
        outcome=columns[outcome],
        running=columns[running],
        cutoff=cutoff,
        covariates=cov,
    )


def write_dataset_csv(path, data: RddDataset) -> None:
    """Write a dataset at full float precision so a round trip is exact."""
    names = ("outcome", "running") + data.covariate_names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.n):
            row = [repr(float(data.outcome[i])), repr(float(data.running[i]))]
            if data.covariates is not None:
                row.extend(repr(float(v)) for v in data.covariates.values[i])
            writer.writerow(row)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


DGP_KEYS = (
    "mu",
    "sigma",
    "tau_true",
    "beta_true",
    "gamma_true",
    "delta_true",
    "noise_sd",
    "margin_index",
)


def load_dgp_spec(path) -> DgpSpec:
    """Read a DGP specification file: strict JSON, all keys required."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise DataFormatError(f"{path}: expected a JSON object at the top level")
    missing = [k for k in DGP_KEYS if k not in raw]
    if missing:
        raise DataFormatError(f"{path}: missing required keys {missing}")
    unknown = [k for k in raw if k not in DGP_KEYS]
    if unknown:
        raise DataFormatError(f"{path}: unknown keys {unknown}")
    try:
        return DgpSpec(
            mu=np.array(raw["mu"], dtype=float),
            sigma=np.array(raw["sigma"], dtype=float),
            tau_true=float(raw["tau_true"]),
            beta_true=np.array(raw["beta_true"], dtype=float),
            gamma_true=float(raw["gamma_true"]),
            delta_true=float(raw["delta_true"]),
            noise_sd=float(raw["noise_sd"]),
            margin_index=int(raw["margin_index"]),
        )
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed value ({exc})") from exc


def estimate_report(
    result: PipelineResult,
    conventional: PipelineResult | None,
    input_path,
    resolved_config: dict,
    version: str,
    timestamp: str,
) -> dict:
    report = {
        "tool": "rdlasso",
        "version": version,
        "input_file": str(input_path),
        "input_sha256": file_sha256(input_path),
        "generated_at": timestamp,
        "config": resolved_config,
        "adaptive": pipeline_result_dict(result),
    }
    if conventional is not None:
        report["conventional"] = pipeline_result_dict(conventional)
    return report


def pipeline_result_dict(result: PipelineResult) -> dict:
    est = result.estimate
    out = {
        "arm": result.arm,
        "tau_hat": est.tau_hat,
        "se": est.se,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "estimator": est.estimator,
        "n_effective": est.n_effective,
        "bandwidth": {
            "h": est.bandwidth.h,
            "b": est.bandwidth.b,
            "method": est.bandwidth.method,
            "n_left": est.bandwidth.n_left,
            "n_right": est.bandwidth.n_right,
        },
        "covariates_kept": list(est.covariates_kept),
        "covariates_dropped": list(est.covariates_dropped),
        "h_initial": result.h_initial,
        "h_final": result.h_final,
        "gamma": result.gamma,
        "pilot_coefficients": result.pilot_coefficients,
        "audit": [
            {"index": s.index, "step": s.step, "detail": _plain(s.detail), "digest": s.digest}
            for s in result.audit
        ],
    }
    if result.lambda_record is not None:
        out["lambda_min"] = result.lambda_record.lambda_min
        out["cv_folds"] = result.lambda_record.k
    if result.selection is not None:
        out["selection_converged"] = result.selection.converged
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def report_to_csv_rows(report: dict) -> list[tuple[str, str]]:
    """Flatten a report to (key, value) rows, skipping the audit log."""
    rows: list[tuple[str, str]] = []

    def walk(key, value):
        if key.endswith(".audit") or key == "audit":
            return
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{key}.{k}" if key else k, v)
        elif isinstance(value, (list, tuple)):
            rows.append((key, ";".join(str(v) for v in value)))
        elif isinstance(value, float):
            rows.append((key, fmt12(value)))
        else:
            rows.append((key, str(value)))

    walk("", report)
    return rows


SUMMARY_FIELDS = (
    "arm",
    "n_obs",
    "n_reps",
    "n_failed",
    "mean_bias",
    "coverage",
    "mean_tau",
    "mean_bandwidth",
    "mean_se",
)


def write_summary_csv(path, summaries: list[tuple[int, SimulationSummary]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for n_obs, s in summaries:
            writer.writerow(
                [
                    s.arm,
                    n_obs,
                    s.n_reps,
                    s.n_failed,
                    fmt12(s.mean_bias),
                    fmt12(s.coverage),
                    fmt12(s.mean_tau),
                    fmt12(s.mean_bandwidth),
                    fmt12(s.mean_se),
                ]
            )


REPLICATION_FIELDS = (
    "rep",
    "arm",
    "failed",
    "error",
    "tau_hat",
    "se",
    "ci_low",
    "ci_high",
    "bandwidth",
    "covered",
    "error_signed",
    "error_abs",
    "n_kept",
)


def write_replications_csv(path, summaries: list[SimulationSummary]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATION_FIELDS)
        for s in summaries:
            for r in s.per_rep:
                writer.writerow(
                    [
                        r["rep"],
                        s.arm,
                        int(r["failed"]),
                        r["error"],
                        fmt12(r["tau_hat"]),
                        fmt12(r["se"]),
                        fmt12(r["ci_low"]),
                        fmt12(r["ci_high"]),
                        fmt12(r["bandwidth"]),
                        int(r["covered"]),
                        fmt12(r["error_signed"]),
                        fmt12(r["error_abs"]),
                        r["n_kept"],
                    ]
                )


def write_manifest(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_plain_json)
        fh.write("\n")


def _plain_json(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, DgpSpec):
        return obj.as_dict()
    return str(obj)
