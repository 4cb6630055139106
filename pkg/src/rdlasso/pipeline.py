"""Four-stage estimation pipeline.

1. Accept the researcher's covariate set as supplied.
2. On the pilot window, fit the full local model by OLS, build adaptive
   penalty weights, and tune the penalty (and optionally the weight exponent)
   by cross-validation; fit the adaptive lasso with the intercept, treatment,
   running and interaction terms protected from the penalty.
3. Drop covariates with zero coefficients; under automatic bandwidth
   selection, recompute the plug-in bandwidth on the outcome with the
   surviving covariates partialled out.
4. Estimate the pruned model with bias-corrected robust inference.

Every stage appends a hash-chained entry to an audit log so a run can be
replayed and checked bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, InvalidSpec, PilotRankDeficient, RankDeficient
from .kernels import KERNELS, kernel_weights
from .linreg import DesignMatrix, wls_fit
from .penalized import (
    ADAPTIVE_LASSO,
    CvRecord,
    PenalizedFit,
    PenaltySpec,
    adaptive_weights,
    cv_select_lambda,
    fit_penalized,
)
from .rdd import (
    BASE_COLUMNS,
    BandwidthResult,
    RddDataset,
    RddEstimate,
    fixed_bandwidth,
    ik_bandwidth,
    relabel_covariates,
    robust_bias_corrected,
)

FULL_SAMPLE = "full_sample"
IK_NO_COVARIATES = "ik_no_covariates"
DEFAULT_GAMMA_CANDIDATES = (0.5, 1.0, 2.0)

# Penalized columns whose within-window content is exactly explained by the
# columns before them are screened out of the pilot fit at this tolerance.
COLLINEARITY_RTOL = 1e-10


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved choices for one pipeline run.

    ``gamma`` is either a positive exponent or the string ``"cv"`` to pick one
    of ``gamma_candidates`` by cross-validation. ``bandwidth`` is ``"auto"``
    for plug-in selection or a positive number for a fixed window.
    """

    gamma: float | str = 2.0
    gamma_candidates: tuple[float, ...] = DEFAULT_GAMMA_CANDIDATES
    bandwidth: float | str = "auto"
    kernel: str = "triangular"
    k_folds: int | None = None
    seed: int = 0
    pilot_window: str = FULL_SAMPLE
    protect: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise ConfigInvalid(f"unknown kernel {self.kernel!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise ConfigInvalid(f"bandwidth must be 'auto' or a number, got {self.bandwidth!r}")
        elif not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ConfigInvalid(f"fixed bandwidth must be positive, got {self.bandwidth}")
        if isinstance(self.gamma, str):
            if self.gamma != "cv":
                raise ConfigInvalid(f"gamma must be 'cv' or a number, got {self.gamma!r}")
            if not self.gamma_candidates:
                raise ConfigInvalid("gamma_candidates must be nonempty for gamma='cv'")
        elif not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigInvalid(f"gamma must be positive, got {self.gamma}")
        if self.k_folds is not None and self.k_folds < 2:
            raise ConfigInvalid(f"k_folds must be >= 2, got {self.k_folds}")
        object.__setattr__(self, "gamma_candidates", tuple(float(g) for g in self.gamma_candidates))
        object.__setattr__(self, "protect", tuple(str(c) for c in self.protect))

    @property
    def variable_bandwidth(self) -> bool:
        return self.bandwidth == "auto"

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "gamma_candidates": list(self.gamma_candidates),
            "bandwidth": self.bandwidth,
            "kernel": self.kernel,
            "k_folds": self.k_folds,
            "seed": self.seed,
            "pilot_window": self.pilot_window,
            "protect": list(self.protect),
        }


@dataclass(frozen=True)
class AuditStep:
    index: int
    step: str
    detail: dict
    digest: str


class _AuditLog:
    def __init__(self) -> None:
        self.steps: list[AuditStep] = []
        self._prev = ""

    def add(self, step: str, **detail) -> None:
        payload = json.dumps(detail, sort_keys=True, default=_jsonable)
        digest = hashlib.sha256((self._prev + step + payload).encode()).hexdigest()
        self.steps.append(AuditStep(len(self.steps), step, detail, digest))
        self._prev = digest

    def freeze(self) -> tuple[AuditStep, ...]:
        return tuple(self.steps)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return repr(obj)


@dataclass(frozen=True)
class PipelineResult:
    """Estimate plus the intermediate state needed to audit the run."""

    estimate: RddEstimate
    arm: str
    pilot_coefficients: dict[str, float] | None
    selection: PenalizedFit | None
    lambda_record: CvRecord | None
    gamma: float | None
    h_initial: float
    h_final: float
    audit: tuple[AuditStep, ...]
    config: PipelineConfig = field(repr=False, default=None)


def _screen_exact_collinear(
    base: np.ndarray, pen: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Mask of penalized columns that add information beyond earlier columns.

    Gram-Schmidt against the protected block and previously accepted columns
    on the positive-weight rows; a column whose residual norm falls below
    COLLINEARITY_RTOL of its own norm (constants, exact duplicates) is
    screened out and will carry a zero pilot coefficient.
    """
    pos = w > 0
    sw = np.sqrt(w[pos])
    basis: list[np.ndarray] = []
    for j in range(base.shape[1]):
        v = base[pos, j] * sw
        for b in basis:
            v = v - (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 0:
            basis.append(v / norm)
    keep = np.zeros(pen.shape[1], dtype=bool)
    for j in range(pen.shape[1]):
        col = pen[pos, j] * sw
        scale = np.linalg.norm(col)
        if scale == 0.0:
            continue
        v = col.copy()
        for b in basis:
            v = v - (b @ v) * b
        if np.linalg.norm(v) > COLLINEARITY_RTOL * scale:
            keep[j] = True
            basis.append(v / np.linalg.norm(v))
    return keep


def _full_design(data: RddDataset, covariate_names: tuple[str, ...]) -> DesignMatrix:
    z = data.centered_running
    t = data.treated.astype(float)
    cols = [np.ones(data.n), t, z, t * z]
    if covariate_names:
        idx = [data.covariate_names.index(c) for c in covariate_names]
        cols.append(data.covariates.values[:, idx])
    return DesignMatrix(np.column_stack(cols), BASE_COLUMNS + covariate_names)


def _pilot_weights(data: RddDataset, config: PipelineConfig, audit: _AuditLog) -> tuple[np.ndarray, float]:
    """Observation weights for the selection stage and the pilot bandwidth."""
    if config.pilot_window == FULL_SAMPLE:
        if config.variable_bandwidth:
            h0 = ik_bandwidth(data, config.kernel).h
        else:
            h0 = float(config.bandwidth)
        audit.add("pilot_window", mode="full_sample", h=h0)
        return np.ones(data.n), h0
    if config.pilot_window != IK_NO_COVARIATES:
        raise ConfigInvalid(f"unknown pilot_window {config.pilot_window!r}")
    if not config.variable_bandwidth:
        h0 = float(config.bandwidth)
        audit.add("pilot_window", mode="fixed", h=h0)
        return kernel_weights(data.centered_running, h0, config.kernel), h0
    bw0 = ik_bandwidth(data, config.kernel)
    audit.add("pilot_window", mode="ik_no_covariates", h=bw0.h, b=bw0.b)
    return kernel_weights(data.centered_running, bw0.h, config.kernel), bw0.h


def _final_bandwidth(
    data: RddDataset,
    config: PipelineConfig,
    kept: tuple[str, ...],
    audit: _AuditLog,
) -> BandwidthResult:
    if not config.variable_bandwidth:
        bw = fixed_bandwidth(data, float(config.bandwidth))
        audit.add("bandwidth_final", method="Fixed", h=bw.h, b=bw.b)
        return bw
    # Partial the surviving covariates out of the outcome before rerunning the
    # plug-in. The partialling fit is localized to the covariate-free plug-in
    # window — the model's own estimation context — and keeps the base terms
    # in the regression so the jump itself is not absorbed.
    if kept:
        h0 = ik_bandwidth(data, config.kernel).h
        w0 = kernel_weights(data.centered_running, h0, config.kernel)
        full = _full_design(data, kept)
        fit = wls_fit(full, data.outcome, w0)
        idx = [full.column_names.index(c) for c in kept]
        partialled = data.outcome - full.values[:, idx] @ fit.coefficients[idx]
    else:
        partialled = data.outcome
    reduced = RddDataset(partialled, data.running, data.cutoff)
    bw = ik_bandwidth(reduced, config.kernel)
    audit.add("bandwidth_final", method="IK", h=bw.h, b=bw.b, partialled=list(kept))
    return bw


def _degenerate_run(
    data: RddDataset, config: PipelineConfig, audit: _AuditLog, arm: str
) -> PipelineResult:
    audit.add("selection", note="no covariates supplied; selection skipped")
    bw = _final_bandwidth(data, config, (), audit)
    estimate = robust_bias_corrected(data, bw, config.kernel, ())
    audit.add("final_estimate", tau=estimate.tau_hat, se=estimate.se)
    h0 = bw.h if config.variable_bandwidth else float(config.bandwidth)
    return PipelineResult(
        estimate=estimate,
        arm=arm,
        pilot_coefficients=None,
        selection=None,
        lambda_record=None,
        gamma=None,
        h_initial=h0,
        h_final=bw.h,
        audit=audit.freeze(),
        config=config,
    )


def run_pipeline(data: RddDataset, config: PipelineConfig | None = None) -> PipelineResult:
    """Run selection and estimation end to end; see the module docstring.

    With no covariates the run degenerates to plain robust estimation and the
    audit log says so. Protected covariates join the unpenalized set and are
    never dropped. Raises PilotRankDeficient when the protected block plus the
    screened covariates still cannot be fit on the pilot sample.
    """
    config = config or PipelineConfig()
    audit = _AuditLog()
    names = data.covariate_names
    audit.add("covariates_received", names=list(names), protect=list(config.protect))
    unknown_protect = [c for c in config.protect if c not in names]
    if unknown_protect:
        raise InvalidSpec(f"protected covariates not in the data: {unknown_protect}")
    if not names:
        return _degenerate_run(data, config, audit, arm="adaptive")

    w_all, h_initial = _pilot_weights(data, config, audit)
    full_all = _full_design(data, names)
    # Selection runs on the pilot-window rows only; their kernel weights
    # travel along as observation weights.
    window = w_all > 0
    if int(window.sum()) < full_all.p:
        raise PilotRankDeficient(
            f"pilot window holds {int(window.sum())} observations for "
            f"{full_all.p} model columns; the covariate set is too large for "
            "this window"
        )
    full = DesignMatrix(full_all.values[window], full_all.column_names)
    y_pilot = data.outcome[window]
    w_pilot = w_all[window]
    p_base = len(BASE_COLUMNS)
    protected_idx = [p_base + names.index(c) for c in config.protect]
    unpenalized = frozenset(range(p_base)) | frozenset(protected_idx)

    pen_cols = [j for j in range(full.p) if j not in unpenalized]
    keep_mask = _screen_exact_collinear(
        full.values[:, sorted(unpenalized)], full.values[:, pen_cols], w_pilot
    )
    screened_out = [pen_cols[i] for i in range(len(pen_cols)) if not keep_mask[i]]
    fit_cols = sorted(set(range(full.p)) - set(screened_out))
    pilot_design = DesignMatrix(
        full.values[:, fit_cols], tuple(full.column_names[j] for j in fit_cols)
    )
    try:
        pilot_fit = wls_fit(pilot_design, y_pilot, w_pilot)
    except RankDeficient as exc:
        raise PilotRankDeficient(
            "full pilot model is singular on the pilot sample; "
            "the covariate set is too large for this window"
        ) from exc
    pilot_coef = np.zeros(full.p)
    pilot_coef[fit_cols] = pilot_fit.coefficients
    pilot_named = dict(zip(full.column_names, pilot_coef))
    audit.add(
        "pilot_ols",
        coefficients=pilot_named,
        screened_out=[full.column_names[j] for j in screened_out],
    )

    if config.gamma == "cv":
        best = None
        best_err = np.inf
        for g in config.gamma_candidates:
            omega_g = adaptive_weights(pilot_coef, g, unpenalized)
            spec_g = PenaltySpec(1.0, omega_g, unpenalized, ADAPTIVE_LASSO)
            rec = cv_select_lambda(
                full, y_pilot, w_pilot, spec_g, k=config.k_folds, seed=config.seed
            )
            err = float(np.min(rec.cv_mse))
            if err < best_err:
                best_err = err
                best = (g, rec, spec_g)
        gamma, record, spec = best
    else:
        gamma = float(config.gamma)
        omega = adaptive_weights(pilot_coef, gamma, unpenalized)
        spec = PenaltySpec(1.0, omega, unpenalized, ADAPTIVE_LASSO)
        record = cv_select_lambda(
            full, y_pilot, w_pilot, spec, k=config.k_folds, seed=config.seed
        )
    audit.add("lambda_cv", gamma=gamma, lambda_min=record.lambda_min, k=record.k)

    selection = fit_penalized(
        full, y_pilot, w_pilot, spec.with_lam(record.lambda_min)
    )
    dropped = tuple(
        names[j - p_base]
        for j in range(p_base, full.p)
        if selection.coefficients[j] == 0.0 and j not in unpenalized
    )
    kept = tuple(c for c in names if c not in dropped)
    audit.add(
        "selection",
        lambda_=record.lambda_min,
        gamma=gamma,
        kept=list(kept),
        dropped=list(dropped),
        converged=selection.converged,
    )

    bw = _final_bandwidth(data, config, kept, audit)
    estimate = robust_bias_corrected(data, bw, config.kernel, kept)
    estimate = relabel_covariates(estimate, kept, dropped)
    audit.add("final_estimate", tau=estimate.tau_hat, se=estimate.se)
    return PipelineResult(
        estimate=estimate,
        arm="adaptive",
        pilot_coefficients=pilot_named,
        selection=selection,
        lambda_record=record,
        gamma=gamma,
        h_initial=h_initial,
        h_final=bw.h,
        audit=audit.freeze(),
        config=config,
    )


def run_conventional(data: RddDataset, config: PipelineConfig | None = None) -> PipelineResult:
    """Comparison arm: the full covariate set, no selection stage."""
    config = config or PipelineConfig()
    audit = _AuditLog()
    names = data.covariate_names
    audit.add("covariates_received", names=list(names), protect=list(config.protect))
    if not names:
        return _degenerate_run(data, config, audit, arm="conventional")
    audit.add("selection", note="conventional arm; selection skipped")
    bw = _final_bandwidth(data, config, names, audit)
    estimate = robust_bias_corrected(data, bw, config.kernel, names)
    audit.add("final_estimate", tau=estimate.tau_hat, se=estimate.se)
    h0 = bw.h if config.variable_bandwidth else float(config.bandwidth)
    return PipelineResult(
        estimate=estimate,
        arm="conventional",
        pilot_coefficients=None,
        selection=None,
        lambda_record=None,
        gamma=None,
        h_initial=h0,
        h_final=bw.h,
        audit=audit.freeze(),
        config=config,
    )
