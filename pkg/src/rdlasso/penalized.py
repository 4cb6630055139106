"""Weighted penalized linear models: ridge, lasso, and adaptive lasso.

The solver minimizes

    (1/2n) * sum_i w_i (y_i - x_i . beta)^2  +  lam * sum_j omega_j * pen(beta_j)

where ``pen`` is ``|beta_j|`` for the lasso/adaptive kinds and ``beta_j**2``
for ridge, and the penalty acts on original-scale coefficients. Coordinates in
the unpenalized index set carry weight zero and are updated by exact
partial-residual least squares each sweep; penalized coordinates are updated
by cyclic coordinate descent. Columns are standardized internally for
conditioning only — thresholds are rescaled so the minimized objective is
exactly the one above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllUnpenalized,
    DimensionMismatch,
    InvalidGamma,
    InvalidSpec,
    RankDeficient,
    TooFewObservations,
)
from .linreg import DesignMatrix, wls_fit

RIDGE = "ridge"
LASSO = "lasso"
ADAPTIVE_LASSO = "adaptive_lasso"
PENALTY_KINDS = (RIDGE, LASSO, ADAPTIVE_LASSO)

# Pilot coefficients below this magnitude get the capped adaptive weight.
PILOT_ZERO_TOL = 1e-10
CAPPED_WEIGHT = 1e10

CONVERGENCE_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 10_000
# Path fits inside cross-validation stop earlier: the deep-lambda tail of an
# underdetermined training fold can drift below the coefficient tolerance for
# thousands of sweeps without changing held-out error in any digit that
# matters, and those points are never selected.
CV_MAX_SWEEPS = 1_000


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty strength, per-coefficient weights and the protected index set.

    Weights for indices in ``unpenalized`` are forced to zero at construction.
    """

    lam: float
    weights: np.ndarray
    unpenalized: frozenset[int] = frozenset()
    kind: str = ADAPTIVE_LASSO

    def __post_init__(self) -> None:
        if self.kind not in PENALTY_KINDS:
            raise InvalidSpec(f"unknown penalty kind {self.kind!r}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidSpec(f"lam must be finite and >= 0, got {self.lam}")
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise InvalidSpec("penalty weights must be a vector")
        if not np.all(np.isfinite(w)):
            raise InvalidSpec("penalty weights must be finite")
        if np.any(w < 0):
            raise InvalidSpec("penalty weights must be nonnegative")
        unpen = frozenset(int(j) for j in self.unpenalized)
        for j in unpen:
            if j < 0 or j >= len(w):
                raise InvalidSpec(f"unpenalized index {j} out of range for p={len(w)}")
            w[j] = 0.0
        w.flags.writeable = False
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "unpenalized", unpen)

    @property
    def p(self) -> int:
        return len(self.weights)

    def with_lam(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(lam, self.weights, self.unpenalized, self.kind)


@dataclass(frozen=True)
class PenalizedFit:
    """Converged (or flagged) solution of the penalized problem."""

    coefficients: np.ndarray
    lam: float
    active_set: tuple[int, ...]
    n_iter: int
    converged: bool
    objective: float
    objective_trace: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coefficients, dtype=float)
        c.flags.writeable = False
        t = np.array(self.objective_trace, dtype=float)
        t.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "objective_trace", t)


@dataclass(frozen=True)
class CvRecord:
    """Cross-validation trace over a descending lambda grid."""

    lambda_grid: np.ndarray
    cv_mse: np.ndarray
    cv_se: np.ndarray
    lambda_min: float
    k: int
    fold_assignment: np.ndarray

    def __post_init__(self) -> None:
        for name in ("lambda_grid", "cv_mse", "cv_se", "fold_assignment"):
            a = np.array(getattr(self, name))
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def soft_threshold(z: float, t: float):
    """``sign(z) * max(|z| - t, 0)`` for scalar or array z, t >= 0."""
    if np.any(np.asarray(t) < 0):
        raise InvalidSpec(f"threshold must be nonnegative, got {t}")
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _validate_inputs(X: DesignMatrix, y, obs_weights, spec: PenaltySpec):
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(obs_weights, dtype=float).ravel()
    if len(y) != X.n or len(w) != X.n:
        raise DimensionMismatch(
            f"y length {len(y)}, weights length {len(w)}, design rows {X.n}"
        )
    if spec.p != X.p:
        raise DimensionMismatch(f"penalty has {spec.p} weights for {X.p} columns")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidSpec("observation weights must be finite and nonnegative")
    return y, w


class _Workspace:
    """Precomputed state for solving one (X, y, w, weights/kind) family.

    The penalized block is orthogonalized against the protected block in the
    weighted inner product (an exact reparameterization that leaves every
    penalized coefficient, and therefore the penalty, unchanged), then scaled
    to unit weighted norm. The protected block thereby stays at its exact
    partial-residual least-squares solution throughout the sweeps and is
    recovered by one solve at the end. Zero-weight rows are dropped once —
    they never influence the solution — while the objective keeps the full
    row count in its 1/(2n) scaling. Building one workspace per
    cross-validation fold is what makes the path affordable.
    """

    def __init__(self, X: DesignMatrix, y: np.ndarray, w: np.ndarray, spec: PenaltySpec):
        self.n, self.p = X.n, X.p
        self.kind = spec.kind
        self.unpen_idx = np.array(sorted(spec.unpenalized), dtype=int)
        self.pen_idx = np.array(
            [j for j in range(X.p) if j not in spec.unpenalized], dtype=int
        )
        wsum = float(w.sum())
        if wsum <= 0:
            raise InvalidSpec("all observation weights are zero")
        pos = w > 0
        self.wp = w[pos]
        self.yp = y[pos]
        self.U = X.values[np.ix_(pos, self.unpen_idx)] if len(self.unpen_idx) else None
        self.Xp = X.values[:, self.pen_idx][pos]
        self.omega = spec.weights[self.pen_idx]

        if self.U is not None:
            sw = np.sqrt(self.wp)
            q, r = np.linalg.qr(self.U * sw[:, None])
            diag = np.abs(np.diag(r))
            if diag.max() == 0.0 or diag.min() <= 1e-12 * diag.max():
                raise RankDeficient("unpenalized block is rank deficient")
            # beta_u = proj @ target solves the weighted LS problem exactly.
            self.proj = (np.linalg.inv(r) @ q.T) * sw[None, :]
            D = self.Xp - self.U @ (self.proj @ self.Xp)
            self.yt = self.yp - self.U @ (self.proj @ self.yp)
        else:
            self.proj = None
            D = self.Xp
            self.yt = self.yp
        self.s = np.sqrt((self.wp @ D**2) / wsum)
        self.live = self.s > 0
        Z = np.divide(D, self.s, out=np.zeros_like(D), where=self.live)
        safe_s = np.where(self.live, self.s, 1.0)
        self.omega_std = np.where(self.live, self.omega / safe_s, 0.0)
        self.pen_vec = np.where(
            self.live, self.omega / (safe_s**2 if self.kind == RIDGE else safe_s), 0.0
        )
        self.live_cols = [int(j) for j in np.nonzero(self.live)[0]]
        # Gram form of the subproblem: rho_j is an exact O(p) function of the
        # current coefficients, so sweeps carry no accumulation drift and cost
        # nothing in n.
        WZ = Z * self.wp[:, None]
        self.gram = (WZ.T @ Z) / self.n
        self.q = (WZ.T @ self.yt) / self.n
        self.cj = np.ascontiguousarray(np.diag(self.gram))
        self._loss0 = 0.5 * float(self.wp @ self.yt**2) / self.n
        self._gram_rows = list(self.gram)

    def descend(self, lam: float, beta_z, max_sweeps: int, record_trace=True):
        """Run sweeps at penalty lam from a standardized warm start.

        Returns (beta_z, trace, n_iter, converged); beta_z is mutated in place.
        """
        gram_rows = self._gram_rows
        q = self.q.tolist()
        cj = self.cj.tolist()
        ridge = self.kind == RIDGE
        thresholds = (lam * self.omega_std).tolist()
        ridge_denom = (self.cj + 2.0 * lam * self.pen_vec).tolist() if ridge else None

        trace = []
        converged = False
        sweeps = 0
        # Full sweeps alternate with cheaper sweeps over the current active
        # set; convergence is only declared after a clean full sweep.
        on_active_set = False
        while sweeps < max_sweeps:
            sweeps += 1
            cols = (
                [j for j in self.live_cols if beta_z[j] != 0.0]
                if on_active_set
                else self.live_cols
            )
            delta_max = 0.0
            for j in cols:
                bj = beta_z[j]
                rho = q[j] - gram_rows[j] @ beta_z + cj[j] * bj
                if ridge:
                    new = rho / ridge_denom[j]
                else:
                    az = abs(rho) - thresholds[j]
                    new = (az if rho > 0 else -az) / cj[j] if az > 0.0 else 0.0
                d = new - bj
                if d != 0.0:
                    beta_z[j] = new
                    if abs(d) > delta_max:
                        delta_max = abs(d)
            if record_trace:
                loss = (
                    self._loss0
                    - float(self.q @ beta_z)
                    + 0.5 * float(beta_z @ self.gram @ beta_z)
                )
                pen = float(self.pen_vec @ (beta_z**2 if ridge else np.abs(beta_z)))
                trace.append(loss + lam * pen)
            if delta_max < CONVERGENCE_TOL:
                if on_active_set:
                    on_active_set = False
                else:
                    converged = True
                    break
            else:
                on_active_set = True
        return beta_z, trace, sweeps, converged

    def original_scale(self, beta_z: np.ndarray) -> np.ndarray:
        """Assemble the full-length coefficient vector on the original scale.

        The protected block is re-solved against the original-scale partial
        residual, which is its exact partial-residual least-squares solution.
        """
        beta = np.zeros(self.p)
        beta_pen = np.divide(beta_z, self.s, out=np.zeros_like(beta_z), where=self.live)
        beta[self.pen_idx] = beta_pen
        if self.proj is not None:
            beta[self.unpen_idx] = self.proj @ (self.yp - self.Xp @ beta_pen)
        return beta

    def standardized_init(self, init: np.ndarray | None) -> np.ndarray:
        if init is None:
            return np.zeros(len(self.pen_idx))
        init = np.asarray(init, dtype=float).ravel()
        if len(init) != self.p:
            raise DimensionMismatch(f"init has length {len(init)}, expected {self.p}")
        return np.where(self.live, init[self.pen_idx] * self.s, 0.0)


def _objective(Xv, y, w, beta, spec: PenaltySpec) -> float:
    r = y - Xv @ beta
    loss = 0.5 * float(w @ r**2) / len(y)
    if spec.kind == RIDGE:
        pen = float(spec.weights @ beta**2)
    else:
        pen = float(spec.weights @ np.abs(beta))
    return loss + spec.lam * pen


def fit_penalized(
    X: DesignMatrix,
    y: np.ndarray,
    obs_weights: np.ndarray,
    spec: PenaltySpec,
    init: np.ndarray | None = None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> PenalizedFit:
    """Solve the penalized weighted least-squares problem by coordinate descent.

    Parameters
    ----------
    X, y, obs_weights
        Data; weights nonnegative, dimensions matching.
    spec : PenaltySpec
        Penalty strength, per-coefficient weights, protected index set, kind.
    init : optional coefficient vector
        Warm start on the original scale.
    max_sweeps : int
        Sweep budget; on exhaustion the fit is returned with
        ``converged=False`` rather than raising.

    Notes
    -----
    Convergence is declared when the largest coefficient move within a sweep
    (standardized scale for penalized coordinates) drops below 1e-7. The
    recorded objective trace is non-increasing across sweeps. At ``lam == 0``
    the problem is plain weighted least squares and is solved exactly.
    """
    y, w = _validate_inputs(X, y, obs_weights, spec)

    if spec.lam == 0.0:
        fit = wls_fit(X, y, w)
        beta = fit.coefficients
        obj = _objective(X.values, y, w, beta, spec)
        return PenalizedFit(
            coefficients=beta,
            lam=0.0,
            active_set=tuple(np.nonzero(beta != 0.0)[0]),
            n_iter=0,
            converged=True,
            objective=obj,
            objective_trace=np.array([obj]),
        )

    ws = _Workspace(X, y, w, spec)
    beta_z = ws.standardized_init(init)
    beta_z, trace, sweeps, converged = ws.descend(spec.lam, beta_z, max_sweeps)
    beta = ws.original_scale(beta_z)
    obj = _objective(X.values, y, w, beta, spec)
    return PenalizedFit(
        coefficients=beta,
        lam=spec.lam,
        active_set=tuple(int(j) for j in np.nonzero(beta != 0.0)[0]),
        n_iter=sweeps,
        converged=converged,
        objective=obj,
        objective_trace=np.asarray(trace),
    )


def lambda_max(
    X: DesignMatrix, y: np.ndarray, obs_weights: np.ndarray, spec: PenaltySpec
) -> float:
    """Smallest penalty at which every positively-weighted coefficient is zero.

    Computed as ``max_j |x_j' W r| / (n * omega_j)`` over penalized columns,
    where r is the weighted residual from regressing y on the unpenalized
    columns alone (columns with zero penalty weight count as unpenalized here).
    The returned value is inflated by 1e-12 relative so the boundary holds
    exactly under floating-point thresholding.
    """
    y, w = _validate_inputs(X, y, obs_weights, spec)
    free = sorted(set(spec.unpenalized) | {j for j in range(X.p) if spec.weights[j] == 0.0})
    pen = [j for j in range(X.p) if spec.weights[j] > 0.0]
    if not pen:
        raise AllUnpenalized("no column carries a positive penalty weight")
    if free:
        sub = DesignMatrix(X.values[:, free], tuple(X.column_names[j] for j in free))
        r = wls_fit(sub, y, w).residuals
    else:
        r = y
    n = X.n
    scores = np.abs((X.values[:, pen] * w[:, None]).T @ r) / (n * spec.weights[pen])
    return float(scores.max() * (1.0 + 1e-12))


def adaptive_weights(
    beta_pilot: np.ndarray, gamma: float, unpenalized=frozenset()
) -> np.ndarray:
    """Per-coefficient weights ``1 / |beta_j|**gamma`` from a pilot fit.

    Pilot coefficients with magnitude below 1e-10 receive the capped weight
    1e10, which forces the coordinate out of the model at any positive
    penalty. Unpenalized indices get weight zero.
    """
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidGamma(f"gamma must be > 0, got {gamma}")
    beta = np.asarray(beta_pilot, dtype=float).ravel()
    mag = np.abs(beta)
    out = np.where(
        mag < PILOT_ZERO_TOL, CAPPED_WEIGHT, 1.0 / np.maximum(mag, PILOT_ZERO_TOL) ** gamma
    )
    out = np.minimum(out, CAPPED_WEIGHT)
    for j in unpenalized:
        out[int(j)] = 0.0
    return out


def default_fold_count(n: int, k: int = 10) -> int:
    """Fold count clamped for small samples: floor(n/10) with minimum 5 below n=100."""
    if n >= 100:
        return k
    return max(5, min(k, n // 10))


def cv_select_lambda(
    X: DesignMatrix,
    y: np.ndarray,
    obs_weights: np.ndarray,
    spec_template: PenaltySpec,
    k: int | None = None,
    grid_size: int = 100,
    seed: int = 0,
) -> CvRecord:
    """Select the penalty by k-fold cross-validation over a log-spaced grid.

    The grid descends from ``lambda_max`` to ``1e-4 * lambda_max``; each fold
    fits the whole path with warm starts; held-out error is the weighted mean
    squared prediction error. ``lambda_min`` minimizes the mean CV error with
    ties broken toward larger lambda (the sparser model).
    """
    y, w = _validate_inputs(X, y, obs_weights, spec_template)
    n = X.n
    if k is None:
        k = default_fold_count(n)
    if k < 2:
        raise InvalidSpec(f"need at least 2 folds, got {k}")
    # k == n is leave-one-out, always well-defined; below that each fold
    # needs at least two rows on average.
    if n < 2 * k and k != n:
        raise TooFewObservations(f"n={n} is below 2k={2 * k}")

    lmax = max(lambda_max(X, y, w, spec_template), 1e-12)
    grid = np.geomspace(lmax, 1e-4 * lmax, grid_size)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_assignment = np.empty(n, dtype=int)
    bounds = np.linspace(0, n, k + 1).astype(int)
    for f in range(k):
        fold_assignment[perm[bounds[f] : bounds[f + 1]]] = f

    fold_mse = np.empty((k, grid_size))
    for f in range(k):
        held = fold_assignment == f
        train = ~held
        X_train = DesignMatrix(X.values[train], X.column_names)
        ws = _Workspace(X_train, y[train], w[train], spec_template)
        X_held, y_held, w_held = X.values[held], y[held], w[held]
        w_held_sum = float(w_held.sum())
        beta_z = ws.standardized_init(None)
        for i, lam in enumerate(grid):
            beta_z, _, _, _ = ws.descend(lam, beta_z, CV_MAX_SWEEPS, record_trace=False)
            err = y_held - X_held @ ws.original_scale(beta_z)
            if w_held_sum > 0:
                fold_mse[f, i] = float(w_held @ err**2) / w_held_sum
            else:
                fold_mse[f, i] = float(np.mean(err**2))

    cv_mse = fold_mse.mean(axis=0)
    cv_se = fold_mse.std(axis=0, ddof=1) / np.sqrt(k)
    i_min = int(np.argmin(cv_mse))  # first minimum = largest lambda on a descending grid
    return CvRecord(
        lambda_grid=grid,
        cv_mse=cv_mse,
        cv_se=cv_se,
        lambda_min=float(grid[i_min]),
        k=k,
        fold_assignment=fold_assignment,
    )


def cv_select_gamma(
    X: DesignMatrix,
    y: np.ndarray,
    obs_weights: np.ndarray,
    candidates=(0.5, 1.0, 2.0),
    k: int | None = None,
    seed: int = 0,
    unpenalized=frozenset(),
) -> tuple[float, CvRecord]:
    """Pick the adaptive-weight exponent with the smallest cross-validated MSE.

    For each candidate, weights come from the pilot OLS fit and the penalty is
    tuned by :func:`cv_select_lambda`; the (gamma, record) pair minimizing the
    CV error at its lambda_min wins, earlier candidates winning exact ties.
    """
    candidates = tuple(float(g) for g in candidates)
    if not candidates:
        raise InvalidGamma("candidate list is empty")
    for g in candidates:
        if g <= 0:
            raise InvalidGamma(f"gamma candidates must be > 0, got {g}")
    y_arr = np.asarray(y, dtype=float).ravel()
    w_arr = np.asarray(obs_weights, dtype=float).ravel()
    pilot = wls_fit(X, y_arr, w_arr)

    best: tuple[float, CvRecord] | None = None
    best_err = np.inf
    for g in candidates:
        omega = adaptive_weights(pilot.coefficients, g, unpenalized)
        spec = PenaltySpec(1.0, omega, frozenset(unpenalized), ADAPTIVE_LASSO)
        record = cv_select_lambda(X, y_arr, w_arr, spec, k=k, seed=seed)
        err = float(record.cv_mse[int(np.argmin(record.cv_mse))])
        if err < best_err:
            best_err = err
            best = (g, record)
    assert best is not None
    return best
