"""Dense weighted least squares with robust standard errors.

Every fit goes through a QR factorization of the weight-scaled design; raw
normal equations are never formed. All returned objects are immutable value
types, safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDof, DimensionMismatch, InvalidSpec, RankDeficient

# Relative tolerance on the scaled R diagonal below which the weighted design
# is declared singular.
SINGULARITY_RTOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DesignMatrix:
    """Row-major real design matrix with named columns."""

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch(f"design must be 2-d, got shape {values.shape}")
        n, p = values.shape
        if n < 1 or p < 1:
            raise DimensionMismatch(f"design must have n >= 1 and p >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidSpec("design matrix contains non-finite entries")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != p:
            raise DimensionMismatch(f"{len(names)} column names for {p} columns")
        if len(set(names)) != p:
            raise InvalidSpec("column names must be unique")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def design(values: np.ndarray, column_names=None) -> DesignMatrix:
    """Build a :class:`DesignMatrix`, generating ``x0..x{p-1}`` names if absent."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if column_names is None:
        column_names = tuple(f"x{i}" for i in range(values.shape[1]))
    return DesignMatrix(values, tuple(column_names))


@dataclass(frozen=True)
class WlsFit:
    """Result of a weighted least-squares fit.

    ``dof`` is the count of strictly-positive-weight rows minus the column
    count; ``sigma2_hat`` is NaN when no residual degrees of freedom remain.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float
    xtx_inverse: np.ndarray
    dof: int
    n_effective: int
    column_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", _freeze(self.coefficients))
        object.__setattr__(self, "residuals", _freeze(self.residuals))
        object.__setattr__(self, "xtx_inverse", _freeze(self.xtx_inverse))


def _check_lengths(X: DesignMatrix, y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if len(y) != X.n or len(w) != X.n:
        raise DimensionMismatch(
            f"y has length {len(y)}, w has length {len(w)}, design has {X.n} rows"
        )
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidSpec("observation weights must be finite and nonnegative")
    return y, w


def wls_fit(X: DesignMatrix, y: np.ndarray, w: np.ndarray) -> WlsFit:
    """Fit coefficients minimizing ``sum_i w_i (y_i - x_i . beta)^2``.

    Parameters
    ----------
    X : DesignMatrix
        n-by-p design; the weighted design must have full column rank.
    y : array of length n
        Outcome.
    w : array of length n
        Nonnegative observation weights; at least p strictly positive.

    Raises
    ------
    RankDeficient
        When the scaled R diagonal of the weighted design falls below
        ``SINGULARITY_RTOL`` (collinear columns).
    DimensionMismatch
        On unequal input lengths.
    """
    y, w = _check_lengths(X, y, w)
    pos = w > 0
    n_eff = int(pos.sum())
    if n_eff < X.p:
        raise RankDeficient(
            f"only {n_eff} positive-weight observations for {X.p} columns"
        )
    sw = np.sqrt(w[pos])
    A = X.values[pos] * sw[:, None]
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.max() == 0.0 or diag.min() <= SINGULARITY_RTOL * diag.max():
        raise RankDeficient("weighted design is rank deficient")
    beta = np.linalg.solve(r, q.T @ (y[pos] * sw))
    residuals = y - X.values @ beta
    dof = n_eff - X.p
    if dof > 0:
        sigma2 = float(w[pos] @ residuals[pos] ** 2) / dof
    else:
        sigma2 = float("nan")
    r_inv = np.linalg.inv(r)
    return WlsFit(
        coefficients=beta,
        residuals=residuals,
        sigma2_hat=sigma2,
        xtx_inverse=r_inv @ r_inv.T,
        dof=dof,
        n_effective=n_eff,
        column_names=X.column_names,
    )


def hc_standard_errors(fit: WlsFit, X: DesignMatrix, w: np.ndarray) -> np.ndarray:
    """HC1 sandwich standard errors for a fit produced by :func:`wls_fit`."""
    _, w = _check_lengths(X, np.zeros(X.n), w)
    if fit.dof <= 0:
        raise DegenerateDof(f"dof = {fit.dof}; cannot estimate a robust variance")
    we = w * fit.residuals
    meat_half = X.values * we[:, None]
    cov = fit.xtx_inverse @ (meat_half.T @ meat_half) @ fit.xtx_inverse
    scale = fit.n_effective / fit.dof
    return np.sqrt(np.clip(np.diag(cov) * scale, 0.0, None))


def classical_standard_errors(fit: WlsFit) -> np.ndarray:
    """Homoskedastic standard errors ``sqrt(sigma2_hat * diag((X'WX)^-1))``."""
    if fit.dof <= 0:
        raise DegenerateDof(f"dof = {fit.dof}; cannot estimate a variance")
    return np.sqrt(fit.sigma2_hat * np.diag(fit.xtx_inverse))


def coefficient_rows(fit: WlsFit, X: DesignMatrix, w: np.ndarray) -> np.ndarray:
    """Influence matrix mapping y to coefficients: ``(X'WX)^-1 X'W``, p-by-n."""
    w = np.asarray(w, dtype=float).ravel()
    return fit.xtx_inverse @ (X.values * w[:, None]).T
