"""Kernel weight functions and boundary constants for local regression."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial

KERNELS = ("triangular", "uniform", "epanechnikov")

# Kernel shapes on [0, 1] as polynomial coefficients (constant term first).
_KERNEL_POLY = {
    "triangular": (1.0, -1.0),
    "uniform": (1.0,),
    "epanechnikov": (0.75, 0.0, -0.75),
}


def _check_kind(kind: str) -> str:
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS}")
    return kind


def kernel_weight(u, kind: str = "triangular"):
    """Evaluate the kernel at scaled distance ``u = (F - cutoff) / h``.

    triangular: max(1 - |u|, 0); uniform: 1 on |u| <= 1; epanechnikov:
    0.75 * max(1 - u^2, 0).
    """
    _check_kind(kind)
    u = np.abs(np.asarray(u, dtype=float))
    if kind == "triangular":
        out = np.maximum(1.0 - u, 0.0)
    elif kind == "uniform":
        out = np.where(u <= 1.0, 1.0, 0.0)
    else:
        out = 0.75 * np.maximum(1.0 - u**2, 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_weights(z: np.ndarray, h: float, kind: str = "triangular") -> np.ndarray:
    """Vector of kernel weights for centered running values at bandwidth h."""
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    return kernel_weight(np.asarray(z, dtype=float) / h, kind)


def _one_sided_moment(poly: Polynomial, j: int) -> float:
    integ = (poly * Polynomial([0.0, 1.0]) ** j).integ()
    return float(integ(1.0) - integ(0.0))


def boundary_constants(kind: str = "triangular") -> tuple[float, float]:
    """(variance, bias) constants of the boundary-equivalent local-linear kernel.

    The equivalent kernel at a boundary point is
    ``q(u) = (mu2 - mu1*u) K(u) / (mu0*mu2 - mu1^2)`` with one-sided moments
    ``mu_j = int_0^1 u^j K(u) du``. Returns ``(int q^2, int u^2 q / 2)``.
    All three supported kernels are polynomials, so the integrals are exact.
    """
    _check_kind(kind)
    K = Polynomial(_KERNEL_POLY[kind])
    mu = [_one_sided_moment(K, j) for j in range(3)]
    det = mu[0] * mu[2] - mu[1] ** 2
    q = K * Polynomial([mu[2], -mu[1]]) / det
    v = _one_sided_moment(q * q, 0)
    b = _one_sided_moment(q, 2) / 2.0
    return v, b


def plugin_constant(kind: str = "triangular") -> float:
    """MSE-optimal bandwidth constant ``(v / (4 b^2))^(1/5)`` for the kernel."""
    v, b = boundary_constants(kind)
    return float((v / (4.0 * b * b)) ** 0.2)
