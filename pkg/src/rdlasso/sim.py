"""Deterministic Monte Carlo engine for the coverage and bias study.

Covariates plus the running margin are drawn jointly from a multivariate
normal; the outcome is a linear jump model around the cutoff at zero. Each
replication runs the selection pipeline and the conventional arm on the same
dataset. Per-replication seeds are derived from (master_seed, replication
index), so every number is a pure function of the configuration no matter how
replications are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AllRepsFailed, ConfigInvalid, NotPsd, RdlassoError
from .linreg import DesignMatrix
from .pipeline import PipelineConfig, run_conventional, run_pipeline
from .rdd import RddDataset

TRUE_EFFECT_DEFAULT = 0.3


@dataclass(frozen=True)
class DgpSpec:
    """Joint normal design for (margin, covariates) and the outcome equation."""

    mu: np.ndarray
    sigma: np.ndarray
    tau_true: float = TRUE_EFFECT_DEFAULT
    beta_true: np.ndarray | None = None
    gamma_true: float = 0.5
    delta_true: float = 0.0
    noise_sd: float = 1.0
    margin_index: int = 0

    def __post_init__(self) -> None:
        mu = np.array(self.mu, dtype=float).ravel()
        sigma = np.array(self.sigma, dtype=float)
        d = len(mu)
        if sigma.shape != (d, d):
            raise ConfigInvalid(f"sigma must be {d}x{d}, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ConfigInvalid("sigma must be symmetric")
        if not (0 <= self.margin_index < d):
            raise ConfigInvalid(f"margin_index {self.margin_index} out of range for dim {d}")
        beta = self.beta_true
        if beta is None:
            beta = np.zeros(d - 1)
        beta = np.array(beta, dtype=float).ravel()
        if len(beta) != d - 1:
            raise ConfigInvalid(f"beta_true must have length {d - 1}, got {len(beta)}")
        if self.noise_sd < 0:
            raise ConfigInvalid(f"noise_sd must be >= 0, got {self.noise_sd}")
        mu.flags.writeable = False
        sigma.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "beta_true", beta)

    @property
    def n_covariates(self) -> int:
        return len(self.mu) - 1

    def as_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "tau_true": self.tau_true,
            "beta_true": self.beta_true.tolist(),
            "gamma_true": self.gamma_true,
            "delta_true": self.delta_true,
            "noise_sd": self.noise_sd,
            "margin_index": self.margin_index,
        }


def default_dgp(
    n_covariates: int = 18,
    margin_sd: float = 0.35,
    margin_corr: float = 0.2,
    tau_true: float = TRUE_EFFECT_DEFAULT,
) -> DgpSpec:
    """Documented default design for a close-election study.

    The running margin is concentrated near the cutoff (sd 0.35, zero mean);
    covariates have unit variance, exchangeable correlation 0.3, correlation
    ``margin_corr`` with the margin, and no effect on the outcome. A generous
    covariate count keeps the no-selection comparison arm realistically
    overparameterized inside estimation windows at desk-scale sample sizes.
    """
    d = n_covariates + 1
    sigma = np.full((d, d), 0.3)
    sigma[0, :] = margin_corr * margin_sd
    sigma[:, 0] = margin_corr * margin_sd
    np.fill_diagonal(sigma, 1.0)
    sigma[0, 0] = margin_sd**2
    return DgpSpec(mu=np.zeros(d), sigma=sigma, tau_true=tau_true)


@dataclass(frozen=True)
class McConfig:
    """One Monte Carlo experiment: design, sample size, replications, arms."""

    dgp: DgpSpec
    n_obs: int
    n_reps: int
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ConfigInvalid(f"n_reps must be >= 1, got {self.n_reps}")
        if self.n_obs < 40:
            raise ConfigInvalid(f"n_obs must be >= 40, got {self.n_obs}")


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregates across usable replications of one arm."""

    arm: str
    mean_bias: float
    coverage: float
    mean_tau: float
    mean_bandwidth: float
    mean_se: float
    n_failed: int
    n_reps: int
    per_rep: tuple[dict, ...] = ()


def mvn_sample(mu: np.ndarray, sigma: np.ndarray, n: int, seed) -> np.ndarray:
    """Draw n rows from N(mu, sigma) through an eigenfactorization of sigma.

    Eigenvalues in [-tol, 0) are clipped to zero so semidefinite designs are
    accepted; a minimum eigenvalue below -1e-8 times the largest raises NotPsd.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    if n < 1:
        raise ConfigInvalid(f"n must be >= 1, got {n}")
    if sigma.shape != (len(mu), len(mu)):
        raise ConfigInvalid(f"sigma shape {sigma.shape} does not match mu length {len(mu)}")
    eigval, eigvec = np.linalg.eigh(sigma)
    if eigval.min() < -1e-8 * max(eigval.max(), 1e-300):
        raise NotPsd(f"minimum eigenvalue {eigval.min():.3e} is too negative")
    root = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(size=(n, len(mu)))
    return mu + z @ root.T


def generate_dataset(dgp: DgpSpec, n: int, seed) -> RddDataset:
    """Simulate one dataset: margin column drives a sharp cutoff at zero."""
    draws = mvn_sample(dgp.mu, dgp.sigma, n, seed)
    running = draws[:, dgp.margin_index]
    cov_cols = [j for j in range(draws.shape[1]) if j != dgp.margin_index]
    covs = draws[:, cov_cols]
    treated = (running > 0.0).astype(float)
    rng = np.random.default_rng(np.random.SeedSequence((_seed_entropy(seed), 1)))
    noise = rng.normal(0.0, dgp.noise_sd, size=n) if dgp.noise_sd > 0 else np.zeros(n)
    y = (
        dgp.tau_true * treated
        + dgp.gamma_true * running
        + dgp.delta_true * treated * running
        + covs @ dgp.beta_true
        + noise
    )
    names = tuple(f"x{j + 1}" for j in range(len(cov_cols)))
    covariates = DesignMatrix(covs, names) if len(cov_cols) else None
    return RddDataset(outcome=y, running=running, cutoff=0.0, covariates=covariates)


def _seed_entropy(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(np.random.SeedSequence(seed).entropy)


def replication_seed(master_seed: int, rep: int) -> int:
    """Counter-style seed for one replication, independent of execution order."""
    ss = np.random.SeedSequence((int(master_seed), int(rep)))
    return int(ss.generate_state(1, np.uint64)[0])


def _summarize(arm: str, records: list[dict], tau_true: float, keep_per_rep: bool) -> SimulationSummary:
    used = [r for r in records if not r["failed"]]
    n_failed = len(records) - len(used)
    if not used:
        raise AllRepsFailed(f"all {len(records)} replications failed for the {arm} arm")
    taus = np.array([r["tau_hat"] for r in used])
    ses = np.array([r["se"] for r in used])
    hs = np.array([r["bandwidth"] for r in used])
    covered = np.array([r["covered"] for r in used])
    return SimulationSummary(
        arm=arm,
        mean_bias=float(np.mean(np.abs(taus - tau_true))),
        coverage=float(covered.mean()),
        mean_tau=float(taus.mean()),
        mean_bandwidth=float(hs.mean()),
        mean_se=float(ses.mean()),
        n_failed=n_failed,
        n_reps=len(records),
        per_rep=tuple(records) if keep_per_rep else (),
    )


def _run_arm(runner, data: RddDataset, config: PipelineConfig, rep: int, tau_true: float) -> dict:
    try:
        result = runner(data, config)
    except RdlassoError as exc:
        return {
            "rep": rep,
            "failed": True,
            "error": type(exc).__name__,
            "tau_hat": float("nan"),
            "se": float("nan"),
            "ci_low": float("nan"),
            "ci_high": float("nan"),
            "bandwidth": float("nan"),
            "covered": False,
            "error_signed": float("nan"),
            "error_abs": float("nan"),
            "n_kept": -1,
        }
    est = result.estimate
    return {
        "rep": rep,
        "failed": False,
        "error": "",
        "tau_hat": est.tau_hat,
        "se": est.se,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "bandwidth": est.bandwidth.h,
        "covered": bool(est.ci_low <= tau_true <= est.ci_high),
        "error_signed": est.tau_hat - tau_true,
        "error_abs": abs(est.tau_hat - tau_true),
        "n_kept": len(est.covariates_kept),
    }


def run_monte_carlo(
    config: McConfig, keep_per_rep: bool = True
) -> tuple[SimulationSummary, SimulationSummary]:
    """Run all replications; returns (adaptive, conventional) summaries.

    Both arms see the identical dataset in each replication. Replications
    whose estimation raises a library error count toward ``n_failed`` for that
    arm and are excluded from the aggregates; true-effect knowledge is used
    only for evaluation.
    """
    adaptive_records: list[dict] = []
    conventional_records: list[dict] = []
    tau_true = config.dgp.tau_true
    for rep in range(config.n_reps):
        seed = replication_seed(config.master_seed, rep)
        data = generate_dataset(config.dgp, config.n_obs, seed)
        adaptive_records.append(_run_arm(run_pipeline, data, config.pipeline, rep, tau_true))
        conventional_records.append(
            _run_arm(run_conventional, data, config.pipeline, rep, tau_true)
        )
    return (
        _summarize("adaptive", adaptive_records, tau_true, keep_per_rep),
        _summarize("conventional", conventional_records, tau_true, keep_per_rep),
    )


def sweep_sample_size(
    config: McConfig, n_grid
) -> list[tuple[int, SimulationSummary, SimulationSummary]]:
    """Repeat the experiment across sample sizes; plot-ready long output.

    Each grid point reuses the same master seed, so a single-point grid is
    identical to a direct :func:`run_monte_carlo` call at that n.
    """
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ConfigInvalid("empty sample-size grid")
    if any(n < 40 for n in grid):
        raise ConfigInvalid("all grid entries must be >= 40")
    if sorted(grid) != grid:
        raise ConfigInvalid("sample-size grid must be sorted ascending")
    out = []
    for n in grid:
        adaptive, conventional = run_monte_carlo(
            replace(config, n_obs=n), keep_per_rep=False
        )
        out.append((n, adaptive, conventional))
    return out


def summary_rows(
    results: list[tuple[int, SimulationSummary, SimulationSummary]]
) -> list[dict]:
    """Flatten sweep output to one row per (n, arm)."""
    rows = []
    for n, adaptive, conventional in results:
        for s in (adaptive, conventional):
            rows.append(
                {
                    "n": n,
                    "arm": s.arm,
                    "coverage": s.coverage,
                    "mean_bias": s.mean_bias,
                    "mean_tau": s.mean_tau,
                    "mean_bandwidth": s.mean_bandwidth,
                    "mean_se": s.mean_se,
                    "n_failed": s.n_failed,
                    "n_reps": s.n_reps,
                }
            )
    return rows
