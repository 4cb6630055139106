"""Acceptance suite: one test per release criterion, each printing a PASS
line when its assertions hold. Run with ``pytest tests/test_acceptance.py -v -s``.

The Monte Carlo criteria pin their master seeds; every number they produce is
a pure function of those seeds.
"""

import json
import time

import numpy as np
import pytest
from sign_pattern import best_objective

from rdlasso import (
    McConfig,
    PenaltySpec,
    PipelineConfig,
    RddDataset,
    RdlassoError,
    default_dgp,
    design,
    fit_penalized,
    generate_dataset,
    ik_bandwidth,
    lambda_max,
    robust_bias_corrected,
    run_conventional,
    run_monte_carlo,
    run_pipeline,
    soft_threshold,
    sweep_sample_size,
    wls_fit,
)
from rdlasso.cli import main as cli_main

COVERAGE_MASTER_SEED = 20240814
SWEEP_MASTER_SEED = 20240814


def report(line):
    print(f"\nACCEPTANCE {line}", flush=True)


def test_criterion_1_solver_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(1001)
    for trial in range(100):
        n = int(rng.integers(15, 31))
        p = int(rng.integers(3, 9))
        X = rng.normal(size=(n, p))
        X[:, 0] = 1.0
        beta_true = np.where(rng.random(p) < 0.5, rng.normal(size=p), 0.0)
        y = X @ beta_true + rng.normal(size=n) * 0.6
        w = rng.uniform(0.5, 1.5, size=n)
        n_unpen = int(rng.integers(0, 3))
        unpen = frozenset(range(n_unpen))
        omega = rng.uniform(0.3, 3.0, size=p)
        lam = float(rng.uniform(0.01, 0.3))
        spec = PenaltySpec(lam, omega, unpen)
        Xd = design(X)

        fit = fit_penalized(Xd, y, w, spec)
        oracle, _ = best_objective(X, y, w, lam, spec.weights, unpen)
        assert abs(fit.objective - oracle) <= 1e-6, f"trial {trial}"

        free = fit_penalized(Xd, y, w, spec.with_lam(0.0))
        ols = wls_fit(Xd, y, w)
        assert np.max(np.abs(free.coefficients - ols.coefficients)) <= 1e-8
    elapsed = time.time() - start
    assert elapsed < 30.0
    report(f"1 solver-oracle equivalence (100 problems, {elapsed:.1f}s): PASS")


def test_criterion_2_orthonormal_closed_form():
    rng = np.random.default_rng(1002)
    n = 80
    q, _ = np.linalg.qr(rng.normal(size=(n, 6)))
    X = design(q * np.sqrt(n))
    y = rng.normal(size=n)
    omega = rng.uniform(0.5, 2.0, size=6)
    ols = wls_fit(X, y, np.ones(n)).coefficients
    spec = PenaltySpec(1.0, omega, kind="lasso")
    lmax = lambda_max(X, y, np.ones(n), spec)
    for lam in np.geomspace(lmax, 1e-3 * lmax, 20):
        fit = fit_penalized(X, y, np.ones(n), spec.with_lam(lam))
        expected = soft_threshold(ols, lam * omega)
        assert np.max(np.abs(fit.coefficients - expected)) <= 1e-8
    report("2 orthonormal closed form (20-point grid): PASS")


def test_criterion_3_bandwidth_oracle(fixture_dataset, rdd_reference):
    outcome, running = fixture_dataset
    data = RddDataset(outcome, running, 0.0)
    bw = ik_bandwidth(data, rdd_reference["kernel"])
    assert bw.h == pytest.approx(rdd_reference["ik_h"], rel=1e-4)
    robust = robust_bias_corrected(data, bw, rdd_reference["kernel"])
    assert robust.tau_hat == pytest.approx(rdd_reference["tau_robust"], rel=1e-3)
    assert robust.se == pytest.approx(rdd_reference["se_robust"], rel=1e-3)
    report(
        "3 bandwidth/robust oracle (h=%.6f tau=%.6f se=%.6f): PASS"
        % (bw.h, robust.tau_hat, robust.se)
    )


def test_criterion_4_exact_recovery_noiseless():
    base = default_dgp(n_covariates=4)
    from rdlasso import DgpSpec

    dgp = DgpSpec(
        mu=base.mu,
        sigma=base.sigma,
        tau_true=0.3,
        beta_true=np.zeros(4),
        gamma_true=0.5,
        delta_true=0.0,
        noise_sd=0.0,
    )
    data = generate_dataset(dgp, 5000, seed=1004)
    config = PipelineConfig(seed=0)
    adaptive = run_pipeline(data, config)
    conventional = run_conventional(data, config)
    assert adaptive.estimate.tau_hat == pytest.approx(0.3, abs=1e-10)
    assert conventional.estimate.tau_hat == pytest.approx(0.3, abs=1e-10)
    report(
        "4 exact recovery on noiseless linear data "
        f"(adaptive err={abs(adaptive.estimate.tau_hat - 0.3):.2e}, "
        f"conventional err={abs(conventional.estimate.tau_hat - 0.3):.2e}): PASS"
    )


def test_criterion_5_coverage_gap_variable_bandwidth():
    start = time.time()
    config = McConfig(
        dgp=default_dgp(),
        n_obs=100,
        n_reps=500,
        pipeline=PipelineConfig(seed=0),
        master_seed=COVERAGE_MASTER_SEED,
    )
    adaptive, conventional = run_monte_carlo(config, keep_per_rep=False)
    elapsed = time.time() - start
    assert 0.90 <= adaptive.coverage <= 0.98
    assert adaptive.coverage - conventional.coverage >= 0.05
    assert elapsed < 600.0
    report(
        "5 coverage gap, plug-in bandwidth (adaptive %.3f vs conventional %.3f, "
        "gap %.3f, %.0fs): PASS"
        % (adaptive.coverage, conventional.coverage,
           adaptive.coverage - conventional.coverage, elapsed)
    )


def test_criterion_6_coverage_gap_fixed_bandwidth():
    config = McConfig(
        dgp=default_dgp(),
        n_obs=100,
        n_reps=500,
        pipeline=PipelineConfig(seed=0, bandwidth=0.20),
        master_seed=COVERAGE_MASTER_SEED,
    )
    adaptive, conventional = run_monte_carlo(config, keep_per_rep=False)
    assert adaptive.coverage - conventional.coverage >= 0.05
    assert abs(adaptive.mean_tau - conventional.mean_tau) <= 0.02
    report(
        "6 coverage gap, fixed bandwidth 0.20 (gap %.3f, mean tau %.3f vs %.3f): PASS"
        % (adaptive.coverage - conventional.coverage,
           adaptive.mean_tau, conventional.mean_tau)
    )


def test_criterion_7_sample_size_sweep_shape():
    start = time.time()
    config = McConfig(
        dgp=default_dgp(),
        n_obs=80,
        n_reps=300,
        pipeline=PipelineConfig(seed=0),
        master_seed=SWEEP_MASTER_SEED,
    )
    results = sweep_sample_size(config, [80, 120, 160, 200, 300])
    gaps = {n: a.coverage - c.coverage for n, a, c in results}
    elapsed = time.time() - start
    assert gaps[80] > gaps[300]
    assert elapsed < 1800.0
    report(
        "7 sweep shape (gap at n=80: %.3f > gap at n=300: %.3f, %.0fs): PASS"
        % (gaps[80], gaps[300], elapsed)
    )


def test_criterion_8_byte_identical_reruns(tmp_path, cli_fixture_path):
    sim_dirs = [tmp_path / "s1", tmp_path / "s2"]
    for out in sim_dirs:
        code = cli_main(
            ["simulate", "--default-dgp", "--n", "100", "--reps", "6",
             "--seed", "12", "--out-dir", str(out)]
        )
        assert code == 0
    for name in ("summary.csv", "replications.csv", "manifest.json"):
        assert (sim_dirs[0] / name).read_bytes() == (sim_dirs[1] / name).read_bytes()

    reports = []
    for tag in ("e1", "e2"):
        out = tmp_path / f"{tag}.json"
        code = cli_main(
            ["estimate", "--data", str(cli_fixture_path), "--outcome", "outcome",
             "--running", "running", "--bandwidth", "0.2", "--seed", "7",
             "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        payload.pop("generated_at")
        reports.append(json.dumps(payload, sort_keys=True))
    assert reports[0] == reports[1]
    report("8 byte-identical reruns (simulate + estimate): PASS")


def test_criterion_9_fuzzed_pipeline_invariants():
    start = time.time()
    rng = np.random.default_rng(1009)
    runs = 0
    failures = 0
    for trial in range(1000):
        n = int(rng.integers(60, 161))
        p = int(rng.integers(0, 7))
        x = rng.normal(0, float(rng.uniform(0.2, 0.6)), size=n)
        y = 0.3 * (x > 0) + 0.5 * x + rng.normal(size=n)
        covs = rng.normal(size=(n, p)) if p else None
        names = tuple(f"c{i}" for i in range(p))
        if p and trial % 5 == 0:
            covs[:, 0] = 1.23  # constant column
        if p >= 2 and trial % 7 == 0:
            covs[:, 1] = covs[:, 0] * -2.0  # exact collinearity
        bandwidth = "auto" if trial % 3 else float(rng.uniform(0.15, 0.6))
        config = PipelineConfig(seed=trial, bandwidth=bandwidth)
        try:
            data = RddDataset(y, x, 0.0, design(covs, names) if p else None)
            result = run_pipeline(data, config)
        except RdlassoError:
            failures += 1
            continue
        runs += 1
        est = result.estimate
        kept = set(est.covariates_kept)
        dropped = set(est.covariates_dropped)
        assert kept | dropped == set(names)
        assert not (kept & dropped)
        if result.selection is not None:
            coef = result.selection.coefficients
            assert all(coef[j] != 0.0 for j in range(4)), "protected term lost"
    elapsed = time.time() - start
    assert runs + failures == 1000
    assert runs > 0
    report(
        "9 fuzzed invariants (1000 runs: %d estimated, %d graceful errors, %.0fs): PASS"
        % (runs, failures, elapsed)
    )
