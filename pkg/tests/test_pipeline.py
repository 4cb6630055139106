import numpy as np
import pytest

from rdlasso import (
    ConfigInvalid,
    InvalidSpec,
    PilotRankDeficient,
    PipelineConfig,
    RddDataset,
    design,
    ik_bandwidth,
    robust_bias_corrected,
    run_conventional,
    run_pipeline,
)

BASE_TERMS = {"(intercept)", "treated", "running_c", "treated_x_running"}


def jump_data(seed, n=300, p=4, beta=None, noise=1.0, margin_sd=0.35, orthogonal_noise=False):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, margin_sd, size=n)
    covs = rng.normal(size=(n, p)) if p else None
    beta = np.zeros(p) if beta is None else np.asarray(beta, dtype=float)
    y = 0.3 * (x > 0) + 0.5 * x + rng.normal(size=n) * noise
    if p:
        y = y + covs @ beta
        if orthogonal_noise:
            t = (x > 0).astype(float)
            basis = np.column_stack([np.ones(n), t, x, t * x, y])
            q, _ = np.linalg.qr(basis)
            covs = covs - q @ (q.T @ covs)
    cov_design = design(covs, tuple(f"c{i}" for i in range(p))) if p else None
    return RddDataset(outcome=y, running=x, cutoff=0.0, covariates=cov_design)


class TestRunPipeline:
    def test_null_covariates_dropped_and_covered(self):
        # Null covariates purged of realized spurious correlation: selection
        # must remove every one of them, and the final intervals stay honest.
        drops = 0
        covered = 0
        n_seeds = 200
        for seed in range(n_seeds):
            data = jump_data(seed, n=500, p=7, orthogonal_noise=True)
            result = run_pipeline(data, PipelineConfig(seed=seed))
            est = result.estimate
            drops += int(len(est.covariates_dropped) == 7)
            covered += int(est.ci_low <= 0.3 <= est.ci_high)
        assert drops >= 0.8 * n_seeds
        assert 0.92 <= covered / n_seeds <= 0.98

    def test_zero_covariates_degenerates_to_plain_robust(self):
        data = jump_data(1, p=0)
        result = run_pipeline(data, PipelineConfig(seed=0))
        bw = ik_bandwidth(data)
        direct = robust_bias_corrected(data, bw)
        assert result.estimate == direct
        assert result.selection is None
        notes = " ".join(str(step.detail) for step in result.audit)
        assert "selection skipped" in notes

    def test_bit_identical_rerun(self):
        data = jump_data(2, p=5)
        config = PipelineConfig(seed=9)
        a = run_pipeline(data, config)
        b = run_pipeline(data, config)
        assert a.estimate == b.estimate
        assert [s.digest for s in a.audit] == [s.digest for s in b.audit]
        assert np.array_equal(a.lambda_record.cv_mse, b.lambda_record.cv_mse)

    def test_partition_and_protected_terms(self):
        data = jump_data(3, p=6)
        result = run_pipeline(data, PipelineConfig(seed=1))
        est = result.estimate
        kept = set(est.covariates_kept)
        dropped = set(est.covariates_dropped)
        assert kept | dropped == set(data.covariate_names)
        assert not (kept & dropped)
        assert result.selection is not None
        names = ("(intercept)", "treated", "running_c", "treated_x_running")
        sel = dict(zip(names + data.covariate_names, result.selection.coefficients))
        for term in names:
            assert sel[term] != 0.0

    def test_protected_covariate_never_dropped(self):
        data = jump_data(4, p=5)
        config = PipelineConfig(seed=2, protect=("c1", "c3"))
        result = run_pipeline(data, config)
        assert "c1" in result.estimate.covariates_kept
        assert "c3" in result.estimate.covariates_dropped or "c3" in result.estimate.covariates_kept
        assert "c3" in result.estimate.covariates_kept

    def test_unknown_protected_covariate_rejected(self):
        data = jump_data(5, p=2)
        with pytest.raises(InvalidSpec):
            run_pipeline(data, PipelineConfig(protect=("nope",)))

    def test_constant_covariate_dropped_without_crash(self):
        rng = np.random.default_rng(6)
        n = 300
        x = rng.normal(0, 0.35, n)
        covs = rng.normal(size=(n, 4))
        covs[:, 2] = 3.3
        y = 0.3 * (x > 0) + 0.5 * x + rng.normal(size=n)
        data = RddDataset(y, x, 0.0, design(covs, ("a", "b", "const", "d")))
        result = run_pipeline(data, PipelineConfig(seed=0))
        assert "const" in result.estimate.covariates_dropped

    def test_duplicate_covariate_dropped_without_crash(self):
        rng = np.random.default_rng(7)
        n = 300
        x = rng.normal(0, 0.35, n)
        base = rng.normal(size=(n, 3))
        covs = np.column_stack([base, base[:, 0]])
        y = 0.3 * (x > 0) + 0.5 * x + rng.normal(size=n)
        data = RddDataset(y, x, 0.0, design(covs, ("a", "b", "c", "a_copy")))
        result = run_pipeline(data, PipelineConfig(seed=0))
        assert "a_copy" in result.estimate.covariates_dropped

    def test_pilot_rank_deficient_when_set_too_large(self):
        rng = np.random.default_rng(8)
        n = 60
        x = rng.normal(0, 0.35, n)
        covs = rng.normal(size=(n, 30))
        y = 0.3 * (x > 0) + rng.normal(size=n)
        data = RddDataset(y, x, 0.0, design(covs, tuple(f"c{i}" for i in range(30))))
        with pytest.raises(PilotRankDeficient):
            run_pipeline(data, PipelineConfig(seed=0, bandwidth=0.12, pilot_window="ik_no_covariates"))

    def test_fixed_bandwidth_respected(self):
        data = jump_data(9, p=3)
        result = run_pipeline(data, PipelineConfig(seed=0, bandwidth=0.25))
        assert result.h_final == 0.25
        assert result.estimate.bandwidth.method == "Fixed"
        assert result.estimate.bandwidth.b == pytest.approx(0.5)

    def test_gamma_cv_mode_runs_and_reports(self):
        data = jump_data(10, p=4)
        result = run_pipeline(data, PipelineConfig(seed=0, gamma="cv"))
        assert result.gamma in (0.5, 1.0, 2.0)

    def test_config_validation(self):
        with pytest.raises(ConfigInvalid):
            PipelineConfig(bandwidth=-0.5)
        with pytest.raises(ConfigInvalid):
            PipelineConfig(gamma=0.0)
        with pytest.raises(ConfigInvalid):
            PipelineConfig(kernel="gauss")
        with pytest.raises(ConfigInvalid):
            PipelineConfig(k_folds=1)


class TestRunConventional:
    def test_zero_covariates_identical_to_pipeline(self):
        data = jump_data(11, p=0)
        config = PipelineConfig(seed=0)
        assert run_pipeline(data, config).estimate == run_conventional(data, config).estimate

    def test_agrees_with_pipeline_when_nothing_dropped(self):
        # Strong covariates all survive selection, so both arms estimate the
        # same model at the same bandwidth.
        data = jump_data(12, p=3, beta=(1.5, -2.0, 1.0), noise=0.5)
        config = PipelineConfig(seed=3)
        adaptive = run_pipeline(data, config)
        conventional = run_conventional(data, config)
        assert adaptive.estimate.covariates_dropped == ()
        assert adaptive.estimate.tau_hat == pytest.approx(
            conventional.estimate.tau_hat, abs=1e-8
        )
        assert adaptive.h_final == pytest.approx(conventional.h_final, abs=1e-10)

    def test_n_effective_bounded_by_n(self):
        data = jump_data(13, p=2)
        result = run_conventional(data, PipelineConfig(seed=0))
        assert result.estimate.n_effective <= data.n


class TestAudit:
    def test_audit_is_hash_chained(self):
        data = jump_data(14, p=3)
        result = run_pipeline(data, PipelineConfig(seed=5))
        steps = [s.step for s in result.audit]
        assert steps[0] == "covariates_received"
        assert steps[-1] == "final_estimate"
        digests = [s.digest for s in result.audit]
        assert len(set(digests)) == len(digests)
