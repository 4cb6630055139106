"""Desk-scale coverage experiment: selection-based vs all-covariates
estimation on the documented default design, plus a small sample-size sweep.

Run:  python demos/04_monte_carlo_coverage.py   (a few minutes)
"""

import numpy as np

from rdlasso import (
    McConfig,
    PipelineConfig,
    default_dgp,
    run_monte_carlo,
    summary_rows,
    sweep_sample_size,
)

dgp = default_dgp()
print(f"default design: {dgp.n_covariates} null covariates, "
      f"margin sd {np.sqrt(dgp.sigma[0, 0]):.2f}, true jump {dgp.tau_true}")

config = McConfig(
    dgp=dgp,
    n_obs=100,
    n_reps=200,
    pipeline=PipelineConfig(seed=0),
    master_seed=2024,
)
adaptive, conventional = run_monte_carlo(config, keep_per_rep=False)

print("\nn = 100, 200 replications, plug-in bandwidth")
print("  arm            coverage   |bias|   mean tau   mean h   failed")
for s in (adaptive, conventional):
    print(f"  {s.arm:<13s} {s.coverage:8.3f}  {s.mean_bias:6.3f}   "
          f"{s.mean_tau:7.3f}   {s.mean_bandwidth:6.3f}   {s.n_failed}")
print(f"  coverage gap: {adaptive.coverage - conventional.coverage:+.3f}")

print("\nsample-size sweep (120 replications per point)")
sweep_config = McConfig(
    dgp=dgp, n_obs=80, n_reps=120, pipeline=PipelineConfig(seed=0), master_seed=2024
)
rows = summary_rows(sweep_sample_size(sweep_config, [80, 140, 220]))
print("  n    arm            coverage   |bias|")
for r in rows:
    print(f"  {r['n']:<4d} {r['arm']:<13s} {r['coverage']:8.3f}  {r['mean_bias']:6.3f}")
print("\nthe gap narrows as n grows; selection matters most in small windows")
