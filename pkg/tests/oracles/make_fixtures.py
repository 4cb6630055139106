"""Generate the fixture dataset and freeze reference values from the
independent implementation in bandwidth_reference.py.

Run from the repository root:

    python tests/oracles/make_fixtures.py

Rewrites tests/fixtures/rdd_fixture.csv, tests/fixtures/rdd_reference.json and
tests/fixtures/cli_null_covariates.csv. The reference JSON is what the library
is held to, so regenerate only when the fixture design itself changes.
"""

import csv
import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from bandwidth_reference import (  # noqa: E402
    ik_bandwidth_reference,
    plugin_constant_quad,
    robust_reference,
)

FIXTURES = pathlib.Path(__file__).parent.parent / "fixtures"


def make_rdd_fixture():
    rng = np.random.default_rng(20240817)
    n = 500
    x = rng.uniform(-1.0, 1.0, size=n)
    t = (x > 0).astype(float)
    # Side-asymmetric curvature so the bias machinery is genuinely exercised.
    y = 0.3 * t + 0.5 * x + (1.1 - 1.8 * t) * x**2 - 0.7 * x**3
    y += rng.normal(0.0, 0.35, size=n)
    return x, y


def self_checks():
    assert abs(plugin_constant_quad("triangular") - 480**0.2) < 1e-9
    # Noiseless linear data: zero estimated bias, exact jump recovery.
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, 300)
    y = 0.25 * (x > 0) + 0.8 * x
    res = robust_reference(x, y, h=0.5, b=0.9)
    assert abs(res["bias"]) < 1e-10, res["bias"]
    assert abs(res["tau_bc"] - 0.25) < 1e-10
    assert abs(res["tau_conv"] - 0.25) < 1e-10
    # Noiseless one-sided quadratic: exact bias removal.
    y2 = 0.25 * (x > 0) + 0.8 * x + 2.0 * (x > 0) * x**2
    res2 = robust_reference(x, y2, h=0.6, b=0.9)
    assert abs(res2["tau_bc"] - 0.25) < 1e-9, res2
    assert abs(res2["tau_conv"] - 0.25) > 1e-3
    print("oracle self-checks passed")


def main():
    self_checks()
    FIXTURES.mkdir(parents=True, exist_ok=True)

    x, y = make_rdd_fixture()
    with open(FIXTURES / "rdd_fixture.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["outcome", "running"])
        for yi, xi in zip(y, x):
            writer.writerow([repr(float(yi)), repr(float(xi))])

    bw = ik_bandwidth_reference(x, y, "triangular")
    rb = robust_reference(x, y, bw["h"], bw["b"], "triangular")
    reference = {
        "kernel": "triangular",
        "n": len(x),
        "ik_h": bw["h"],
        "ik_b": bw["b"],
        "h2_left": bw["h2_left"],
        "h2_right": bw["h2_right"],
        "tau_conventional": rb["tau_conv"],
        "se_conventional": rb["se_conv"],
        "tau_robust": rb["tau_bc"],
        "se_robust": rb["se_bc"],
        "n_effective": rb["n_effective"],
    }
    with open(FIXTURES / "rdd_reference.json", "w") as fh:
        json.dump(reference, fh, indent=2)
    print(json.dumps(reference, indent=2))

    # Estimation fixture for the CLI round trips: noise covariates with the
    # realized spurious correlation against the outcome projected out, so the
    # selection stage always removes all of them.
    rng = np.random.default_rng(20240823)
    n = 400
    xr = rng.uniform(-1.0, 1.0, size=n)
    tr = (xr > 0).astype(float)
    yr = 0.25 * tr + 0.4 * xr + rng.normal(0.0, 0.5, size=n)
    raw = rng.normal(size=(n, 4))
    basis = np.column_stack([np.ones(n), tr, xr, tr * xr, yr])
    q, _ = np.linalg.qr(basis)
    covs = raw - q @ (q.T @ raw)
    with open(FIXTURES / "cli_null_covariates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["outcome", "running", "z1", "z2", "z3", "z4"])
        for i in range(n):
            writer.writerow(
                [repr(float(yr[i])), repr(float(xr[i]))]
                + [repr(float(v)) for v in covs[i]]
            )
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
