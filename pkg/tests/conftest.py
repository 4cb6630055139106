import csv
import json
import pathlib
import sys

import numpy as np
import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
sys.path.insert(0, str(pathlib.Path(__file__).parent / "oracles"))


@pytest.fixture(scope="session")
def fixture_dataset():
    """The canned 500-row dataset shipped with frozen reference values."""
    with open(FIXTURES / "rdd_fixture.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    outcome = np.array([float(r["outcome"]) for r in rows])
    running = np.array([float(r["running"]) for r in rows])
    return outcome, running


@pytest.fixture(scope="session")
def rdd_reference():
    with open(FIXTURES / "rdd_reference.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def cli_fixture_path():
    return FIXTURES / "cli_null_covariates.csv"
