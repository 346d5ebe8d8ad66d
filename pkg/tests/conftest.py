import logging

import numpy as np
import pytest

from drivestyle.datagen import default_archetypes, generate_corpus
from drivestyle.telemetry import DriverRun, Label


@pytest.fixture(autouse=True)
def _quiet_fuzzy_clamp(caplog):
    caplog.set_level(logging.WARNING, logger="drivestyle")


@pytest.fixture(scope="session")
def small_corpus():
    """18 synthetic drivers, 300 samples each."""
    return generate_corpus(default_archetypes(run_length=300), 1, master_seed=11)


@pytest.fixture
def tiny_runs():
    agg = DriverRun("a1", Label.AGGRESSIVE, [0.0, 0.02, 0.04], [70.0, 80.0, 75.0], [0.7, 0.9, 0.8])
    norm = DriverRun("n1", Label.NORMAL, [0.0, 0.02, 0.04], [45.0, 50.0, 48.0], [0.2, 0.25, 0.1])
    return [agg, norm]


def random_run(rng, run_id="r", label=Label.AGGRESSIVE, n=50):
    t = np.cumsum(rng.uniform(0.01, 0.05, size=n))
    return DriverRun(run_id, label, t, rng.uniform(0, 130, size=n), rng.uniform(0, 1, size=n))

