import numpy as np
import pytest

from supportsel.synth import PlantSpec, generate


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    print(f"\n[acceptance] {name}: {report.outcome.upper()}", flush=True)


@pytest.fixture(scope="session")
def planted():
    """Small noiseless planted dataset plus its ground-truth manifest."""
    spec = PlantSpec(n_students=120, label_noise=0.0, seed=5, missing_rates={})
    return generate(spec)


@pytest.fixture(scope="session")
def planted_noisy():
    spec = PlantSpec(n_students=200, label_noise=0.10, seed=11, missing_rates={})
    return generate(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
