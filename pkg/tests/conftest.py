import numpy as np
import pytest

import emom_md as em


def make_benchmark_config(horizon=0.01, x_min=0.04, mode="clamp"):
    return em.ProcessConfig(reactor_volume=1.0, densities=(1.0, 1.0),
                            initial_concentrations=(2.0, 2.0), x_min=x_min,
                            horizon=horizon, on_negative_concentration=mode)


@pytest.fixture(scope="session")
def benchmark_q0():
    return em.InitialDensity.elliptical_bump(center=(0.1, 0.75),
                                             halfwidth=(0.05, 0.25))


@pytest.fixture(scope="session")
def benchmark_law():
    # linear kinetics with rate ratio 5
    return em.GrowthLaw.linear(1.0, 5.0, 0.0)


@pytest.fixture(scope="session")
def benchmark_cfg():
    return make_benchmark_config()


@pytest.fixture(scope="session")
def benchmark_run(benchmark_cfg, benchmark_q0, benchmark_law):
    """Moderate-size benchmark solve with stored characteristics, shared by
    reconstruction and balance tests."""
    return em.solve(benchmark_cfg, benchmark_q0, benchmark_law,
                    em.EmomGridSpec(501, (60, 60)),
                    store_characteristics=True)


@pytest.fixture(scope="session")
def symmetric_run(benchmark_cfg, benchmark_q0):
    """Same process with equal kinetics for both components."""
    law = em.GrowthLaw.linear(1.0, 1.0, 0.0)
    return em.solve(benchmark_cfg, benchmark_q0, law,
                    em.EmomGridSpec(501, (60, 60))), law


def dot_volume_sums(x1, x2, q0w):
    """Independent (different summation order) component-volume sums."""
    v = (4.0 / 3.0) * np.pi * x1 ** 3
    return float(np.dot(v * x2, q0w)), float(np.dot(v * (1.0 - x2), q0w))
