import os

import numpy as np
import pytest

from metricfda import (
    EuclideanMetric,
    FunctionalDataset,
    MetricFunction,
    SynthesisConfig,
    TimeGrid,
    synth_gaussian_cdf_process,
)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def toy_mortality_path():
    return os.path.join(DATA_DIR, "toy_mortality.csv")


def make_cdf_dataset(seed=0, n=8, times=(0.0, 1.0, 2.0, 3.0), age_count=41):
    """Seeded Gaussian-CDF-valued dataset for property tests."""
    cfg = SynthesisConfig(
        n_units=n, time_points=tuple(times), age_count=age_count, seed=seed
    )
    return synth_gaussian_cdf_process(cfg)


def make_euclidean_dataset(seed=0, n=6, t_count=4, dim=2):
    """Seeded Euclidean-metric dataset for property tests."""
    rng = np.random.default_rng(seed)
    tg = TimeGrid(np.arange(t_count, dtype=float))
    obs = [
        MetricFunction(f"e{i:02d}", [rng.normal(size=dim) for _ in range(t_count)])
        for i in range(n)
    ]
    return FunctionalDataset(tg, EuclideanMetric(dim), obs)
