import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "package",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("package")

from llaft.model import SurvivalDataset  # noqa: E402


def make_dataset(log_times, events, covariate_rows):
    X = np.column_stack([np.ones(len(log_times)), np.asarray(covariate_rows, float)])
    return SurvivalDataset(time=np.exp(np.asarray(log_times, float)),
                           event=np.asarray(events, float), covariates=X)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def five_obs():
    """Small mixed-censoring fixture used by the likelihood oracles."""
    return make_dataset(
        log_times=[0.2, -0.4, 1.3, 0.9, 2.1],
        events=[1, 0, 1, 1, 0],
        covariate_rows=[[0.5], [1.2], [-0.3], [0.0], [0.8]],
    )
