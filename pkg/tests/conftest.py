import warnings

import numpy as np
import pytest

from torusfactor.errors import ChartWarning


@pytest.fixture(autouse=True)
def _quiet_chart_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ChartWarning)
        yield


@pytest.fixture(scope="session")
def rng():
    return np.random.RandomState(20240811)
