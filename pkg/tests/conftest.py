import numpy as np
import pytest

from jcir.chf import ModelParams
from jcir.levy import CompoundPoisson, Exponential, Zero


@pytest.fixture
def reference_model():
    """a = b = sigma = 1 with rate-0.5 compound Poisson jumps of mean 2."""
    return ModelParams(1.0, 1.0, 1.0, CompoundPoisson(0.5, Exponential(2.0)))


@pytest.fixture
def cir_model():
    return ModelParams(1.0, 1.0, 1.0, Zero())


def within_se(samples, target, n_se=3.0):
    samples = np.asarray(samples)
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - target) <= n_se * se
