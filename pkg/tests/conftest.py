import numpy as np
import pytest

from toruscrit.amplitude import BumpAmplitude, GaussianAmplitude
from toruscrit.covariance import ContinuumKernel, LatticeSpectrum


@pytest.fixture(scope="session")
def gauss_amp():
    return GaussianAmplitude(1.0)


@pytest.fixture(scope="session")
def bump_amp():
    return BumpAmplitude(3.0)


@pytest.fixture(scope="session")
def spec_m1_r8(gauss_amp):
    return LatticeSpectrum(gauss_amp, 1, 8.0)


@pytest.fixture(scope="session")
def spec_m1_r16(gauss_amp):
    return LatticeSpectrum(gauss_amp, 1, 16.0)


@pytest.fixture(scope="session")
def spec_m2_r8(gauss_amp):
    return LatticeSpectrum(gauss_amp, 2, 8.0)


@pytest.fixture(scope="session")
def cont_m1(gauss_amp):
    return ContinuumKernel(gauss_amp, 1)


@pytest.fixture(scope="session")
def cont_m2(gauss_amp):
    return ContinuumKernel(gauss_amp, 2)


def assert_within_se(value, target, se, n_se=4.0, msg=""):
    assert abs(value - target) <= n_se * se, (
        f"{msg}: {value} vs {target} (allowed {n_se} x {se})"
    )


@pytest.fixture(scope="session")
def rng0():
    return np.random.default_rng(0)
