"""Critical-point statistics of band-limited random Fourier series on the flat torus.

The package samples mean-zero stationary Gaussian fields built from
amplitude-weighted Fourier modes on the m-torus, enumerates the critical
points of individual realizations, and computes the matching Kac-Rice
densities semi-analytically so the two routes can be compared: mean and
variance of the critical-point counting measure, their large-band-limit
coefficients, and the law-of-large-numbers behaviour of the normalized
counting measures.
"""

from .amplitude import Amplitude, BumpAmplitude, GaussianAmplitude, TableAmplitude
from .covariance import ContinuumKernel, LatticeSpectrum
from .errors import (
    ConfigError,
    DegenerateConditioning,
    QuadratureError,
    ToruscritError,
    UncertifiedTail,
)
from .sampler import FieldSample, sample_field

__all__ = [
    "Amplitude",
    "GaussianAmplitude",
    "BumpAmplitude",
    "TableAmplitude",
    "LatticeSpectrum",
    "ContinuumKernel",
    "FieldSample",
    "sample_field",
    "ToruscritError",
    "ConfigError",
    "DegenerateConditioning",
    "QuadratureError",
    "UncertifiedTail",
]

__version__ = "0.1.0"
