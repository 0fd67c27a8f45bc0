"""Covariate shift in overparameterized linear regression.

Spectra and effective ranks, MNI fitting, exact excess-risk decomposition,
variance/bias bounds, a beneficial/malignant shift taxonomy, an empirical
classification harness and deterministic Monte-Carlo sweeps.
"""

from shiftlab.errors import (
    DegenerateTailError,
    InvalidParameterError,
    PropertyFailure,
    ShiftlabError,
    UnsupportedRatioError,
)
from shiftlab.spectra import Spectrum, SpectrumPair, SpikedParams, make_spiked

__version__ = "0.1.0"

__all__ = [
    "DegenerateTailError",
    "InvalidParameterError",
    "PropertyFailure",
    "ShiftlabError",
    "Spectrum",
    "SpectrumPair",
    "SpikedParams",
    "UnsupportedRatioError",
    "make_spiked",
]
