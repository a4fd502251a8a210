"""Full counting statistics of heat for spin-boson models via the heat operator.

A thermal bath is purified into two zero-temperature halves, each half is
mapped onto a semi-infinite chain, and the doubled state is evolved as a
tensor train.  Heat moments are then vacuum expectation values of powers of
a single operator acting on the evolved state.
"""

from .bath import BathSpec, SpectralDensity, thermal_occupation, thermofield_split
from .chain import ChainCoefficients, chain_coefficients
from .model import SpinBosonParams
from .stats import CumulantSeries, MomentSeries, Numerics, RunResult, simulate

__version__ = "0.1.0"

__all__ = [
    "BathSpec",
    "ChainCoefficients",
    "CumulantSeries",
    "MomentSeries",
    "Numerics",
    "RunResult",
    "SpectralDensity",
    "SpinBosonParams",
    "chain_coefficients",
    "simulate",
    "thermal_occupation",
    "thermofield_split",
]
