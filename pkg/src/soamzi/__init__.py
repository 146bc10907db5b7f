"""SOA-MZI photonic sampling mixer simulator.

Small-signal conversion-gain model, rate-equation time-domain oracle,
measurement-chain model and EVM pipeline for the Switching and Modulation
architectures.
"""

from .smallsignal import Architecture, OperatingPoint, conversion_gain_db, upconverted_power
from .soa import SoaParams
from .signals import DataSignalSpec, HarmonicSpectrum, PulseTrainSpec, SinusoidMode
from .timedomain import MixerSetup, simulate

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "OperatingPoint",
    "conversion_gain_db",
    "upconverted_power",
    "SoaParams",
    "DataSignalSpec",
    "HarmonicSpectrum",
    "PulseTrainSpec",
    "SinusoidMode",
    "MixerSetup",
    "simulate",
    "__version__",
]
