"""Sampling pulse train, data stimulus and harmonic decomposition.

Every periodic power waveform is written as

    P(t) = P_avg + 1/2 * sum_i (p_i exp(j w_i t) + conj(p_i) exp(-j w_i t))

so a harmonic coefficient ``p_i`` is twice the one-sided complex Fourier
coefficient at ``+w_i``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "PulseTrainSpec",
    "SinusoidMode",
    "ComplexMode",
    "DataSignalSpec",
    "HarmonicSpectrum",
    "WaveformGrid",
    "SignalError",
    "FWHM_TO_SIGMA",
    "SECH2_FWHM_FACTOR",
    "make_grid",
    "pulse_shape",
    "synthesize_pulse_train",
    "analytic_pulse_harmonics",
    "harmonics",
    "reconstruct",
    "synthesize_data_signal",
    "write_waveform_csv",
    "write_spectrum_csv",
]

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
SECH2_FWHM_FACTOR = 2.0 * math.log(1.0 + math.sqrt(2.0))  # FWHM / t0 for sech^2


class SignalError(ValueError):
    pass


@dataclass(frozen=True)
class PulseTrainSpec:
    rep_rate: float = 10e9
    fwhm: float = 2e-12
    avg_power: float = 1e-3
    shape: Literal["gaussian", "sech2"] = "gaussian"
    wavelength: float = 1550e-9

    def __post_init__(self):
        if self.rep_rate <= 0 or self.avg_power <= 0:
            raise SignalError("rep_rate and avg_power must be positive")
        if not 0.0 < self.fwhm < 1.0 / self.rep_rate:
            raise SignalError(f"fwhm {self.fwhm:g} s must lie inside (0, 1/f_ck)")
        if self.shape not in ("gaussian", "sech2"):
            raise SignalError(f"unknown pulse shape {self.shape!r}")

    @property
    def period(self) -> float:
        return 1.0 / self.rep_rate


@dataclass(frozen=True)
class SinusoidMode:
    frequency: float = 1e9
    modulation_index: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.modulation_index <= 1.0:
            raise SignalError("modulation index must lie in [0, 1]")
        if self.frequency <= 0:
            raise SignalError("frequency must be positive")


@dataclass(frozen=True)
class ComplexMode:
    format: Literal["qpsk", "qam16"] = "qpsk"
    baud: float = 256e6
    rf_carrier: float = 0.75e9
    rolloff: float = 0.35
    modulation_index: float = 0.3
    n_symbols: int = 2048
    seed: int = 1

    def __post_init__(self):
        if self.baud <= 0:
            raise SignalError("baud must be positive")
        if not 0.0 <= self.rolloff <= 1.0:
            raise SignalError("rolloff must lie in [0, 1]")
        if not 0.0 <= self.modulation_index <= 1.0:
            raise SignalError("modulation index must lie in [0, 1]")
        if self.rf_carrier <= 0.5 * self.baud * (1.0 + self.rolloff):
            raise SignalError("rf_carrier must exceed baud*(1+rolloff)/2")


@dataclass(frozen=True)
class DataSignalSpec:
    avg_power: float = 31.6e-6
    wavelength: float = 1557.4e-9
    mode: SinusoidMode | ComplexMode = field(default_factory=SinusoidMode)

    def __post_init__(self):
        if self.avg_power <= 0:
            raise SignalError("avg_power must be positive")


@dataclass
class WaveformGrid:
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.samples.setflags(write=False)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n / self.sample_rate

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n) / self.sample_rate

    def mean(self) -> float:
        return float(np.mean(self.samples))


@dataclass
class HarmonicSpectrum:
    """DC term plus complex harmonic coefficients of a periodic power waveform."""

    dc: float
    fundamental: float
    coeffs: dict[int, complex]

    def __getitem__(self, i: int) -> complex:
        if i == 0:
            return complex(self.dc)
        try:
            return self.coeffs[i]
        except KeyError:
            raise SignalError(f"harmonic index {i} outside truncation {self.max_index}") from None

    @property
    def max_index(self) -> int:
        return max(self.coeffs) if self.coeffs else 0

    def frequency(self, i: int) -> float:
        return i * self.fundamental

    def mean_square(self) -> float:
        return self.dc ** 2 + 0.5 * sum(abs(p) ** 2 for p in self.coeffs.values())

    def scaled(self, factors: dict[int, complex], dc_factor: float = 1.0) -> "HarmonicSpectrum":
        return HarmonicSpectrum(
            dc=self.dc * dc_factor,
            fundamental=self.fundamental,
            coeffs={i: p * factors.get(i, 1.0) for i, p in self.coeffs.items()},
        )


def make_grid(rep_rate: float, samples_per_period: int = 2048, n_periods: int = 1):
    """Sample rate and sample count for an integer number of clock periods."""
    return rep_rate * samples_per_period, samples_per_period * n_periods


def pulse_shape(spec: PulseTrainSpec, t: np.ndarray) -> np.ndarray:
    """Periodic unit-average pulse train evaluated at arbitrary times."""
    period = spec.period
    tau = np.mod(np.asarray(t, dtype=float) + 0.5 * period, period) - 0.5 * period
    out = np.zeros_like(tau)
    if spec.shape == "gaussian":
        sigma = spec.fwhm * FWHM_TO_SIGMA
        for k in (-2, -1, 0, 1, 2):
            out += np.exp(-0.5 * ((tau + k * period) / sigma) ** 2)
        return out * period / (sigma * math.sqrt(2.0 * math.pi))
    t0 = spec.fwhm / SECH2_FWHM_FACTOR
    # sech^2 tails decay as exp(-2|t|/t0); sum images until negligible
    n_img = int(math.ceil(20.0 * t0 / period)) + 2
    for k in range(-n_img, n_img + 1):
        out += 1.0 / np.cosh((tau + k * period) / t0) ** 2
    return out * period / (2.0 * t0)


def synthesize_pulse_train(spec: PulseTrainSpec, sample_rate: float, n_samples: int,
                           t0: float = 0.0) -> WaveformGrid:
    """Pulse train on a uniform grid, renormalised so its mean is exactly ``avg_power``."""
    samples_per_period = sample_rate / spec.rep_rate
    if abs(samples_per_period - round(samples_per_period)) > 1e-9:
        raise SignalError("sample rate must hold an integer number of samples per period")
    if spec.fwhm * sample_rate < 8:
        raise SignalError("grid under-resolves the pulse FWHM (need >= 8 samples)")
    t = t0 + np.arange(n_samples) / sample_rate
    shape = pulse_shape(spec, t)
    n_per = int(round(samples_per_period))
    whole = (n_samples // n_per) * n_per
    norm = shape[:whole].mean() if whole else shape.mean()
    return WaveformGrid(sample_rate, spec.avg_power * shape / norm)


def analytic_pulse_harmonics(spec: PulseTrainSpec, max_index: int = 6) -> HarmonicSpectrum:
    """Closed-form harmonics of an ideal pulse train centred on t = 0."""
    coeffs = {}
    for i in range(1, max_index + 1):
        w = 2.0 * math.pi * i * spec.rep_rate
        if spec.shape == "gaussian":
            sigma = spec.fwhm * FWHM_TO_SIGMA
            ratio = math.exp(-0.5 * (w * sigma) ** 2)
        else:
            t0 = spec.fwhm / SECH2_FWHM_FACTOR
            x = 0.5 * math.pi * w * t0
            ratio = x / math.sinh(x)
        coeffs[i] = complex(2.0 * spec.avg_power * ratio)
    return HarmonicSpectrum(dc=spec.avg_power, fundamental=spec.rep_rate, coeffs=coeffs)


def harmonics(wave: WaveformGrid, fundamental: float, max_index: int = 6) -> HarmonicSpectrum:
    """Harmonic coefficients of a waveform spanning an integer number of periods."""
    n_periods = wave.duration * fundamental
    if abs(n_periods - round(n_periods)) > 1e-6 or round(n_periods) < 1:
        raise SignalError(f"waveform spans {n_periods:.6f} periods; need an integer count")
    n_periods = int(round(n_periods))
    if max_index * n_periods >= wave.n // 2:
        raise SignalError("max_index beyond the Nyquist limit of the grid")
    spectrum = np.fft.rfft(wave.samples) / wave.n
    coeffs = {i: complex(2.0 * spectrum[i * n_periods]) for i in range(1, max_index + 1)}
    return HarmonicSpectrum(dc=float(spectrum[0].real), fundamental=fundamental, coeffs=coeffs)


def reconstruct(spectrum: HarmonicSpectrum, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.full_like(t, spectrum.dc)
    for i, p in spectrum.coeffs.items():
        out += np.real(p * np.exp(2j * math.pi * spectrum.frequency(i) * t))
    return out


def synthesize_data_signal(spec: DataSignalSpec, sample_rate: float, n_samples: int,
                           t0: float = 0.0) -> WaveformGrid:
    """Optical power of the signal to be sampled.

    Complex modes are produced by :func:`soamzi.dsp_evm.rf_waveform` and are
    normalised by their peak envelope so the power never goes negative.
    """
    t = t0 + np.arange(n_samples) / sample_rate
    mode = spec.mode
    if isinstance(mode, SinusoidMode):
        power = spec.avg_power * (1.0 + mode.modulation_index * np.cos(2.0 * math.pi * mode.frequency * t))
        return WaveformGrid(sample_rate, power)
    from .dsp_evm import rf_waveform

    rf = rf_waveform(mode, t)
    power = spec.avg_power * (1.0 + mode.modulation_index * rf)
    if np.any(power < 0):
        raise SignalError("data signal power goes negative")
    return WaveformGrid(sample_rate, power)


def write_waveform_csv(path, wave: WaveformGrid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "power_W"])
        for t, p in zip(wave.time, wave.samples):
            writer.writerow([f"{t:.12e}", f"{p:.12e}"])


def write_spectrum_csv(path, spectrum: HarmonicSpectrum) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "freq_Hz", "re_W", "im_W", "abs_W"])
        writer.writerow([0, "0", f"{spectrum.dc:.12e}", "0", f"{abs(spectrum.dc):.12e}"])
        for i in sorted(spectrum.coeffs):
            p = spectrum.coeffs[i]
            writer.writerow([i, f"{spectrum.frequency(i):.6e}", f"{p.real:.12e}",
                             f"{p.imag:.12e}", f"{abs(p):.12e}"])
