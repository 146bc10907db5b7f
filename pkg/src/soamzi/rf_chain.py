"""Virtual measurement chain: optical filter, tap, photodiode, amplifiers and IF mixer.

Powers are referenced the way a measured conversion gain is: the chain is
applied to the input and output tones alike and its gain is then removed, so
the de-embedded result depends only on the optical modulation powers at the
interferometer ports.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .signals import HarmonicSpectrum, PulseTrainSpec, SignalError, pulse_shape
from .soa import C_LIGHT

__all__ = [
    "ChainSpec",
    "Detection",
    "IfSignal",
    "ChainError",
    "watts_to_dbm",
    "dbm_to_watts",
    "obpf_bandwidth_hz",
    "obpf_transmission",
    "obpf",
    "field_comb",
    "power_harmonics_from_field",
    "filtered_clock_harmonics",
    "sideband_transmission",
    "photodetect",
    "measure_cg",
    "stage_powers",
    "write_stage_csv",
    "lo_frequency",
    "downconvert",
    "add_awgn",
    "add_noise_psd",
]


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class ChainSpec:
    obpf_center: float = 1557.4e-9  # m
    obpf_bw: float = 0.7e-9  # m, -3 dB full width
    obpf_rolloff: float = 0.3
    tap_ratio: float = 0.9
    optical_loss_db: float = 7.5  # filter plus tap, output branch
    responsivity: float = 0.71  # A/W
    amp1_gain_db: float = 33.0
    mixer_conv_loss_db: float = 10.0
    lo_freq: float | None = None  # Hz; None derives it from if_freq
    lo_power_dbm: float = 13.0
    if_freq: float = 450e6
    elec_filter_bw: float = 1e9
    amp2_gain_db: float = 40.0
    load_impedance: float = 50.0
    detector_max: float = 10e-3  # W, linear range of the photodiode

    def __post_init__(self):
        for name in ("optical_loss_db", "amp1_gain_db", "mixer_conv_loss_db",
                     "amp2_gain_db", "lo_power_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ChainError(f"{name} must be finite")
        if not self.responsivity > 0:
            raise ChainError("responsivity must be positive")
        if not (self.obpf_bw > 0 and self.obpf_center > 0):
            raise ChainError("filter centre and bandwidth must be positive")
        if not 0.0 <= self.obpf_rolloff <= 1.0:
            raise ChainError("filter rolloff must lie in [0, 1]")
        if not 0.0 < self.tap_ratio <= 1.0:
            raise ChainError("tap ratio must lie in (0, 1]")
        if not (self.load_impedance > 0 and self.elec_filter_bw > 0 and self.detector_max > 0):
            raise ChainError("load, filter bandwidth and detector limit must be positive")


@dataclass(frozen=True)
class Detection:
    power_w: float
    current: complex
    clipped: bool

    @property
    def dbm(self) -> float:
        return watts_to_dbm(self.power_w)


@dataclass
class IfSignal:
    envelope: np.ndarray
    sample_rate: float
    f_if: float
    lo_freq: float
    inverted: bool


def watts_to_dbm(p: float) -> float:
    return 10.0 * math.log10(p / 1e-3) if p > 0 else -math.inf


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def obpf_bandwidth_hz(spec: ChainSpec) -> float:
    return C_LIGHT * spec.obpf_bw / spec.obpf_center ** 2


def obpf_transmission(spec: ChainSpec, f_offset) -> np.ndarray:
    """Power transmission versus offset from the filter centre (raised-cosine edges).

    The half-power points sit at +-B/2 for any rolloff.
    """
    half = 0.5 * obpf_bandwidth_hz(spec)
    a = np.abs(np.asarray(f_offset, dtype=float))
    if spec.obpf_rolloff == 0.0:
        return np.where(a < half, 1.0, np.where(a == half, 0.5, 0.0))
    f1 = (1.0 - spec.obpf_rolloff) * half
    f2 = (1.0 + spec.obpf_rolloff) * half
    edge = 0.5 * (1.0 + np.cos(np.pi * (np.clip(a, f1, f2) - f1) / (f2 - f1)))
    return np.where(a <= f1, 1.0, np.where(a >= f2, 0.0, edge))


def obpf(values, freqs, spec: ChainSpec, kind: str = "field") -> np.ndarray:
    """Filter spectral lines given at offsets ``freqs`` from the filter centre."""
    t = obpf_transmission(spec, freqs)
    if kind == "field":
        return np.asarray(values) * np.sqrt(t)
    if kind == "power":
        return np.asarray(values) * t
    raise ValueError(f"kind must be 'field' or 'power', got {kind!r}")


def field_comb(pulse: PulseTrainSpec, n_lines: int = 64, samples: int = 4096):
    """Optical field lines of a transform-limited pulse train.

    Returns offsets from the carrier and complex amplitudes normalised so that
    the summed line power equals the average optical power.
    """
    t = (np.arange(samples) / samples - 0.5) * pulse.period
    field = np.sqrt(pulse.avg_power * pulse_shape(pulse, t))
    lines = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(field))) / samples
    k = np.arange(samples) - samples // 2
    keep = np.abs(k) <= n_lines
    lines, k = lines[keep], k[keep]
    lines *= math.sqrt(pulse.avg_power / np.sum(np.abs(lines) ** 2))
    return k * pulse.rep_rate, lines


def power_harmonics_from_field(freqs, lines, fundamental: float, max_index: int = 6) -> HarmonicSpectrum:
    """Harmonics of |E(t)|^2 for a field made of equally spaced lines."""
    lines = np.asarray(lines, dtype=complex)
    idx = np.rint(np.asarray(freqs) / fundamental).astype(int)
    if np.any(np.diff(idx) != 1):
        raise SignalError("field lines must be contiguous multiples of the fundamental")
    coeffs = {}
    for i in range(1, max_index + 1):
        coeffs[i] = complex(2.0 * np.sum(lines[i:] * np.conj(lines[:lines.size - i]))) if i < lines.size else 0j
    return HarmonicSpectrum(dc=float(np.sum(np.abs(lines) ** 2)), fundamental=fundamental, coeffs=coeffs)


def filtered_clock_harmonics(pulse: PulseTrainSpec, spec: ChainSpec, max_index: int = 6,
                             n_lines: int = 64) -> HarmonicSpectrum:
    """Power harmonics of the pulse train after the output band-pass filter."""
    freqs, lines = field_comb(pulse, n_lines)
    return power_harmonics_from_field(freqs, obpf(lines, freqs, spec), pulse.rep_rate, max_index)


def sideband_transmission(spec: ChainSpec, f: float) -> float:
    """CG factor for a product whose optical sidebands sit at +-f around the filter centre."""
    return float(obpf_transmission(spec, f) * obpf_transmission(spec, 0.0))


def photodetect(p: complex, spec: ChainSpec, apply_optical_loss: bool = False) -> Detection:
    """Electrical power in the load for an optical power harmonic ``p``."""
    p = complex(p)
    if apply_optical_loss:
        p *= 10.0 ** (-spec.optical_loss_db / 10.0)
    clipped = abs(p) > spec.detector_max
    if clipped:
        p = p / abs(p) * spec.detector_max
    i = spec.responsivity * p
    return Detection(0.5 * abs(i) ** 2 * spec.load_impedance, i, clipped)


def stage_powers(p: complex, spec: ChainSpec) -> list[tuple[str, float]]:
    """Electrical-equivalent power (dBm) of one tone at each node of the chain."""
    ref = photodetect(p, spec).dbm
    nodes = [("mzi_port", ref)]
    at_pd = ref - 2.0 * spec.optical_loss_db
    nodes.append(("photodiode", at_pd))
    nodes.append(("amp1", at_pd + spec.amp1_gain_db))
    after_mixer = at_pd + spec.amp1_gain_db - spec.mixer_conv_loss_db
    nodes.append(("if_mixer", after_mixer))
    nodes.append(("amp2", after_mixer + spec.amp2_gain_db))
    return nodes


def _chain_gain_db(spec: ChainSpec) -> float:
    return stage_powers(1e-3, spec)[-1][1] - photodetect(1e-3, spec).dbm


def measure_cg(p_out: complex, p_in: complex, spec: ChainSpec | None = None) -> float:
    """Conversion gain in dB with the chain applied to both tones and removed again."""
    spec = spec or ChainSpec()
    if p_out == 0 or p_in == 0:
        raise ChainError("missing tone: both input and output powers must be non-zero")
    g = _chain_gain_db(spec)
    out_meas = stage_powers(p_out, spec)[-1][1]
    in_meas = stage_powers(p_in, spec)[-1][1]
    return (out_meas - g) - (in_meas - g)


def write_stage_csv(path, p: complex, spec: ChainSpec) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "power_dBm"])
        for name, dbm in stage_powers(p, spec):
            writer.writerow([name, f"{dbm:.6f}"])


def lo_frequency(f_rf: float, spec: ChainSpec) -> float:
    """LO frequency: the configured one, else inferred from the IF below the RF."""
    return spec.lo_freq if spec.lo_freq is not None else f_rf - spec.if_freq


def downconvert(envelope: np.ndarray, sample_rate: float, f_rf: float, spec: ChainSpec,
                lo_phase: float = 0.0) -> IfSignal:
    """Ideal mixer plus brick-wall IF filter acting on a complex envelope at ``f_rf``.

    The envelope keeps its orientation when the LO sits below the RF and is
    conjugated when it sits above. Spectral content that would fall outside
    the electrical filter is removed.
    """
    f_lo = lo_frequency(f_rf, spec)
    f_if = abs(f_rf - f_lo)
    inverted = f_lo > f_rf
    env = np.asarray(envelope, dtype=complex)
    if inverted:
        env = np.conj(env)
    env = env * 10.0 ** (-spec.mixer_conv_loss_db / 20.0) * np.exp(1j * lo_phase)
    if f_if >= spec.elec_filter_bw:
        warnings.warn(f"IF {f_if:g} Hz outside the {spec.elec_filter_bw:g} Hz filter",
                      RuntimeWarning, stacklevel=2)
        return IfSignal(np.zeros_like(env), sample_rate, f_if, f_lo, inverted)
    spectrum = np.fft.fft(env)
    f = np.fft.fftfreq(env.size, 1.0 / sample_rate)
    spectrum[np.abs(f_if + f) > spec.elec_filter_bw] = 0.0
    spectrum[f_if + f < 0] = 0.0
    return IfSignal(np.fft.ifft(spectrum), sample_rate, f_if, f_lo, inverted)


def add_awgn(signal: np.ndarray, snr_db: float, rng: np.random.Generator,
             oversampling: float = 1.0) -> np.ndarray:
    """Complex white noise at an in-band SNR (per symbol when ``oversampling`` is samples/symbol)."""
    signal = np.asarray(signal, dtype=complex)
    p = np.mean(np.abs(signal) ** 2)
    var = p * oversampling / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal(signal.size) + 1j * rng.standard_normal(signal.size)
    return signal + math.sqrt(var / 2.0) * noise


def add_noise_psd(signal: np.ndarray, sample_rate: float, psd_w_hz: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Complex white noise of one-sided density ``psd_w_hz`` across the envelope bandwidth."""
    signal = np.asarray(signal, dtype=complex)
    var = psd_w_hz * sample_rate
    noise = rng.standard_normal(signal.size) + 1j * rng.standard_normal(signal.size)
    return signal + math.sqrt(var / 2.0) * noise
