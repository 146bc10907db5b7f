"""QPSK and 16-QAM stimulus, data-aided EVM and the EVM-versus-baud sweep.

Waveforms are cyclic: shaping and matched filtering use circular convolution
over the whole symbol block, so any integer number of blocks can be fed to a
periodic simulation without edge effects.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from . import rf_chain
from .signals import ComplexMode, HarmonicSpectrum, SignalError
from .smallsignal import Architecture, OperatingPoint

__all__ = [
    "ModFormat",
    "FORMATS",
    "get_format",
    "SyncError",
    "Baseband",
    "EvmReport",
    "EvmSweepConfig",
    "prbs_bits",
    "map_bits",
    "hard_decision_bits",
    "rrc_taps",
    "rrc_response",
    "modulate",
    "matched_filter",
    "demodulate_and_evm",
    "evm_of_symbols",
    "ber_from_evm_awgn",
    "fec_threshold",
    "complex_mode_baseband",
    "rf_waveform",
    "sideband_transfer",
    "one_pole_mixer",
    "evm_point",
    "evm_sweep",
    "write_evm_csv",
    "write_constellation_csv",
]

FEC_BER = 3.8e-3


class SyncError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModFormat:
    tag: str
    bits_per_symbol: int
    constellation: np.ndarray = field(repr=False)  # indexed by the bit group, MSB first

    @property
    def peak_to_average(self) -> float:
        p = np.abs(self.constellation) ** 2
        return float(p.max() / p.mean())


def _gray_axis(bits_per_axis: int) -> np.ndarray:
    levels = 2 ** bits_per_axis
    amp = np.arange(-(levels - 1), levels, 2, dtype=float)
    out = np.empty(levels)
    for pos in range(levels):
        out[pos ^ (pos >> 1)] = amp[pos]
    return out


def _square_qam(bits_per_symbol: int) -> np.ndarray:
    half = bits_per_symbol // 2
    axis = _gray_axis(half)
    idx = np.arange(2 ** bits_per_symbol)
    points = axis[idx >> half] + 1j * axis[idx & ((1 << half) - 1)]
    return points / math.sqrt(np.mean(np.abs(points) ** 2))


FORMATS = {
    "qpsk": ModFormat("qpsk", 2, _square_qam(2)),
    "qam16": ModFormat("qam16", 4, _square_qam(4)),
}


def get_format(tag: str | ModFormat) -> ModFormat:
    if isinstance(tag, ModFormat):
        return tag
    try:
        return FORMATS[str(tag).lower()]
    except KeyError:
        raise SignalError(f"unsupported format {tag!r}; choose from {sorted(FORMATS)}") from None


_PRBS_TAPS = {7: 6, 9: 5, 15: 14, 23: 18, 31: 28}


def prbs_bits(n: int, seed: int = 1, order: int = 15) -> np.ndarray:
    """Fibonacci LFSR sequence x^order + x^tap + 1; ``seed`` sets the register state."""
    if order not in _PRBS_TAPS:
        raise ValueError(f"unsupported PRBS order {order}")
    mask = (1 << order) - 1
    state = seed & mask or 1
    tap = _PRBS_TAPS[order]
    out = np.empty(n, dtype=np.uint8)
    for k in range(n):
        bit = ((state >> (order - 1)) ^ (state >> (tap - 1))) & 1
        state = ((state << 1) | bit) & mask
        out[k] = bit
    return out


def map_bits(bits: np.ndarray, fmt: str | ModFormat) -> np.ndarray:
    fmt = get_format(fmt)
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % fmt.bits_per_symbol:
        raise ValueError(f"bit count {bits.size} is not a multiple of {fmt.bits_per_symbol}")
    groups = bits.reshape(-1, fmt.bits_per_symbol)
    weights = 1 << np.arange(fmt.bits_per_symbol - 1, -1, -1)
    return fmt.constellation[groups @ weights]


def hard_decision_bits(symbols: np.ndarray, fmt: str | ModFormat) -> np.ndarray:
    """Nearest-point decisions, sliced independently on each axis of the square grid."""
    fmt = get_format(fmt)
    half = fmt.bits_per_symbol // 2
    levels = 2 ** half
    unit = float(np.max(fmt.constellation.real)) / (levels - 1)
    symbols = np.asarray(symbols)

    def labels(x):
        pos = np.clip(np.rint((x / unit + levels - 1) / 2.0), 0, levels - 1).astype(np.int64)
        return pos ^ (pos >> 1)

    idx = (labels(symbols.real) << half) | labels(symbols.imag)
    shifts = np.arange(fmt.bits_per_symbol - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def rrc_taps(rolloff: float, sps: int, span: int = 12) -> np.ndarray:
    """Unit-energy root-raised-cosine impulse response over ``span`` symbols."""
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError("rolloff must lie in [0, 1]")
    t = np.arange(-span * sps // 2, span * sps // 2 + 1) / sps
    b = rolloff
    h = np.empty_like(t)
    for k, x in enumerate(t):
        if abs(x) < 1e-12:
            h[k] = 1.0 - b + 4.0 * b / math.pi
        elif b > 0 and abs(abs(x) - 1.0 / (4.0 * b)) < 1e-9:
            h[k] = b / math.sqrt(2.0) * ((1 + 2 / math.pi) * math.sin(math.pi / (4 * b))
                                         + (1 - 2 / math.pi) * math.cos(math.pi / (4 * b)))
        else:
            num = math.sin(math.pi * x * (1 - b)) + 4 * b * x * math.cos(math.pi * x * (1 + b))
            h[k] = num / (math.pi * x * (1 - (4 * b * x) ** 2))
    return h / math.sqrt(np.sum(h ** 2))


def rrc_response(n: int, sps: int, rolloff: float) -> np.ndarray:
    """Frequency response of a unit-energy RRC filter on an n-point cyclic grid.

    Applying it in the frequency domain avoids the inter-symbol interference
    that truncating the impulse response would leave.
    """
    f = np.abs(np.fft.fftfreq(n, 1.0 / sps))  # in units of the symbol rate
    lo, hi = 0.5 * (1.0 - rolloff), 0.5 * (1.0 + rolloff)
    h = np.zeros(n)
    h[f <= lo] = 1.0
    edge = (f > lo) & (f < hi)
    if rolloff > 0:
        h[edge] = np.sqrt(0.5 * (1.0 + np.cos(np.pi / rolloff * (f[edge] - lo))))
    return h


def _rrc_filter(x: np.ndarray, sps: int, rolloff: float) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(x) * rrc_response(x.size, sps, rolloff))


@dataclass
class Baseband:
    envelope: np.ndarray
    sample_rate: float
    symbols: np.ndarray
    sps: int
    rolloff: float
    fmt: ModFormat
    baud: float

    @property
    def n_symbols(self) -> int:
        return self.symbols.size


def modulate(bits: np.ndarray, fmt: str | ModFormat, baud: float, rolloff: float = 0.35,
             sps: int = 8) -> Baseband:
    """Cyclic RRC-shaped complex envelope with unit average power."""
    fmt = get_format(fmt)
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError("rolloff must lie in [0, 1]")
    symbols = map_bits(bits, fmt)
    up = np.zeros(symbols.size * sps, dtype=complex)
    up[::sps] = symbols
    env = _rrc_filter(up, sps, rolloff) * sps
    return Baseband(env, baud * sps, symbols, sps, rolloff, fmt, baud)


def matched_filter(envelope: np.ndarray, rolloff: float, sps: int) -> np.ndarray:
    return _rrc_filter(np.asarray(envelope, dtype=complex), sps, rolloff)


def evm_of_symbols(received: np.ndarray, reference: np.ndarray):
    """RMS EVM (fraction) and the normalised received points.

    The reference is fitted to the received symbols by one least-squares
    complex gain, which is then divided out; unlike scaling the received
    points onto the reference this does not shrink the noise.
    """
    r = np.asarray(received, dtype=complex)
    s = np.asarray(reference, dtype=complex)
    gain = np.vdot(s, r) / np.vdot(s, s).real
    if gain == 0:
        raise SyncError("received symbols carry no component of the reference")
    scaled = r / gain
    evm = math.sqrt(np.mean(np.abs(scaled - s) ** 2) / np.mean(np.abs(s) ** 2))
    return evm, scaled


@dataclass
class EvmReport:
    format: str
    baud: float
    arch: str
    f_target: float
    evm_rms: float  # percent
    n_symbols: int
    rolloff: float
    fec_threshold: float  # percent
    constellation: np.ndarray = field(repr=False, default=None)
    reference: np.ndarray = field(repr=False, default=None)

    @property
    def fec_pass(self) -> bool:
        return self.evm_rms <= self.fec_threshold


def demodulate_and_evm(envelope: np.ndarray, reference: Baseband, arch: str = "loopback",
                       f_target: float = 0.0, discard: int = 0, min_corr: float = 0.5) -> EvmReport:
    """Matched filter, data-aided timing, least-squares scale and EVM.

    Timing is the sample offset whose symbol-rate samples correlate best with
    the known reference symbols; the block is cyclic so offsets wrap.
    """
    env = np.asarray(envelope, dtype=complex)
    sps = reference.sps
    if env.size != reference.envelope.size:
        raise SyncError(f"received block has {env.size} samples, reference has {reference.envelope.size}")
    kept = reference.n_symbols - 2 * discard
    if kept < 1000:
        raise SyncError(f"only {kept} symbols left after discarding; need >= 1000")
    mf = matched_filter(env, reference.rolloff, sps)
    ref = reference.symbols[discard:reference.n_symbols - discard]
    best = (-1.0, 0)
    for offset in range(-(sps // 2), sps - sps // 2):
        samples = np.roll(mf, -offset)[::sps][discard:reference.n_symbols - discard]
        norm = math.sqrt(np.vdot(samples, samples).real * np.vdot(ref, ref).real)
        corr = abs(np.vdot(samples, ref)) / norm if norm > 0 else 0.0
        if corr > best[0]:
            best = (corr, offset)
    corr, offset = best
    if corr < min_corr:
        raise SyncError(f"sync failed: best normalised correlation {corr:.3f} at offset {offset} "
                        f"(threshold {min_corr})")
    samples = np.roll(mf, -offset)[::sps][discard:reference.n_symbols - discard]
    evm, scaled = evm_of_symbols(samples, ref)
    return EvmReport(reference.fmt.tag, reference.baud, str(arch), f_target, 100.0 * evm, kept,
                     reference.rolloff, fec_threshold(reference.fmt.tag), scaled, ref)


def ber_from_evm_awgn(evm: float, fmt: str | ModFormat) -> float:
    """Gray-coded BER of square QAM in AWGN with the given rms EVM (fraction)."""
    fmt = get_format(fmt)
    m = 2 ** fmt.bits_per_symbol
    side = int(round(math.sqrt(m)))
    # half the minimum distance of the unit-power grid, over the per-axis noise std
    d = math.sqrt(3.0 / (2.0 * (m - 1)))
    x = d / (evm / math.sqrt(2.0))
    q = 0.5 * erfc(x / math.sqrt(2.0))
    return 2.0 * (1.0 - 1.0 / side) * q / math.log2(side)


@functools.lru_cache(maxsize=None)
def _fec_threshold_cached(tag: str, ber: float, n_symbols: int, seed: int) -> float:
    fmt = get_format(tag)
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, n_symbols * fmt.bits_per_symbol, dtype=np.uint8)
    symbols = map_bits(bits, fmt)
    noise = (rng.standard_normal(n_symbols) + 1j * rng.standard_normal(n_symbols)) / math.sqrt(2.0)

    def measured_ber(evm):
        rx = symbols + evm * noise
        return np.count_nonzero(hard_decision_bits(rx, fmt) != bits) / bits.size

    lo, hi = 0.01, 1.0
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if measured_ber(mid) > ber:
            hi = mid
        else:
            lo = mid
    return 100.0 * math.sqrt(lo * hi)


def fec_threshold(fmt: str | ModFormat, ber: float = FEC_BER, n_symbols: int = 1_000_000,
                  seed: int = 3805) -> float:
    """EVM (percent) at which hard-decision BER in AWGN reaches ``ber``.

    Found by bisection on a fixed Monte Carlo noise realisation so the result
    is deterministic; cached per process.
    """
    return _fec_threshold_cached(get_format(fmt).tag, float(ber), int(n_symbols), int(seed))


# --- stimulus for the mixer -------------------------------------------------

def complex_mode_baseband(mode: ComplexMode, sps: int = 8) -> Baseband:
    fmt = get_format(mode.format)
    bits = prbs_bits(mode.n_symbols * fmt.bits_per_symbol, seed=mode.seed)
    return modulate(bits, fmt, mode.baud, mode.rolloff, sps)


@functools.lru_cache(maxsize=8)
def _cached_baseband(mode: ComplexMode, sps: int) -> Baseband:
    return complex_mode_baseband(mode, sps)


def rf_waveform(mode: ComplexMode, t: np.ndarray, sps: int = 16) -> np.ndarray:
    """Real RF signal at ``mode.rf_carrier``, scaled by its peak envelope so |rf| <= 1.

    The symbol block repeats with period ``n_symbols / baud``.
    """
    bb = _cached_baseband(mode, sps)
    period = bb.n_symbols / bb.baud
    grid = np.arange(bb.envelope.size + 1) / bb.sample_rate
    env = np.append(bb.envelope, bb.envelope[0])
    tt = np.mod(np.asarray(t, dtype=float), period)
    e = np.interp(tt, grid, env.real) + 1j * np.interp(tt, grid, env.imag)
    peak = np.max(np.abs(bb.envelope))
    return np.real(e * np.exp(2j * math.pi * mode.rf_carrier * np.asarray(t))) / peak


# --- one-pole sideband mixer --------------------------------------------------

def sideband_transfer(op: OperatingPoint, spectrum: HarmonicSpectrum, i: int,
                      f_data) -> np.ndarray:
    """H with p_out(i f_ck - f) = H(f) conj(p_dat(f)) for data tones at ``f``.

    Switching samples with the clock response at i f_ck, so H is flat; in
    Modulation the data drives the carriers, so H follows the one-pole
    response at the data frequency.
    """
    from .smallsignal import first_order_density

    f_data = np.asarray(f_data, dtype=float)
    p_ck = spectrum[i]
    pref = op.c_op / 16.0
    if op.arch is Architecture.SWITCHING:
        n_ck = first_order_density(op, p_ck, 2.0 * math.pi * spectrum.frequency(i), "+", op.eta)
        return np.full(f_data.shape, pref * n_ck, dtype=complex)
    n_dat = first_order_density(op, 1.0, 2.0 * math.pi * f_data, "conjugate", op.kappa)
    return pref * p_ck * n_dat


def one_pole_mixer(envelope: np.ndarray, sample_rate: float, f_carrier: float,
                   op: OperatingPoint, spectrum: HarmonicSpectrum, i: int,
                   power_factor: float = 1.0) -> np.ndarray:
    """Up-converted envelope at i f_ck - f_carrier, conjugated back to the data orientation.

    The product is the lower sideband, so its spectrum is mirrored; returning
    the conjugate keeps the constellation comparable with the reference.
    """
    env = np.asarray(envelope, dtype=complex)
    offsets = np.fft.fftfreq(env.size, 1.0 / sample_rate)
    h = sideband_transfer(op, spectrum, i, f_carrier + offsets)
    return np.fft.ifft(np.fft.fft(env) * np.conj(h)) * math.sqrt(power_factor)


# --- sweep --------------------------------------------------------------------

@dataclass(frozen=True)
class EvmSweepConfig:
    formats: tuple = ("qpsk", "qam16")
    bauds: tuple = (64e6, 128e6, 256e6, 512e6)
    archs: tuple = ("switching", "modulation")
    indices: tuple = (1, 4)
    rf_carrier: float = 0.75e9
    rolloff: float = 0.35
    sps: int = 8
    n_symbols: int = 2048
    modulation_index: float = 0.3
    input_noise_dbm_hz: float = -174.0
    output_noise_dbm_hz: float = -161.0
    include_reference: bool = True
    seed: int = 1

    def __post_init__(self):
        for tag in self.formats:
            get_format(tag)
        for arch in self.archs:
            Architecture.parse(arch)
        for baud in self.bauds:
            ComplexMode(baud=baud, rf_carrier=self.rf_carrier, rolloff=self.rolloff)
        if self.sps < 2:
            raise ValueError("sps must be at least 2")


def _point_seed(seed: int, fmt: str, baud: float, arch: str, i: int) -> int:
    key = f"{seed}|{fmt}|{baud:.0f}|{arch}|{i}"
    return int.from_bytes(key.encode(), "little") % (2 ** 31 - 1) or 1


def evm_point(fmt: str, baud: float, arch: str, i: int, config: EvmSweepConfig,
              operating_points: dict, spectra: dict, factors: dict, p_dat_avg: dict,
              chain: rf_chain.ChainSpec | None = None) -> EvmReport:
    """One EVM measurement; ``arch='reference'`` measures the input signal without the mixer."""
    chain = chain or rf_chain.ChainSpec()
    fmt_obj = get_format(fmt)
    seed = _point_seed(config.seed, fmt_obj.tag, baud, arch, i)
    bits = prbs_bits(config.n_symbols * fmt_obj.bits_per_symbol, seed=seed)
    bb = modulate(bits, fmt_obj, baud, config.rolloff, config.sps)
    rng = np.random.default_rng(seed)
    fs = bb.sample_rate
    mean_power = p_dat_avg["reference" if arch == "reference" else Architecture.parse(arch)]
    amp = chain.responsivity * config.modulation_index * mean_power * math.sqrt(chain.load_impedance / 2.0)
    x = bb.envelope / np.max(np.abs(bb.envelope)) * amp
    x = rf_chain.add_noise_psd(x, fs, rf_chain.dbm_to_watts(config.input_noise_dbm_hz), rng)
    if arch == "reference":
        f_target = config.rf_carrier
        z = x
    else:
        a = Architecture.parse(arch)
        f_target = i * spectra[a].fundamental - config.rf_carrier
        z = one_pole_mixer(x, fs, config.rf_carrier, operating_points[a], spectra[a], i,
                           factors.get(a, {}).get(i, 1.0))
        z = rf_chain.add_noise_psd(z, fs, rf_chain.dbm_to_watts(config.output_noise_dbm_hz), rng)
    if_sig = rf_chain.downconvert(z, fs, f_target, chain)
    return demodulate_and_evm(if_sig.envelope, bb, arch, f_target)


def _evm_task(args):
    return evm_point(*args)


def evm_sweep(config: EvmSweepConfig, operating_points: dict, spectra: dict, factors: dict,
              p_dat_avg: dict, chain: rf_chain.ChainSpec | None = None,
              workers: int = 1) -> list[EvmReport]:
    """EVM for every (format, baud, arch, harmonic) tuple, ordered as enumerated."""
    tasks = []
    for fmt in config.formats:
        for baud in config.bauds:
            if config.include_reference:
                tasks.append((fmt, baud, "reference", 0))
            for arch in config.archs:
                for i in config.indices:
                    tasks.append((fmt, baud, Architecture.parse(arch).value, i))
    for fmt in config.formats:
        fec_threshold(fmt)
    args = [t + (config, operating_points, spectra, factors, p_dat_avg, chain) for t in tasks]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evm_task, args))
    return [_evm_task(a) for a in args]


def write_evm_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["format", "baud_Hz", "arch", "f_target_Hz", "evm_pct", "n_symbols",
                         "rolloff", "fec_threshold_pct", "fec_pass"])
        for r in reports:
            writer.writerow([r.format, f"{r.baud:.0f}", r.arch, f"{r.f_target:.0f}", f"{r.evm_rms:.6f}",
                             r.n_symbols, f"{r.rolloff:g}", f"{r.fec_threshold:.6f}", int(r.fec_pass)])


def write_constellation_csv(path, report: EvmReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["I", "Q", "ref_I", "ref_Q"])
        for r, s in zip(report.constellation, report.reference):
            writer.writerow([f"{r.real:.9e}", f"{r.imag:.9e}", f"{s.real:.9e}", f"{s.imag:.9e}"])
