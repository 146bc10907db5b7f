"""Nonlinear rate-equation simulation of the SOA-MZI, used as an independent oracle.

Each SOA is a single lumped section obeying

    dN/dt = I/(qV) - N/tau - K (G(N) - 1) P_s(t)

with G(N) the exponential gain law and P_s the power reaching that SOA after
the input couplers. Output ports combine the arms through the interferometer
power law with instantaneous gains and phases. Integration is classical RK4
on a fixed step; inputs are evaluated analytically at the half steps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import brentq

from . import soa
from .signals import (ComplexMode, DataSignalSpec, PulseTrainSpec, SinusoidMode, SignalError,
                      pulse_shape)
from .smallsignal import (PORT_A_COUPLING, PORT_C_COUPLING, Architecture, OperatingPoint,
                          mzi_output_power, mzi_output_power_i)
from .soa import SoaParams

__all__ = [
    "SimulationError",
    "MixerSetup",
    "SimOutput",
    "steady_state_density",
    "integrate_rate_equation",
    "simulate",
    "extract_tone",
    "linearized_operating_point",
    "quasi_static_sweep",
    "LinearityResult",
    "find_linearity_point",
    "step_response_lifetime",
    "xpm_response",
    "write_sweep_csv",
]


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MixerSetup:
    """Everything the oracle needs besides the time grid."""

    arch: Architecture
    clock: PulseTrainSpec
    data: DataSignalSpec
    soa1: SoaParams = field(default_factory=SoaParams)
    soa2: SoaParams = field(default_factory=SoaParams)
    wavelength: float = 1557.4e-9
    phi0: float = 0.0
    port_a_coupling: float = PORT_A_COUPLING
    port_c_coupling: float = PORT_C_COUPLING

    def __post_init__(self):
        object.__setattr__(self, "arch", Architecture.parse(self.arch))

    def port_powers(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(P_A, P_C) at the interferometer inputs."""
        ck = self.clock.avg_power * pulse_shape(self.clock, t)
        dat = data_power(self.data, t)
        if self.arch is Architecture.SWITCHING:
            return ck, dat
        return dat, ck

    def soa_inputs(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p_a, p_c = self.port_powers(t)
        p1 = self.port_a_coupling * p_a + self.port_c_coupling * p_c
        p2 = self.port_c_coupling * p_c
        return p1, p2, p_c

    @property
    def mean_port_powers(self) -> tuple[float, float]:
        if self.arch is Architecture.SWITCHING:
            return self.clock.avg_power, self.data.avg_power
        return self.data.avg_power, self.clock.avg_power

    @property
    def mean_soa_inputs(self) -> tuple[float, float]:
        p_a, p_c = self.mean_port_powers
        return (self.port_a_coupling * p_a + self.port_c_coupling * p_c,
                self.port_c_coupling * p_c)


def data_power(spec: DataSignalSpec, t: np.ndarray) -> np.ndarray:
    mode = spec.mode
    if isinstance(mode, SinusoidMode):
        return spec.avg_power * (1.0 + mode.modulation_index * np.cos(2.0 * math.pi * mode.frequency * t))
    if isinstance(mode, ComplexMode):
        from .dsp_evm import rf_waveform

        return spec.avg_power * (1.0 + mode.modulation_index * rf_waveform(mode, t))
    raise SignalError(f"unsupported data mode {mode!r}")


@dataclass
class SimOutput:
    sample_rate: float
    t: np.ndarray
    p_in: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    p_i: np.ndarray
    p_j: np.ndarray
    setup: MixerSetup | None = None

    @property
    def duration(self) -> float:
        return self.t.size / self.sample_rate

    def port(self, name: str) -> np.ndarray:
        return {"I": self.p_i, "J": self.p_j}[name.upper()]

    def conservation_error(self) -> float:
        """Max relative violation of P_I + P_J = P_in (G1 + G2) / 4."""
        ref = 0.25 * self.p_in * (self.g1 + self.g2)
        return float(np.max(np.abs(self.p_i + self.p_j - ref) / np.maximum(ref, 1e-300)))


def steady_state_density(params: SoaParams, p_s: float, k: float) -> float:
    """Carrier density balancing pump, spontaneous and stimulated recombination."""
    pump = params.pump_rate
    tau = params.carrier_lifetime

    def f(n):
        return pump - n / tau - k * (math.exp(soa.log_gain(params, n)) - 1.0) * p_s

    hi = pump * tau
    if p_s <= 0.0:
        return hi
    # f decreases monotonically in N; below-transparency absorption can push the root above I tau/qV
    while f(hi) > 0.0:
        hi *= 1.5
        if hi > 1e30:
            raise SimulationError("no steady state found")
    return brentq(f, 1e-12 * hi, hi, xtol=1e-6, rtol=1e-15, maxiter=200)


@njit(cache=True)
def _rk4(n0, pump, tau, k, slope, offset, p_half, dt):
    # p_half holds the input power at t_0, t_0 + dt/2, t_0 + dt, ...
    m = (p_half.size - 1) // 2
    out = np.empty(m + 1)
    out[0] = n0
    n = n0
    for s in range(m):
        pa = p_half[2 * s]
        pb = p_half[2 * s + 1]
        pc = p_half[2 * s + 2]
        k1 = pump - n / tau - k * (math.exp(slope * n + offset) - 1.0) * pa
        x = n + 0.5 * dt * k1
        k2 = pump - x / tau - k * (math.exp(slope * x + offset) - 1.0) * pb
        x = n + 0.5 * dt * k2
        k3 = pump - x / tau - k * (math.exp(slope * x + offset) - 1.0) * pb
        x = n + dt * k3
        k4 = pump - x / tau - k * (math.exp(slope * x + offset) - 1.0) * pc
        n = n + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[s + 1] = n
    return out


def integrate_rate_equation(params: SoaParams, p_half: np.ndarray, dt: float, n0: float,
                            k: float) -> np.ndarray:
    """RK4 trajectory of N for inputs sampled on the half-step grid."""
    slope = params.gain_slope
    offset = -slope * params.transparency_density + params.internal_loss * params.length
    n = _rk4(float(n0), params.pump_rate, params.carrier_lifetime, float(k), slope, offset,
             np.ascontiguousarray(p_half, dtype=float), float(dt))
    if not np.all(np.isfinite(n)) or np.any(n <= 0.0):
        raise SimulationError("carrier density became non-positive or non-finite; reduce the step")
    if np.max(np.abs(n)) > 10.0 * abs(n0):
        raise SimulationError("carrier density left 10x its steady value; step size unstable")
    return n


def simulate(setup: MixerSetup, samples_per_period: int = 1024, n_periods: int = 80,
             transient_periods: int = 32, t_start: float = 0.0) -> SimOutput:
    """Run both SOAs over ``transient_periods + n_periods`` clock periods.

    Only the last ``n_periods`` are returned; their start time is the grid
    origin used for tone extraction.
    """
    clock = setup.clock
    dt = clock.period / samples_per_period
    if clock.fwhm / dt < 16:
        raise SimulationError("step does not resolve the pulse FWHM with 16 samples")
    if n_periods < 1 or transient_periods < 0:
        raise SimulationError("period counts must be positive")
    m_total = (n_periods + transient_periods) * samples_per_period
    t0 = t_start - transient_periods * clock.period
    t_half = t0 + 0.5 * dt * np.arange(2 * m_total + 1)
    p1, p2, p_c = setup.soa_inputs(t_half)
    k = soa.k_constant(setup.soa1, setup.wavelength)
    k2 = soa.k_constant(setup.soa2, setup.wavelength)
    ps1, ps2 = setup.mean_soa_inputs
    n1 = integrate_rate_equation(setup.soa1, p1, dt, steady_state_density(setup.soa1, ps1, k), k)
    n2 = integrate_rate_equation(setup.soa2, p2, dt, steady_state_density(setup.soa2, ps2, k2), k2)
    keep = slice(transient_periods * samples_per_period, m_total)
    n1 = n1[keep]
    n2 = n2[keep]
    p_in = p_c[::2][keep]
    t = t_half[::2][keep]
    g1 = np.exp(setup.soa1.gain_slope * (n1 - setup.soa1.transparency_density)
                + setup.soa1.internal_loss * setup.soa1.length)
    g2 = np.exp(setup.soa2.gain_slope * (n2 - setup.soa2.transparency_density)
                + setup.soa2.internal_loss * setup.soa2.length)
    phi1 = -0.5 * setup.soa1.henry_factor * np.log(g1)
    phi2 = -0.5 * setup.soa2.henry_factor * np.log(g2)
    p_j = mzi_output_power(p_in, g1, g2, phi1, phi2, setup.phi0)
    p_i = mzi_output_power_i(p_in, g1, g2, phi1, phi2, setup.phi0)
    return SimOutput(1.0 / dt, t, p_in, n1, n2, g1, g2, phi1, phi2, p_i, p_j, setup)


def extract_tone(out: SimOutput | np.ndarray, f: float, sample_rate: float | None = None) -> complex:
    """Complex coefficient p of the component 1/2 (p exp(j w t) + c.c.) at ``f``.

    ``f`` must sit on the DFT grid of the record; ``f = 0`` returns the mean.
    """
    if isinstance(out, SimOutput):
        x = out.p_j
        fs = out.sample_rate
    else:
        x = np.asarray(out, dtype=float)
        if sample_rate is None:
            raise ValueError("sample_rate required for raw arrays")
        fs = sample_rate
    n = x.size
    duration = n / fs
    kf = f * duration
    k = int(round(kf))
    if abs(kf - k) > 1e-6:
        raise SignalError(f"{f:g} Hz is not on the record's frequency grid (bin {kf:.6f})")
    if k == 0:
        return complex(np.mean(x))
    if not 0 < k < n // 2:
        raise SignalError("frequency beyond Nyquist")
    # single-bin DFT; cheaper than a full FFT and exact on-grid
    return complex(2.0 * np.mean(x * np.exp(-2j * math.pi * k * np.arange(n) / n)))


def linearized_operating_point(setup: MixerSetup) -> OperatingPoint:
    """Operating point and differential lifetime implied by the mean SOA inputs."""
    k = soa.k_constant(setup.soa1, setup.wavelength)
    ps1, ps2 = setup.mean_soa_inputs
    n1 = steady_state_density(setup.soa1, ps1, k)
    n2 = steady_state_density(setup.soa2, ps2, soa.k_constant(setup.soa2, setup.wavelength))
    g1 = soa.gain(setup.soa1, n1)
    g2 = soa.gain(setup.soa2, n2)
    tau_d = 1.0 / (1.0 / setup.soa1.carrier_lifetime + k * setup.soa1.gain_slope * g1 * ps1)
    return OperatingPoint(setup.arch, g1, g2, tau_d, setup.soa1, setup.wavelength, setup.phi0,
                          setup.port_a_coupling, setup.port_c_coupling)


# --- quasi-static characterisation ------------------------------------------

def quasi_static_sweep(setup: MixerSetup, p_ctrl: Sequence[float], samples_per_period: int = 1024,
                       n_periods: int = 4, transient_periods: int = 40) -> dict[str, np.ndarray]:
    """Sweep the port-A average power with the port-C input held fixed.

    Switching records the 10 GHz optical modulation power |p| at ports I and
    J; Modulation records the average output power of each port. Data
    modulation is removed (CW) for the sweep.
    """
    p_ctrl = np.asarray(p_ctrl, dtype=float)
    if p_ctrl.size < 2 or np.any(np.diff(p_ctrl) <= 0):
        raise ValueError("p_ctrl grid must be strictly increasing")
    cw = DataSignalSpec(avg_power=setup.data.avg_power, wavelength=setup.data.wavelength,
                        mode=SinusoidMode(frequency=setup.clock.rep_rate, modulation_index=0.0))
    y_i = np.empty(p_ctrl.size)
    y_j = np.empty(p_ctrl.size)
    failed = []
    for idx, pc in enumerate(p_ctrl):
        if setup.arch is Architecture.SWITCHING:
            s = MixerSetup(setup.arch, _with_power(setup.clock, pc), cw, setup.soa1, setup.soa2,
                           setup.wavelength, setup.phi0, setup.port_a_coupling, setup.port_c_coupling)
        else:
            cw_ctrl = DataSignalSpec(avg_power=pc, wavelength=setup.data.wavelength, mode=cw.mode)
            s = MixerSetup(setup.arch, setup.clock, cw_ctrl, setup.soa1, setup.soa2,
                           setup.wavelength, setup.phi0, setup.port_a_coupling, setup.port_c_coupling)
        try:
            out = simulate(s, samples_per_period, n_periods, transient_periods)
        except SimulationError:
            failed.append(idx)
            y_i[idx] = y_j[idx] = np.nan
            continue
        if setup.arch is Architecture.SWITCHING:
            f = setup.clock.rep_rate
            y_i[idx] = abs(extract_tone(out.p_i, f, out.sample_rate))
            y_j[idx] = abs(extract_tone(out.p_j, f, out.sample_rate))
        else:
            y_i[idx] = float(np.mean(out.p_i))
            y_j[idx] = float(np.mean(out.p_j))
    result = {"p_ctrl": p_ctrl, "I": y_i, "J": y_j}
    if failed:
        result["failed"] = np.asarray(failed)
    return result


def _with_power(spec: PulseTrainSpec, power: float) -> PulseTrainSpec:
    return PulseTrainSpec(spec.rep_rate, spec.fwhm, power, spec.shape, spec.wavelength)


@dataclass
class LinearityResult:
    p_ctrl: float
    roots: list[float]
    poly: np.polynomial.Polynomial
    sd: np.polynomial.Polynomial

    @property
    def p_ctrl_dbm(self) -> float:
        return 10.0 * math.log10(self.p_ctrl / 1e-3)


class LinearityNotFound(SimulationError):
    def __init__(self, msg, sd=None):
        super().__init__(msg)
        self.sd = sd


def find_linearity_point(x: Sequence[float], y: Sequence[float], order: int = 5) -> LinearityResult:
    """Zero of the second derivative of a polynomial fit of y(x).

    Returns the smallest sign-changing root inside the sweep range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    good = np.isfinite(y)
    x, y = x[good], y[good]
    if x.size < max(10, order + 1):
        raise ValueError("need at least 10 finite sweep points")
    poly = np.polynomial.Polynomial.fit(x, y, order)
    sd = poly.deriv(2)
    lo, hi = x.min(), x.max()
    roots = []
    for r in sd.roots():
        if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)):
            continue
        r = float(r.real)
        if not lo <= r <= hi:
            continue
        eps = 1e-6 * (hi - lo)
        if np.sign(sd(r - eps)) != np.sign(sd(r + eps)):
            roots.append(r)
    roots.sort()
    if not roots:
        raise LinearityNotFound("second derivative has no sign change inside the sweep", sd)
    return LinearityResult(roots[0], roots, poly, sd)


# --- linearisation diagnostics ----------------------------------------------

def step_response_lifetime(params: SoaParams, p_s: float, wavelength: float = 1557.4e-9,
                           step: float = 0.01, dt: float = 0.1e-12) -> float:
    """Relaxation time of N after a small step in the SOA input power."""
    k = soa.k_constant(params, wavelength)
    n_start = steady_state_density(params, p_s, k)
    n_end = steady_state_density(params, p_s * (1 + step), k)
    n_steps = int(round(20 * params.carrier_lifetime / dt))
    p_half = np.full(2 * n_steps + 1, p_s * (1 + step))
    n = integrate_rate_equation(params, p_half, dt, n_start, k)
    frac = (n - n_end) / (n_start - n_end)
    t = np.arange(n.size) * dt
    sel = (frac < 0.9) & (frac > 0.05)
    slope = np.polyfit(t[sel], np.log(frac[sel]), 1)[0]
    return -1.0 / slope


def xpm_response(params: SoaParams, p_s: float, freqs: Sequence[float],
                 wavelength: float = 1557.4e-9, depth: float = 0.01,
                 samples_per_period: int = 256, n_periods: int = 8) -> np.ndarray:
    """Complex carrier-density response to a weak sinusoidal input, per frequency."""
    k = soa.k_constant(params, wavelength)
    n_bar = steady_state_density(params, p_s, k)
    out = []
    for f in freqs:
        period = 1.0 / f
        settle = int(math.ceil(20 * params.carrier_lifetime / period)) + 2
        m = (settle + n_periods) * samples_per_period
        dt = period / samples_per_period
        t_half = 0.5 * dt * np.arange(2 * m + 1)
        p_half = p_s * (1.0 + depth * np.cos(2 * math.pi * f * t_half))
        n = integrate_rate_equation(params, p_half, dt, n_bar, k)[settle * samples_per_period:m]
        out.append(extract_tone(n, f, 1.0 / dt) / (depth * p_s))
    return np.asarray(out)


def write_sweep_csv(path, sweep: dict[str, np.ndarray], quantity: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_ctrl_W", f"{quantity}_I_W", f"{quantity}_J_W"])
        for pc, yi, yj in zip(sweep["p_ctrl"], sweep["I"], sweep["J"]):
            writer.writerow([f"{pc:.9e}", f"{yi:.12e}", f"{yj:.12e}"])
