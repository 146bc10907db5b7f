"""Closed-form small-signal model of the SOA-MZI sampling mixer.

Complex amplitudes follow X(t) = X_avg + 1/2 (x exp(j w t) + conj(x) exp(-j w t)).

Coupler coefficients ``eta`` (clock) and ``kappa`` (data) are stored as power
transmissions from the input port to SOA1, so the clock-driven carrier
response is ``-eta * p * K * G1 * tau_d / (1 + j w tau_d)``. Port A reaches SOA1
through one 3 dB coupler (0.5); port C reaches each arm through two (0.25).
With ``eta = 0.5`` in the Switching case, ``C_OP * eta / 16 == C_OP / 32`` and
the prefactor reduces to K_a.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import soa
from .signals import HarmonicSpectrum, SignalError
from .soa import SoaParams

__all__ = [
    "Architecture",
    "OperatingPoint",
    "PerturbationSet",
    "UpconversionResult",
    "CalibrationError",
    "CalibrationResult",
    "PORT_A_COUPLING",
    "PORT_C_COUPLING",
    "DEFAULT_TAU_D",
    "mzi_output_power",
    "mzi_output_power_i",
    "steady_output",
    "delta_g_phi",
    "delta_g_phi_single",
    "first_order_density",
    "second_order_density",
    "upconverted_power",
    "conversion_gain",
    "conversion_gain_db",
    "cg_sweep",
    "calibrate",
    "write_cg_csv",
]

PORT_A_COUPLING = 0.5
PORT_C_COUPLING = 0.25
DEFAULT_TAU_D = 1.0 / (2.0 * math.pi * 6e9)  # 6 GHz XPM cut-off


class Architecture(str, enum.Enum):
    SWITCHING = "switching"
    MODULATION = "modulation"

    @classmethod
    def parse(cls, value: "Architecture | str") -> "Architecture":
        return value if isinstance(value, cls) else cls(str(value).lower())


@dataclass(frozen=True)
class OperatingPoint:
    arch: Architecture
    g1: float
    g2: float
    tau_d: float = DEFAULT_TAU_D
    soa: SoaParams = field(default_factory=SoaParams)
    wavelength: float = 1557.4e-9
    phi0: float = 0.0
    port_a_coupling: float = PORT_A_COUPLING
    port_c_coupling: float = PORT_C_COUPLING

    def __post_init__(self):
        object.__setattr__(self, "arch", Architecture.parse(self.arch))
        if not (self.g1 > 0 and self.g2 > 0):
            raise soa.SoaDomainError("steady gains must be positive")
        if not self.tau_d > 0:
            raise ValueError("tau_d must be positive")
        for name in ("port_a_coupling", "port_c_coupling"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if math.isclose(self.g1, self.g2, rel_tol=1e-12) and self.phi0 == 0.0:
            warnings.warn("balanced arms: C_OP vanishes and no up-conversion occurs",
                          RuntimeWarning, stacklevel=3)

    @property
    def dphase(self) -> float:
        """Phi_1 - Phi_2 of the steady state (static shifter excluded)."""
        return soa.differential_phase(self.g1, self.g2, self.soa.henry_factor)

    @property
    def eta(self) -> float:
        """Transmission of the clock from its input port to SOA1."""
        return self.port_a_coupling if self.arch is Architecture.SWITCHING else self.port_c_coupling

    @property
    def kappa(self) -> float:
        """Transmission of the data from its input port to SOA1."""
        return self.port_c_coupling if self.arch is Architecture.SWITCHING else self.port_a_coupling

    @property
    def k(self) -> float:
        return soa.k_constant(self.soa, self.wavelength)

    @property
    def p_sat(self) -> float:
        return soa.saturation_power(self.soa, self.wavelength)

    @property
    def dg_dn(self) -> float:
        return soa.gain_derivative(self.soa, self.g1)

    @property
    def dphi_dn(self) -> float:
        return soa.phase_derivative(self.soa)

    @property
    def c_op(self) -> float:
        return soa.c_op(self.g1, self.g2, self.dphase + self.phi0, self.dg_dn, self.dphi_dn)

    @property
    def k_a(self) -> float:
        """K * C_OP / 32."""
        return self.k * self.c_op / 32.0

    def with_(self, **changes) -> "OperatingPoint":
        return replace(self, **changes)


@dataclass(frozen=True)
class PerturbationSet:
    n1_clock: complex
    n1_data_conj: complex
    n2_mix: complex

    def at(self, which: str, conjugate: bool = False) -> complex:
        value = {"clock": self.n1_clock, "data": self.n1_data_conj.conjugate(),
                 "mix": self.n2_mix}[which]
        return value.conjugate() if conjugate else value


@dataclass(frozen=True)
class UpconversionResult:
    arch: Architecture
    index: int
    frequency: float
    p_out: complex
    p_dat: complex
    mode: str
    perturbations: PerturbationSet | None = None

    @property
    def cg(self) -> float:
        return abs(self.p_out / self.p_dat.conjugate()) ** 2

    @property
    def cg_db(self) -> float:
        return 10.0 * math.log10(self.cg)


def mzi_output_power(p_in, g1, g2, phi1, phi2, phi0=0.0):
    """Optical power at port J."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if np.any(g1 <= 0) or np.any(g2 <= 0):
        raise soa.SoaDomainError("gains must be positive")
    return 0.125 * p_in * (g1 + g2 - 2.0 * np.sqrt(g1 * g2) * np.cos(phi1 - phi2 + phi0))


def mzi_output_power_i(p_in, g1, g2, phi1, phi2, phi0=0.0):
    """Optical power at the complementary port I."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if np.any(g1 <= 0) or np.any(g2 <= 0):
        raise soa.SoaDomainError("gains must be positive")
    return 0.125 * p_in * (g1 + g2 + 2.0 * np.sqrt(g1 * g2) * np.cos(phi1 - phi2 + phi0))


def steady_output(op: OperatingPoint, p_in_avg: float) -> float:
    phi1 = soa.phase(op.soa, op.g1)
    phi2 = soa.phase(op.soa, op.g2)
    return float(mzi_output_power(p_in_avg, op.g1, op.g2, phi1, phi2, op.phi0))


def delta_g_phi(op: OperatingPoint, dg1, dg2, dphi1, dphi2):
    """First-order change of P_J / P_in for gain and phase perturbations of both arms."""
    root = math.sqrt(op.g1 * op.g2)
    dp = op.dphase + op.phi0
    return 0.125 * (dg1 + dg2
                    - root * (dg1 / op.g1 + dg2 / op.g2) * math.cos(dp)
                    + 2.0 * root * (dphi1 - dphi2) * math.sin(dp))


def delta_g_phi_single(op: OperatingPoint, dg1, dphi1):
    """Bracket of the SOA1-only expansion (no 1/8 prefactor)."""
    root = math.sqrt(op.g1 * op.g2)
    dp = op.dphase + op.phi0
    return dg1 - root / op.g1 * math.cos(dp) * dg1 + 2.0 * root * math.sin(dp) * dphi1


def first_order_density(op: OperatingPoint, p_coeff: complex, omega: float,
                        direction: str = "+", attenuation: float | None = None) -> complex:
    """First-order carrier-density coefficient of SOA1.

    ``direction='+'`` returns the response at ``+omega`` to ``p_coeff``;
    ``direction='conjugate'`` returns the conjugate coefficient at ``-omega``
    driven by ``conj(p_coeff)``. ``attenuation`` is the power transmission of
    the input port toward SOA1.
    """
    att = op.eta if attenuation is None else attenuation
    scale = op.k * op.g1 * op.tau_d * att
    if direction == "+":
        return -p_coeff * scale / (1.0 + 1j * omega * op.tau_d)
    if direction in ("conjugate", "-", "conj"):
        return -np.conj(p_coeff) * scale / (1.0 - 1j * omega * op.tau_d)
    raise ValueError(f"unknown direction {direction!r}")


def second_order_density(op: OperatingPoint, n1_ck: complex, n1_dat_conj: complex,
                         p_ck: complex, p_dat_conj: complex,
                         omega_ck: float, omega_dat: float) -> complex:
    """Carrier-density coefficient at omega_ck - omega_dat from the mixed product."""
    d2r = op.k * op.dg_dn
    forcing = n1_ck * p_dat_conj * d2r * op.kappa + n1_dat_conj * p_ck * d2r * op.eta
    return -forcing * op.tau_d / (2.0 * (1.0 + 1j * (omega_ck - omega_dat) * op.tau_d))


def _clock_coeff(spectrum: HarmonicSpectrum, i: int) -> complex:
    if i < 1:
        raise SignalError("harmonic index must be >= 1")
    return spectrum[i]


def upconverted_power(op: OperatingPoint, spectrum_ck: HarmonicSpectrum, p_dat: complex,
                      i: int, f_dat: float = 1e9, mode: str = "simplified",
                      p_dat_avg: float | None = None) -> UpconversionResult:
    """Output modulation power at i*f_ck - f_dat.

    ``mode='simplified'`` keeps only the first-order product; ``mode='full'``
    adds the second-order carrier term weighted by the port-C average power
    (``p_dat_avg`` for Switching, the clock average for Modulation).
    """
    p_ck = _clock_coeff(spectrum_ck, i)
    f_ck = spectrum_ck.frequency(i)
    w_ck = 2.0 * math.pi * f_ck
    w_dat = 2.0 * math.pi * f_dat
    p_dat = complex(p_dat)
    n_ck = first_order_density(op, p_ck, w_ck, "+", op.eta)
    n_dat_c = first_order_density(op, p_dat, w_dat, "conjugate", op.kappa)
    pref = op.c_op / 16.0
    if op.arch is Architecture.SWITCHING:
        p_out = pref * p_dat.conjugate() * n_ck
    else:
        p_out = pref * p_ck * n_dat_c
    n_mix = 0j
    if mode == "full":
        n_mix = second_order_density(op, n_ck, n_dat_c, p_ck, p_dat.conjugate(), w_ck, w_dat)
        if op.arch is Architecture.SWITCHING:
            if p_dat_avg is None:
                raise ValueError("full mode for Switching needs p_dat_avg")
            p_in_avg = p_dat_avg
        else:
            p_in_avg = spectrum_ck.dc
        p_out += pref * p_in_avg * 2.0 * n_mix
    elif mode != "simplified":
        raise ValueError(f"unknown mode {mode!r}")
    return UpconversionResult(op.arch, i, f_ck - f_dat, complex(p_out), p_dat, mode,
                              PerturbationSet(n_ck, n_dat_c, n_mix))


def conversion_gain(op: OperatingPoint, spectrum_ck: HarmonicSpectrum, i: int,
                    f_dat: float = 1e9) -> float:
    """Closed-form electrical conversion gain (linear), independent of the data amplitude."""
    p_ck = _clock_coeff(spectrum_ck, i)
    k_eff = op.k * op.c_op * op.eta / 16.0 if op.arch is Architecture.SWITCHING \
        else op.k * op.c_op * op.kappa / 16.0
    if op.arch is Architecture.SWITCHING:
        w = 2.0 * math.pi * spectrum_ck.frequency(i)
        h = 1.0 / (1.0 + 1j * w * op.tau_d)
    else:
        w = 2.0 * math.pi * f_dat
        h = 1.0 / (1.0 - 1j * w * op.tau_d)
    return abs(-k_eff * p_ck * op.g1 * op.tau_d * h) ** 2


def conversion_gain_db(op: OperatingPoint, spectrum_ck: HarmonicSpectrum, i: int,
                       f_dat: float = 1e9) -> float:
    return 10.0 * math.log10(conversion_gain(op, spectrum_ck, i, f_dat))


def cg_sweep(op: OperatingPoint, spectrum_ck: HarmonicSpectrum, indices: Iterable[int],
             mod_indices: Sequence[float], p_dat_avg: float, f_dat: float = 1e9,
             mode: str = "simplified") -> list[dict]:
    rows = []
    for i in indices:
        for m in mod_indices:
            res = upconverted_power(op, spectrum_ck, m * p_dat_avg, i, f_dat, mode, p_dat_avg)
            rows.append({"arch": op.arch.value, "i": i, "f_target_Hz": res.frequency,
                         "CG_dB": res.cg_db, "mode": mode, "m_dat": m})
    return rows


def write_cg_csv(path, rows: Iterable[dict]) -> None:
    cols = ["arch", "i", "f_target_Hz", "CG_dB", "mode", "m_dat"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["f_target_Hz"] = f"{row['f_target_Hz']:.6e}"
            out["CG_dB"] = f"{row['CG_dB']:.9f}"
            out["m_dat"] = f"{row['m_dat']:.6g}"
            writer.writerow(out)


# --- calibration -----------------------------------------------------------

class CalibrationError(ValueError):
    pass


@dataclass
class CalibrationResult:
    operating_points: dict[Architecture, OperatingPoint]
    residuals_db: list[tuple[Architecture, int, float]]
    success: bool

    @property
    def max_abs_residual(self) -> float:
        return max(abs(r) for _, _, r in self.residuals_db)

    @property
    def rms_residual(self) -> float:
        return math.sqrt(np.mean([r * r for _, _, r in self.residuals_db]))


TAU_D_BOUNDS = (10e-12, 100e-12)


def calibrate(anchors: Sequence[tuple], priors: dict, spectra: dict,
              f_dat: float = 1e9, regularization: float = 1e-3,
              output_factors: dict | None = None) -> CalibrationResult:
    """Fit G1 and tau_d per architecture to measured CG anchors.

    ``anchors`` holds ``(arch, i, cg_db)`` tuples. ``priors`` maps each
    architecture to a starting :class:`OperatingPoint`; its G2/G1 ratio is held
    fixed because CG alone only constrains the product of G1 and the
    interferometric bracket. ``spectra`` maps each architecture to the clock
    harmonics seen by the model. A weak pull toward the prior keeps directions
    the anchors leave undetermined at their prior values.

    ``output_factors`` optionally maps an architecture to ``{i: power factor}``
    applied to the modelled CG, e.g. the optical filter transmission at the
    sideband frequency.
    """
    by_arch: dict[Architecture, list[tuple[int, float]]] = {}
    for arch, i, cg_db in anchors:
        by_arch.setdefault(Architecture.parse(arch), []).append((int(i), float(cg_db)))
    if not by_arch:
        raise CalibrationError("no anchors given")
    for arch, items in by_arch.items():
        if len(items) < 2:
            raise CalibrationError(
                f"{arch.value}: {len(items)} anchor(s) cannot determine the free parameters "
                "G1 (with G2/G1 held) and tau_d; need at least 2")

    fitted: dict[Architecture, OperatingPoint] = {}
    residuals: list[tuple[Architecture, int, float]] = []
    ok = True
    for arch, items in by_arch.items():
        prior: OperatingPoint = priors[Architecture.parse(arch)]
        if prior.arch is not arch:
            prior = prior.with_(arch=arch)
        spectrum = spectra[arch]
        factors = (output_factors or {}).get(arch, {})
        ratio = prior.g2 / prior.g1
        lo, hi = TAU_D_BOUNDS
        x0 = np.array([math.log(prior.g1), math.log(min(max(prior.tau_d, lo * 1.0001), hi * 0.9999))])

        def build(x):
            g1 = math.exp(x[0])
            return prior.with_(g1=g1, g2=g1 * ratio, tau_d=math.exp(x[1]))

        def model_db(op, i):
            return conversion_gain_db(op, spectrum, i, f_dat) + 10.0 * math.log10(factors.get(i, 1.0))

        def resid(x):
            op = build(x)
            r = [model_db(op, i) - cg for i, cg in items]
            r.extend(regularization * (x - x0))
            return np.array(r)

        sol = least_squares(resid, x0, bounds=([-np.inf, math.log(lo)], [np.inf, math.log(hi)]),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14)
        ok &= bool(sol.success)
        op = build(sol.x)
        fitted[arch] = op
        for i, cg in items:
            residuals.append((arch, i, model_db(op, i) - cg))
    return CalibrationResult(fitted, residuals, ok)
