"""Static SOA physics: gain and phase versus carrier density and derived constants.

All quantities are SI. The internal-loss coefficient ``a_int`` is signed and
enters the gain exponent as ``+a_int * L``; a physical loss is therefore a
negative number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as C_LIGHT
from scipy.constants import e as Q_E
from scipy.constants import h as H_PLANCK

__all__ = [
    "SoaParams",
    "SoaState",
    "DerivedConstants",
    "SoaDomainError",
    "gain",
    "log_gain",
    "gain_derivative",
    "phase",
    "phase_derivative",
    "differential_phase",
    "saturation_power",
    "k_constant",
    "c_op",
    "k_a_closed_form",
    "derived_constants",
    "H_PLANCK",
    "C_LIGHT",
    "Q_E",
]


class SoaDomainError(ValueError):
    """Input outside the physical domain of the SOA model."""


@dataclass(frozen=True)
class SoaParams:
    confinement: float = 0.3
    peak_gain_coeff: float = 2.5e-20  # m^2
    length: float = 1e-3  # m
    width: float = 0.34e-6  # m
    height: float = 0.2e-6  # m
    transparency_density: float = 1e24  # m^-3
    internal_loss: float = -1000.0  # m^-1, signed (loss < 0)
    henry_factor: float = 5.0
    carrier_lifetime: float = 60e-12  # s
    bias_current: float = 0.36  # A

    def __post_init__(self):
        if not 0.0 < self.confinement <= 1.0:
            raise SoaDomainError(f"confinement must be in (0, 1], got {self.confinement}")
        for name in ("peak_gain_coeff", "length", "width", "height",
                     "transparency_density", "carrier_lifetime", "henry_factor"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise SoaDomainError(f"{name} must be positive and finite, got {value}")
        if not math.isfinite(self.internal_loss):
            raise SoaDomainError("internal_loss must be finite")
        if self.bias_current < 0.0:
            raise SoaDomainError("bias_current must be non-negative")

    @property
    def volume(self) -> float:
        return self.width * self.height * self.length

    @property
    def gain_slope(self) -> float:
        """Gamma * a_k * L, the derivative of ln(G) with respect to N (m^3)."""
        return self.confinement * self.peak_gain_coeff * self.length

    @property
    def pump_rate(self) -> float:
        """Carrier injection rate I / (q V) in m^-3 s^-1."""
        return self.bias_current / (Q_E * self.volume)


@dataclass(frozen=True)
class SoaState:
    carrier_density: float

    def __post_init__(self):
        if not self.carrier_density > 0.0:
            raise SoaDomainError("carrier density must be positive")


@dataclass(frozen=True)
class DerivedConstants:
    k: float
    p_sat: float
    dg_dn: float
    dphi_dn: float


def log_gain(params: SoaParams, n: float) -> float:
    return params.gain_slope * (n - params.transparency_density) + params.internal_loss * params.length


def gain(params: SoaParams, n: float) -> float:
    """Single-pass linear gain exp(Gamma a (N - N0) L + a_int L)."""
    if not n > 0.0:
        raise SoaDomainError(f"carrier density must be positive, got {n}")
    try:
        g = math.exp(log_gain(params, n))
    except OverflowError as exc:
        raise SoaDomainError(f"gain overflows for N = {n:g} m^-3") from exc
    if not math.isfinite(g) or g == 0.0:
        raise SoaDomainError(f"non-finite gain for N = {n:g} m^-3")
    return g


def gain_derivative(params: SoaParams, g: float) -> float:
    if not g > 0.0:
        raise SoaDomainError(f"gain must be positive, got {g}")
    return params.gain_slope * g


def phase(params: SoaParams, g: float) -> float:
    if not g > 0.0:
        raise SoaDomainError(f"gain must be positive, got {g}")
    return -0.5 * params.henry_factor * math.log(g)


def phase_derivative(params: SoaParams) -> float:
    """d(Phi)/dN, independent of N."""
    return -0.5 * params.henry_factor * params.gain_slope


def differential_phase(g1: float, g2: float, henry_factor: float) -> float:
    """Phi_1 - Phi_2 for two SOAs sharing the same Henry factor and internal loss."""
    if not (g1 > 0.0 and g2 > 0.0):
        raise SoaDomainError("gains must be positive")
    return -0.5 * henry_factor * math.log(g1 / g2)


def saturation_power(params: SoaParams, wavelength: float) -> float:
    if not wavelength > 0.0:
        raise SoaDomainError("wavelength must be positive")
    return (H_PLANCK * C_LIGHT * params.width * params.height
            / (wavelength * params.confinement * params.peak_gain_coeff * params.carrier_lifetime))


def k_constant(params: SoaParams, wavelength: float) -> float:
    """Photon-number conversion lambda / (h c V), in J^-1 m^-3."""
    if not wavelength > 0.0:
        raise SoaDomainError("wavelength must be positive")
    return wavelength / (H_PLANCK * C_LIGHT * params.volume)


def c_op(g1: float, g2: float, dphase: float, dg_dn: float, dphi_dn: float) -> float:
    """Operating-point constant: d/dN1 of G1 + G2 - 2 sqrt(G1 G2) cos(dPhi).

    ``dg_dn`` is dG1/dN evaluated at ``g1``.
    """
    if not (g1 > 0.0 and g2 > 0.0):
        raise SoaDomainError("gains must be positive")
    root = math.sqrt(g1 * g2)
    return (dg_dn
            - dg_dn * root * math.cos(dphase) / g1
            + dphi_dn * 2.0 * root * math.sin(dphase))


def k_a_closed_form(g1: float, g2: float, henry_factor: float, p_sat: float, lifetime: float) -> float:
    """K_a written through P_sat and tau; equals K * C_OP / 32."""
    dphase = -0.5 * henry_factor * math.log(g1 / g2)
    bracket = 1.0 - math.sqrt(g2 / g1) * (math.cos(dphase) + henry_factor * math.sin(dphase))
    return g1 / (32.0 * p_sat * lifetime) * bracket


def derived_constants(params: SoaParams, g: float, wavelength: float) -> DerivedConstants:
    return DerivedConstants(
        k=k_constant(params, wavelength),
        p_sat=saturation_power(params, wavelength),
        dg_dn=gain_derivative(params, g),
        dphi_dn=phase_derivative(params),
    )
