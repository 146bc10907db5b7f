import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soamzi.soa import (C_LIGHT, H_PLANCK, SoaDomainError, SoaParams, c_op, derived_constants,
                        differential_phase, gain, gain_derivative, k_a_closed_form, k_constant,
                        phase, phase_derivative, saturation_power)

LOSSLESS = SoaParams(internal_loss=0.0)


def test_gain_at_transparency_is_unity():
    assert gain(LOSSLESS, LOSSLESS.transparency_density) == pytest.approx(1.0, rel=1e-15)


def test_gain_hand_evaluation():
    p = SoaParams(confinement=0.3, peak_gain_coeff=2.5e-20, length=1e-3, internal_loss=0.0)
    g = gain(p, p.transparency_density + 1e24)
    assert g == pytest.approx(math.exp(7.5), rel=1e-12)
    assert g == pytest.approx(1808.0, rel=1e-4)


@given(st.floats(1e20, 1e24))
def test_gain_monotone_in_density(delta):
    p = SoaParams()
    assert gain(p, p.transparency_density + delta) > gain(p, p.transparency_density)


def test_gain_rejects_nonpositive_density():
    with pytest.raises(SoaDomainError):
        gain(SoaParams(), 0.0)


def test_gain_derivative_at_unity_gain():
    assert gain_derivative(SoaParams(), 1.0) == pytest.approx(7.5e-24, rel=1e-12)


@given(st.floats(1.0, 1e4))
def test_gain_derivative_linear_in_gain(g):
    p = SoaParams()
    assert gain_derivative(p, 2 * g) == pytest.approx(2 * gain_derivative(p, g), rel=1e-14)


@settings(max_examples=200)
@given(st.floats(1.05, 3.0))
def test_gain_derivative_matches_finite_difference(scale):
    p = SoaParams()
    n = scale * p.transparency_density
    h = 1e-8 * n
    fd = (gain(p, n + h) - gain(p, n - h)) / (2 * h)
    assert abs(fd / gain_derivative(p, gain(p, n)) - 1) < 1e-6


def test_phase_values():
    assert phase(SoaParams(), 1.0) == 0.0
    assert phase(SoaParams(henry_factor=5.0), math.exp(2.0)) == pytest.approx(-5.0, rel=1e-14)


@settings(max_examples=200)
@given(st.floats(1.05, 3.0))
def test_phase_derivative_constant_and_matches_finite_difference(scale):
    p = SoaParams()
    n = scale * p.transparency_density
    h = 1e-8 * n
    fd = (phase(p, gain(p, n + h)) - phase(p, gain(p, n - h))) / (2 * h)
    expected = -0.5 * p.henry_factor * p.confinement * p.peak_gain_coeff * p.length
    assert phase_derivative(p) == pytest.approx(expected, rel=1e-15)
    assert abs(fd / expected - 1) < 1e-6


@given(st.floats(1.0, 1e4), st.floats(1.0, 1e4))
def test_phase_strictly_decreasing_in_gain(g, dg):
    p = SoaParams()
    assert phase(p, g + dg) < phase(p, g)


def test_differential_phase_examples():
    assert differential_phase(50.0, 50.0, 5.0) == 0.0
    assert differential_phase(math.e * 10, 10.0, 4.0) == pytest.approx(-2.0, rel=1e-14)


@given(st.floats(1.0, 1e4), st.floats(1.0, 1e4), st.floats(0.1, 10.0))
def test_differential_phase_antisymmetric(g1, g2, alpha):
    assert differential_phase(g1, g2, alpha) == pytest.approx(-differential_phase(g2, g1, alpha),
                                                              abs=1e-12)


def test_saturation_power_plug_in():
    p = SoaParams(width=2e-6, height=0.2e-6, confinement=0.3, peak_gain_coeff=2.5e-20,
                  carrier_lifetime=200e-12)
    assert saturation_power(p, 1550e-9) == pytest.approx(3.42e-2, rel=2e-3)


def test_saturation_power_inverse_in_lifetime():
    p = SoaParams()
    q = SoaParams(carrier_lifetime=2 * p.carrier_lifetime)
    assert saturation_power(q, 1557e-9) == pytest.approx(0.5 * saturation_power(p, 1557e-9), rel=1e-14)


def test_k_constant_identity_and_scaling():
    p = SoaParams(width=2e-6, height=0.2e-6, length=1e-3)
    k = k_constant(p, 1557.4e-9)
    assert k * (H_PLANCK * C_LIGHT / 1557.4e-9) * p.volume == pytest.approx(1.0, rel=1e-14)
    assert k_constant(p, 2 * 1557.4e-9) == pytest.approx(2 * k, rel=1e-14)
    # lambda / (h c V) with V = 4e-16 m^3 evaluates to 1.96e34, not 1.96e31
    assert k == pytest.approx(1.96e34, rel=5e-3)


def test_c_op_balanced_arms_vanish():
    p = SoaParams()
    assert c_op(100.0, 100.0, 0.0, gain_derivative(p, 100.0), phase_derivative(p)) == pytest.approx(0.0, abs=1e-30)
    assert k_a_closed_form(100.0, 100.0, 5.0, 0.03, 200e-12) == pytest.approx(0.0, abs=1e-6)


def test_c_op_symbolic_cross_check():
    p = SoaParams(henry_factor=5.0)
    g2 = 40.0
    g1 = math.e * g2
    dphase = differential_phase(g1, g2, 5.0)
    assert dphase == pytest.approx(-2.5)
    dg = gain_derivative(p, g1)
    dphi = phase_derivative(p)
    # derivative of G1 + G2 - 2 sqrt(G1 G2) cos(Phi1 - Phi2) with respect to N1, by finite difference
    def f(n_shift):
        ga = g1 * math.exp(p.gain_slope * n_shift)
        dph = dphase + dphi * n_shift
        return ga + g2 - 2 * math.sqrt(ga * g2) * math.cos(dph)
    h = 1e15
    fd = (f(h) - f(-h)) / (2 * h)
    assert c_op(g1, g2, dphase, dg, dphi) == pytest.approx(fd, rel=1e-7)


@given(st.floats(-math.pi / 4, -1e-3, exclude_max=True))
def test_c_op_sine_term_positive_for_negative_phase(dphase):
    p = SoaParams()
    term = phase_derivative(p) * 2.0 * 100.0 * math.sin(dphase)
    assert term > 0
    assert c_op(100.0, 100.0, dphase, 0.0, phase_derivative(p)) > 0


def test_k_a_closed_form_double_evaluation():
    g1, g2, alpha, psat, tau = 100.0, 50.0, 5.0, 0.03, 200e-12
    dphase = -0.5 * alpha * math.log(2.0)
    bracket = 1 - math.sqrt(0.5) * (math.cos(dphase) + alpha * math.sin(dphase))
    assert k_a_closed_form(g1, g2, alpha, psat, tau) == pytest.approx(g1 / (32 * psat * tau) * bracket, rel=1e-14)


def test_k_a_identity_random_points():
    p = SoaParams()
    lam = 1557.4e-9
    rng = np.random.default_rng(7)
    for g1, g2 in np.exp(rng.uniform(0.5, 6.5, (1000, 2))):
        dphase = differential_phase(g1, g2, p.henry_factor)
        via_k = k_constant(p, lam) * c_op(g1, g2, dphase, gain_derivative(p, g1), phase_derivative(p)) / 32
        closed = k_a_closed_form(g1, g2, p.henry_factor, saturation_power(p, lam), p.carrier_lifetime)
        assert abs(via_k - closed) <= 1e-10 * abs(closed)


def test_derived_constants_deterministic():
    p = SoaParams()
    assert derived_constants(p, 300.0, 1557.4e-9) == derived_constants(p, 300.0, 1557.4e-9)


@pytest.mark.parametrize("kw", [dict(confinement=0.0), dict(confinement=1.5), dict(length=-1.0),
                                dict(carrier_lifetime=0.0), dict(henry_factor=0.0)])
def test_invalid_params_rejected(kw):
    with pytest.raises(SoaDomainError):
        SoaParams(**kw)
