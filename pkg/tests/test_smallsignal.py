import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soamzi.signals import HarmonicSpectrum, PulseTrainSpec, analytic_pulse_harmonics
from soamzi.smallsignal import (Architecture, CalibrationError, OperatingPoint, calibrate,
                                conversion_gain, conversion_gain_db, delta_g_phi, delta_g_phi_single,
                                first_order_density, mzi_output_power, mzi_output_power_i,
                                second_order_density, steady_output, upconverted_power)
from soamzi.soa import SoaParams, phase

TAU = 26.53e-12
SW = OperatingPoint(Architecture.SWITCHING, 300.0, 150.0, tau_d=TAU)
MOD = OperatingPoint(Architecture.MODULATION, 300.0, 150.0, tau_d=TAU)
FLAT = HarmonicSpectrum(1e-3, 10e9, {i: 2e-3 + 0j for i in range(1, 7)})
GAUSS = analytic_pulse_harmonics(PulseTrainSpec(10e9, 2e-12, 1e-3), 6)


def test_mzi_null_and_constructive():
    assert mzi_output_power(1e-3, 200.0, 200.0, 0.4, 0.4) == pytest.approx(0.0, abs=1e-18)
    assert mzi_output_power(1e-3, 200.0, 200.0, 0.4, 0.4, math.pi) == pytest.approx(1e-3 * 200 / 2)


def test_mzi_direct_evaluation():
    expected = (150 - 2 * math.sqrt(5000) * math.cos(0.3)) / 8 * 1e-3
    assert mzi_output_power(1e-3, 100.0, 50.0, 0.3, 0.0) == pytest.approx(expected, rel=1e-14)


@given(st.floats(1.0, 1e4), st.floats(1.0, 1e4), st.floats(-10, 10), st.floats(-10, 10), st.floats(1e-6, 1.0))
def test_port_complementarity(g1, g2, phi1, phi2, p_in):
    total = mzi_output_power(p_in, g1, g2, phi1, phi2) + mzi_output_power_i(p_in, g1, g2, phi1, phi2)
    assert total == pytest.approx(0.25 * p_in * (g1 + g2), rel=1e-12)


def test_steady_output():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        balanced = OperatingPoint("switching", 100.0, 100.0)
    assert steady_output(balanced, 1e-3) == pytest.approx(0.0, abs=1e-18)
    assert steady_output(SW, 2e-3) == pytest.approx(2 * steady_output(SW, 1e-3), rel=1e-14)
    p = SW.soa
    direct = mzi_output_power(1e-3, SW.g1, SW.g2, phase(p, SW.g1), phase(p, SW.g2))
    assert steady_output(SW, 1e-3) == pytest.approx(float(direct), rel=1e-14)


def test_balanced_arms_warn():
    with pytest.warns(RuntimeWarning):
        OperatingPoint("switching", 100.0, 100.0)


def test_delta_g_phi_reductions():
    assert delta_g_phi(SW, 0, 0, 0, 0) == 0
    dg, dphi = 3.0, 0.01
    assert delta_g_phi(SW, dg, 0, dphi, 0) == pytest.approx(delta_g_phi_single(SW, dg, dphi) / 8, rel=1e-14)


def test_delta_g_phi_taylor_error_is_quadratic():
    p = SW.soa
    phi1, phi2 = phase(p, SW.g1), phase(p, SW.g2)
    base = mzi_output_power(1.0, SW.g1, SW.g2, phi1, phi2)
    errs = []
    steps = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
    for s in steps:
        dg1, dg2, dp1, dp2 = s * SW.g1, -0.5 * s * SW.g2, 3 * s, -s
        exact = mzi_output_power(1.0, SW.g1 + dg1, SW.g2 + dg2, phi1 + dp1, phi2 + dp2) - base
        errs.append(abs(exact - delta_g_phi(SW, dg1, dg2, dp1, dp2)))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_first_order_dc_and_one_pole():
    dc = first_order_density(SW, 1e-3, 0.0)
    assert dc == pytest.approx(-1e-3 * SW.k * SW.g1 * SW.tau_d * SW.eta, rel=1e-14)
    at_pole = first_order_density(SW, 1e-3, 1.0 / SW.tau_d)
    assert abs(at_pole) == pytest.approx(abs(dc) / math.sqrt(2), rel=1e-14)
    at_10 = first_order_density(SW, 1e-3, 2 * math.pi * 10e9)
    assert abs(dc) / abs(at_10) == pytest.approx(1.943, abs=1e-3)
    assert 20 * math.log10(abs(at_10) / abs(dc)) == pytest.approx(-5.77, abs=0.01)


def test_second_order_zero_and_conjugate_symmetry():
    assert second_order_density(SW, 0, 0, 1e-3, 1e-6, 1e11, 1e10) == 0
    args = (1e20 + 2e19j, -3e18 + 1e18j, 1e-3 + 2e-4j, 1e-6 - 3e-7j)
    w_ck, w_dat = 2 * math.pi * 10e9, 2 * math.pi * 1e9
    a = second_order_density(SW, *args, w_ck, w_dat)
    b = second_order_density(SW, *[np.conj(x) for x in args], -w_ck, -w_dat)
    assert b == pytest.approx(np.conj(a), rel=1e-14)


def test_upconverted_zero_data():
    assert upconverted_power(SW, FLAT, 0.0, 1).p_out == 0
    assert upconverted_power(MOD, FLAT, 0.0, 4).p_out == 0


def test_switching_harmonic_ratio_one_pole():
    r = abs(upconverted_power(SW, FLAT, 1e-6, 4).p_out) / abs(upconverted_power(SW, FLAT, 1e-6, 1).p_out)
    assert r == pytest.approx(1.943 / 6.740, rel=2e-3)
    assert r == pytest.approx(0.288, abs=1e-3)


def test_modulation_harmonic_ratio_follows_clock():
    r = abs(upconverted_power(MOD, GAUSS, 1e-6, 4).p_out) / abs(upconverted_power(MOD, GAUSS, 1e-6, 1).p_out)
    assert r == pytest.approx(abs(GAUSS[4]) / abs(GAUSS[1]), rel=1e-12)
    assert r == pytest.approx(0.978, abs=1e-3)


@pytest.mark.parametrize("op", [SW, MOD])
def test_cg_independent_of_data_amplitude(op):
    a = upconverted_power(op, GAUSS, 0.05 * 31.6e-6, 1).cg
    b = upconverted_power(op, GAUSS, 0.5 * 31.6e-6, 1).cg
    assert a == pytest.approx(b, rel=1e-14)
    assert conversion_gain(op, GAUSS, 1) == pytest.approx(a, rel=1e-12)


def test_switching_cg_drop_one_pole():
    drop = conversion_gain_db(SW, GAUSS, 1) - conversion_gain_db(SW, GAUSS, 4)
    pole = 20 * math.log10(6.740 / 1.943)
    assert pole == pytest.approx(10.8, abs=0.05)
    assert drop == pytest.approx(pole + 20 * math.log10(abs(GAUSS[1]) / abs(GAUSS[4])), abs=0.01)


def test_modulation_cg_drop_small():
    drop = conversion_gain_db(MOD, GAUSS, 1) - conversion_gain_db(MOD, GAUSS, 4)
    assert 0 < drop <= 1.0
    assert drop == pytest.approx(-20 * math.log10(0.977), abs=0.02)


@settings(max_examples=50)
@given(st.floats(5e-12, 100e-12), st.floats(1.5, 1e3), st.floats(0.1, 0.9))
def test_one_pole_law_and_architecture_contrast(tau, g1, ratio):
    sw = OperatingPoint("switching", g1, g1 * ratio, tau_d=tau)
    md = OperatingPoint("modulation", g1, g1 * ratio, tau_d=tau)
    sw_vals, md_vals = [], []
    for i in range(1, 7):
        w = 2 * math.pi * GAUSS.frequency(i)
        sw_vals.append(conversion_gain(sw, GAUSS, i) * abs(1 + 1j * w * tau) ** 2 / abs(GAUSS[i]) ** 2)
        md_vals.append(conversion_gain(md, GAUSS, i) / abs(GAUSS[i]) ** 2)
    assert np.ptp(sw_vals) / np.mean(sw_vals) < 1e-10
    assert np.ptp(md_vals) / np.mean(md_vals) < 1e-10


@pytest.mark.parametrize("op", [SW, MOD])
def test_full_mode_drift_small(op):
    p_avg = 31.6e-6
    cgs = [upconverted_power(op, GAUSS, m * p_avg, i, mode="full", p_dat_avg=p_avg).cg_db
           for m in (0.02, 0.05, 0.1) for i in (1,)]
    assert max(cgs) - min(cgs) < 0.1


def test_complex_convention_sign():
    # p_out at i f_ck - f_dat responds to conj(p_dat): a phase advance of the data retards the output
    a = upconverted_power(SW, FLAT, 1e-6, 1).p_out
    b = upconverted_power(SW, FLAT, 1e-6 * np.exp(0.3j), 1).p_out
    assert np.angle(b / a) == pytest.approx(-0.3, abs=1e-12)


def test_calibration_round_trip():
    truth = {Architecture.SWITCHING: SW.with_(g1=250.0, g2=125.0, tau_d=30e-12),
             Architecture.MODULATION: MOD.with_(g1=250.0, g2=125.0, tau_d=30e-12)}
    anchors = [(a, i, conversion_gain_db(op, GAUSS, i)) for a, op in truth.items() for i in (1, 2, 4)]
    priors = {a: op.with_(g1=180.0, g2=90.0, tau_d=20e-12) for a, op in truth.items()}
    spectra = {a: GAUSS for a in truth}
    res = calibrate(anchors, priors, spectra, regularization=0.0)
    sw = res.operating_points[Architecture.SWITCHING]
    assert sw.g1 == pytest.approx(250.0, rel=0.01)
    assert sw.tau_d == pytest.approx(30e-12, rel=0.01)
    assert res.max_abs_residual < 1e-6


def test_calibration_switching_anchors_residual():
    priors = {Architecture.SWITCHING: SW}
    res = calibrate([("switching", 1, 16.0), ("switching", 4, 4.0)], priors, {Architecture.SWITCHING: GAUSS})
    assert res.max_abs_residual < 1.0


def test_single_anchor_underdetermined():
    with pytest.raises(CalibrationError):
        calibrate([("switching", 1, 16.0)], {Architecture.SWITCHING: SW}, {Architecture.SWITCHING: GAUSS})


def test_operating_point_validation():
    with pytest.raises(ValueError):
        OperatingPoint("switching", 100.0, 50.0, tau_d=0.0)
    with pytest.raises(ValueError):
        OperatingPoint("bogus", 100.0, 50.0)
    assert OperatingPoint("switching", 100.0, 50.0, soa=SoaParams()).k_a == pytest.approx(
        OperatingPoint("switching", 100.0, 50.0).k * OperatingPoint("switching", 100.0, 50.0).c_op / 32)
