import csv
import json
from collections import defaultdict

import pytest

from soamzi import plotting
from soamzi.cli import main

VALIDATION_POINT = """
[signals]
switching_control_power_w = 5e-06
modulation_control_power_w = 5e-06
port_c_power_w = 3e-06
static_phase_rad = 0.5
[sweep]
modulation_indices = 0.02, 0.05
"""

SMALL_EVM = """
[evm]
bauds_hz = 64e6, 512e6
constellation_bauds_hz = 512e6
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _curves(rows, mode):
    curves = defaultdict(list)
    for r in rows:
        if r["mode"] == mode:
            curves[(r["arch"], r["f_target_Hz"])].append((float(r["m_dat"]), float(r["CG_dB"])))
    return curves


def test_cg_sweep_default_four_flat_curves(tmp_path):
    assert main(["cg-sweep", "--out", str(tmp_path)]) == 0
    curves = _curves(_rows(tmp_path / "cg_sweep.csv"), "analytic")
    assert len(curves) == 4
    assert {f for _, f in curves} == {"9.000000e+09", "3.900000e+10"}
    for pts in curves.values():
        assert len({cg for _, cg in pts}) == 1
    assert (tmp_path / "cg_sweep.svg").read_text().startswith("<?xml")
    assert _rows(tmp_path / "chain_stages.csv")[-1]["stage"] == "amp2"


def test_cg_sweep_oracle_tracks_analytic_at_weak_drive(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(VALIDATION_POINT)
    assert main(["cg-sweep", "--config", str(cfg), "--out", str(tmp_path), "--mode", "oracle"]) == 0
    rows = _rows(tmp_path / "cg_sweep.csv")
    oracle, full = _curves(rows, "oracle"), _curves(rows, "full")
    assert len(oracle) == 4
    for key, pts in oracle.items():
        for (m, cg), (_, ref) in zip(sorted(pts), sorted(full[key])):
            assert m <= 0.05
            assert abs(cg - ref) < 0.5


@pytest.mark.xfail(strict=True, reason="near-balanced high-gain default point; see notes")
def test_cg_sweep_oracle_tracks_analytic_at_default_drive(tmp_path):
    assert main(["cg-sweep", "--out", str(tmp_path), "--mode", "oracle"]) == 0
    rows = _rows(tmp_path / "cg_sweep.csv")
    oracle, full = _curves(rows, "oracle"), _curves(rows, "full")
    for key, pts in oracle.items():
        for (m, cg), (_, ref) in zip(sorted(pts), sorted(full[key])):
            if m <= 0.05:
                assert abs(cg - ref) < 0.5


def test_linearity_outputs(tmp_path):
    assert main(["linearity", "--out", str(tmp_path)]) == 0
    points = {r["arch"]: float(r["p_ctrl_W"]) for r in _rows(tmp_path / "linearity_points.csv")}
    assert points["modulation"] < points["switching"]
    svg = (tmp_path / "linearity.svg").read_text()
    for label in ("port I", "port J", "SD port I", "SD port J"):
        assert label in svg
    assert _rows(tmp_path / "linearity_switching.csv")[0].keys() == {"p_ctrl_W", "power_I_W", "power_J_W"}


@pytest.fixture(scope="module")
def evm_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("evm")
    cfg = out / "c.ini"
    cfg.write_text(SMALL_EVM)
    assert main(["evm-sweep", "--config", str(cfg), "--out", str(out / "a")]) == 0
    return cfg, out


def test_evm_sweep_outputs(evm_run):
    _, out = evm_run
    rows = _rows(out / "a" / "evm_sweep.csv")
    for fmt in ("qpsk", "qam16"):
        assert "FEC limit" in (out / "a" / f"evm_{fmt}.svg").read_text()
        for baud in ("64000000", "512000000"):
            sel = {(r["arch"], r["f_target_Hz"]): float(r["evm_pct"]) for r in rows
                   if r["format"] == fmt and r["baud_Hz"] == baud}
            ref = sel.pop(("reference", "750000000"))
            assert ref < min(sel.values())
            assert abs(sel[("modulation", "9250000000")] - sel[("modulation", "39250000000")]) < 3.0
    assert list((out / "a").glob("constellation_*_512MBd_*.svg"))


def test_evm_sweep_byte_identical(evm_run):
    cfg, out = evm_run
    assert main(["evm-sweep", "--config", str(cfg), "--out", str(out / "b"), "--workers", "2"]) == 0
    for path in (out / "a").iterdir():
        assert path.read_bytes() == (out / "b" / path.name).read_bytes(), path.name


def test_evm_sweep_rejects_oracle_mode(tmp_path):
    assert main(["evm-sweep", "--out", str(tmp_path), "--mode", "oracle"]) == 2


def test_csv_round_trip_reproduces_plots(tmp_path, evm_run):
    _, out = evm_run
    assert main(["cg-sweep", "--out", str(tmp_path)]) == 0
    plotting.render_cg_sweep(tmp_path / "cg_sweep.csv", tmp_path / "again.svg")
    assert (tmp_path / "again.svg").read_bytes() == (tmp_path / "cg_sweep.svg").read_bytes()
    plotting.render_evm(out / "a" / "evm_sweep.csv", tmp_path / "evm.svg", "qpsk")
    assert (tmp_path / "evm.svg").read_bytes() == (out / "a" / "evm_qpsk.svg").read_bytes()


def test_validate_passes_and_reports_identity(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validate.json").read_text())
    names = {c["name"]: c for c in report}
    assert names["k_a_identity_rel"]["passed"]
    assert all(c["passed"] for c in report)
    assert "PASS k_a_identity_rel" in capsys.readouterr().out


def test_validate_flags_lifetime_fault(tmp_path):
    assert main(["validate", "--out", str(tmp_path), "--tau-d-scale", "2"]) == 1
    failed = [r["check"] for r in _rows(tmp_path / "validate.csv") if r["passed"] == "0"]
    assert any(name.startswith("oracle_") for name in failed)


def test_pulse_spectrum(tmp_path):
    assert main(["pulse-spectrum", "--out", str(tmp_path), "--max-index", "4"]) == 0
    rows = _rows(tmp_path / "pulse_spectrum_modulation_filtered.csv")
    assert [r["index"] for r in rows] == ["0", "1", "2", "3", "4"]
    assert (tmp_path / "pulse_spectrum_switching_ideal.svg").exists()


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nmode = turbo\nfoo = 1\n")
    assert main(["cg-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "mode" in err and "foo" in err


def test_default_config_command(capsys):
    assert main(["default-config"]) == 0
    assert "[anchors]" in capsys.readouterr().out
