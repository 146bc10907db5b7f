import re

import pytest

from soamzi.config import ConfigError, ExperimentConfig, default_config_text, load_config, parse_config
from soamzi.smallsignal import Architecture


def test_default_text_round_trips():
    text = default_config_text()
    cfg = parse_config(text)
    assert cfg.bench == ExperimentConfig().bench
    assert cfg.evm == ExperimentConfig().evm
    assert cfg.anchors == ExperimentConfig().anchors


def test_empty_config_is_default():
    assert parse_config("").bench == ExperimentConfig().bench
    assert load_config(None).mode == "analytic"


def test_physical_keys_carry_units():
    unitless = {"confinement", "henry_factor", "shape", "obpf_rolloff", "tap_ratio", "rolloff",
                "modulation_index", "modulation_indices", "harmonics", "p_ctrl_points", "formats",
                "samples_per_symbol", "n_symbols", "include_reference", "output_dir", "seed", "mode",
                "workers", "architectures"}
    for line in default_config_text().splitlines():
        m = re.match(r"(\w+) = ", line)
        if m and m.group(1) not in unitless:
            assert re.search(r"_(hz|w|m|m2|m3|s|a|db|dbm|rad|per_m|a_per_w|ohm|dbm_hz)$", m.group(1)), m.group(1)


def test_all_problems_reported():
    text = """
[run]
mode = fast
colour = blue
[soa1]
length_m = -1
[pulse]
fwhm_s = abc
[bogus]
x = 1
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    msg = "\n".join(exc.value.problems)
    for needle in ("colour", "mode", "soa1", "fwhm_s", "bogus"):
        assert needle in msg
    assert len(exc.value.problems) >= 5


def test_overrides_applied(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("""
[run]
architectures = modulation
seed = 9
[signals]
modulation_control_power_w = 5e-05
static_phase_rad = 0.5
[chain]
lo_freq_hz = 8.8e9
[anchors]
modulation_h4_db = 8.0
""")
    cfg = load_config(path)
    assert cfg.architectures == [Architecture.MODULATION]
    assert cfg.seed == 9 and cfg.evm.seed == 9
    assert cfg.bench.control_power[Architecture.MODULATION] == 5e-05
    assert cfg.bench.phi0 == 0.5
    assert cfg.bench.chain.lo_freq == 8.8e9
    assert ("modulation", 4, 8.0) in cfg.anchors


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.ini")
