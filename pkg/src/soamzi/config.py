"""Experiment configuration: an INI file with unit-suffixed keys.

Every section and key is optional; omitted values fall back to the library
defaults. Unknown sections or keys, malformed numbers and out-of-range values
are all collected and reported together.

Example::

    [run]
    output_dir = out
    seed = 7
    mode = analytic

    [soa1]
    bias_current_a = 0.36

    [evm]
    bauds_hz = 64e6, 128e6, 256e6, 512e6
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from . import rf_chain
from .dsp_evm import EvmSweepConfig
from .scenarios import MEASURED_ANCHORS, Bench
from .signals import PulseTrainSpec
from .smallsignal import Architecture
from .soa import SoaParams

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMA", "load_config", "parse_config", "default_config_text"]

MODES = ("analytic", "oracle", "both")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _str(text: str) -> str:
    return text.strip()


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _list(item):
    def parse(text: str) -> tuple:
        return tuple(item(part) for part in text.replace(";", ",").split(",") if part.strip())
    return parse


# section -> key -> (parser, target attribute)
SCHEMA = {
    "run": {
        "output_dir": (_str, "output_dir"),
        "seed": (_int, "seed"),
        "mode": (_str, "mode"),
        "workers": (_int, "workers"),
        "architectures": (_list(_str), "archs"),
    },
    "soa": {
        "confinement": (_float, "confinement"),
        "peak_gain_coeff_m2": (_float, "peak_gain_coeff"),
        "length_m": (_float, "length"),
        "width_m": (_float, "width"),
        "height_m": (_float, "height"),
        "transparency_density_m3": (_float, "transparency_density"),
        "internal_loss_per_m": (_float, "internal_loss"),
        "henry_factor": (_float, "henry_factor"),
        "carrier_lifetime_s": (_float, "carrier_lifetime"),
        "bias_current_a": (_float, "bias_current"),
    },
    "pulse": {
        "rep_rate_hz": (_float, "rep_rate"),
        "fwhm_s": (_float, "fwhm"),
        "shape": (_str, "shape"),
        "wavelength_m": (_float, "wavelength"),
    },
    "signals": {
        "port_c_power_w": (_float, "port_c_power"),
        "switching_control_power_w": (_float, "switching"),
        "modulation_control_power_w": (_float, "modulation"),
        "data_frequency_hz": (_float, "f_dat"),
        "data_wavelength_m": (_float, "data_wavelength"),
        "static_phase_rad": (_float, "phi0"),
    },
    "chain": {
        "obpf_center_m": (_float, "obpf_center"),
        "obpf_bw_m": (_float, "obpf_bw"),
        "obpf_rolloff": (_float, "obpf_rolloff"),
        "tap_ratio": (_float, "tap_ratio"),
        "optical_loss_db": (_float, "optical_loss_db"),
        "responsivity_a_per_w": (_float, "responsivity"),
        "amp1_gain_db": (_float, "amp1_gain_db"),
        "mixer_conv_loss_db": (_float, "mixer_conv_loss_db"),
        "lo_freq_hz": (_optional_float, "lo_freq"),
        "lo_power_dbm": (_float, "lo_power_dbm"),
        "if_freq_hz": (_float, "if_freq"),
        "elec_filter_bw_hz": (_float, "elec_filter_bw"),
        "amp2_gain_db": (_float, "amp2_gain_db"),
        "load_impedance_ohm": (_float, "load_impedance"),
        "detector_max_w": (_float, "detector_max"),
    },
    "sweep": {
        "modulation_indices": (_list(_float), "mod_indices"),
        "harmonics": (_list(_int), "harmonics"),
        "p_ctrl_max_w": (_float, "p_ctrl_max"),
        "p_ctrl_points": (_int, "p_ctrl_points"),
    },
    "evm": {
        "formats": (_list(_str), "formats"),
        "bauds_hz": (_list(_float), "bauds"),
        "harmonics": (_list(_int), "indices"),
        "rf_carrier_hz": (_float, "rf_carrier"),
        "rolloff": (_float, "rolloff"),
        "samples_per_symbol": (_int, "sps"),
        "n_symbols": (_int, "n_symbols"),
        "modulation_index": (_float, "modulation_index"),
        "input_noise_dbm_hz": (_float, "input_noise_dbm_hz"),
        "output_noise_dbm_hz": (_float, "output_noise_dbm_hz"),
        "include_reference": (_bool, "include_reference"),
        "constellation_bauds_hz": (_list(_float), "constellation_bauds"),
    },
    "anchors": {
        "switching_h1_db": (_float, ("switching", 1)),
        "switching_h4_db": (_float, ("switching", 4)),
        "modulation_h1_db": (_float, ("modulation", 1)),
        "modulation_h4_db": (_float, ("modulation", 4)),
    },
}
_SECTION_SCHEMA = {"soa1": "soa", "soa2": "soa"}


@dataclass
class ExperimentConfig:
    bench: Bench = field(default_factory=Bench)
    archs: tuple = ("switching", "modulation")
    mod_indices: tuple = (0.02, 0.05, 0.1)
    harmonics: tuple = (1, 4)
    p_ctrl_max: float = 0.3e-3
    p_ctrl_points: int = 25
    evm: EvmSweepConfig = field(default_factory=EvmSweepConfig)
    constellation_bauds: tuple = (128e6, 512e6)
    anchors: tuple = MEASURED_ANCHORS
    output_dir: str = "out"
    seed: int = 1
    mode: str = "analytic"
    workers: int = 1

    @property
    def architectures(self) -> list[Architecture]:
        return [Architecture.parse(a) for a in self.archs]


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([str(exc)]) from None

    problems: list[str] = []
    values: dict[str, dict] = {}
    for section in parser.sections():
        schema_name = _SECTION_SCHEMA.get(section, section)
        schema = SCHEMA.get(schema_name)
        if schema is None:
            problems.append(f"[{section}] unknown section")
            continue
        for key, raw in parser.items(section):
            if key not in schema:
                problems.append(f"[{section}] unknown key {key!r}")
                continue
            conv, target = schema[key]
            try:
                values.setdefault(section, {})[target] = conv(raw)
            except ValueError as exc:
                problems.append(f"[{section}] {key} = {raw!r}: {exc}")

    cfg = ExperimentConfig()
    run = values.get("run", {})
    for name in ("output_dir", "seed", "mode", "workers", "archs"):
        if name in run:
            setattr(cfg, name, run[name])
    if cfg.mode not in MODES:
        problems.append(f"[run] mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.workers < 1:
        problems.append("[run] workers must be >= 1")
    for arch in cfg.archs:
        try:
            Architecture.parse(arch)
        except ValueError:
            problems.append(f"[run] unknown architecture {arch!r}")

    def build(label, factory, kwargs, base=None):
        try:
            return dataclasses.replace(base, **kwargs) if base is not None else factory(**kwargs)
        except (ValueError, TypeError) as exc:
            problems.append(f"[{label}] {exc}")
            return base if base is not None else factory()

    soa1 = build("soa1", SoaParams, values.get("soa1", {}))
    soa2 = build("soa2", SoaParams, values.get("soa2", {}))
    pulse = build("pulse", PulseTrainSpec, values.get("pulse", {}))
    chain = build("chain", rf_chain.ChainSpec, values.get("chain", {}))
    sig = values.get("signals", {})
    control = dict(cfg.bench.control_power)
    for arch in Architecture:
        if arch.value in sig:
            control[arch] = sig.pop(arch.value)
    for name, value in list(sig.items()) + [(a.value, p) for a, p in control.items()]:
        if name != "phi0" and not value > 0:
            problems.append(f"[signals] {name} must be positive")
    cfg.bench = Bench(soa1, soa2, pulse, control_power=control, chain=chain,
                      **{k: v for k, v in sig.items()})

    sweep = values.get("sweep", {})
    for name, value in sweep.items():
        setattr(cfg, name, value)
    if any(not 0.0 <= m <= 1.0 for m in cfg.mod_indices):
        problems.append("[sweep] modulation indices must lie in [0, 1]")
    if any(i < 1 for i in cfg.harmonics):
        problems.append("[sweep] harmonics must be >= 1")
    if cfg.p_ctrl_points < 20:
        problems.append("[sweep] p_ctrl_points must be >= 20")
    if not cfg.p_ctrl_max > 0.005e-3:
        problems.append("[sweep] p_ctrl_max_w must exceed 5e-6")

    evm = dict(values.get("evm", {}))
    if "constellation_bauds" in evm:
        cfg.constellation_bauds = evm.pop("constellation_bauds")
    evm.setdefault("seed", cfg.seed)
    cfg.evm = build("evm", EvmSweepConfig, evm)

    anchors = {(a, i): v for a, i, v in cfg.anchors}
    anchors.update(values.get("anchors", {}))
    cfg.anchors = tuple((a, i, v) for (a, i), v in anchors.items())

    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse_config(text, str(path))


def default_config_text() -> str:
    """The full schema with default values, suitable as a starting config."""
    cfg = ExperimentConfig()
    soa = cfg.bench.soa1
    chain = cfg.bench.chain
    pulse = cfg.bench.pulse
    evm = cfg.evm

    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(fmt(x) for x in v)
        if v is None:
            return "auto"
        return repr(v) if isinstance(v, float) else str(v)

    lines = ["[run]", f"output_dir = {cfg.output_dir}", f"seed = {cfg.seed}", f"mode = {cfg.mode}",
             f"workers = {cfg.workers}", f"architectures = {fmt(cfg.archs)}", ""]
    for section in ("soa1", "soa2"):
        lines.append(f"[{section}]")
        lines += [f"{k} = {fmt(getattr(soa, attr))}" for k, (_, attr) in SCHEMA["soa"].items()]
        lines.append("")
    lines.append("[pulse]")
    lines += [f"{k} = {fmt(getattr(pulse, attr))}" for k, (_, attr) in SCHEMA["pulse"].items()]
    lines += ["", "[signals]", f"port_c_power_w = {fmt(cfg.bench.port_c_power)}"]
    for arch in Architecture:
        lines.append(f"{arch.value}_control_power_w = {fmt(cfg.bench.control_power[arch])}")
    lines += [f"data_frequency_hz = {fmt(cfg.bench.f_dat)}",
              f"data_wavelength_m = {fmt(cfg.bench.data_wavelength)}",
              f"static_phase_rad = {fmt(cfg.bench.phi0)}", "", "[chain]"]
    lines += [f"{k} = {fmt(getattr(chain, attr))}" for k, (_, attr) in SCHEMA["chain"].items()]
    lines += ["", "[sweep]", f"modulation_indices = {fmt(cfg.mod_indices)}", f"harmonics = {fmt(cfg.harmonics)}",
              f"p_ctrl_max_w = {fmt(cfg.p_ctrl_max)}", f"p_ctrl_points = {cfg.p_ctrl_points}", "", "[evm]"]
    for k, (_, attr) in SCHEMA["evm"].items():
        value = cfg.constellation_bauds if attr == "constellation_bauds" else getattr(evm, attr)
        lines.append(f"{k} = {fmt(value).lower() if isinstance(value, bool) else fmt(value)}")
    lines += ["", "[anchors]"]
    lines += [f"{a}_h{i}_db = {fmt(v)}" for a, i, v in cfg.anchors]
    return "\n".join(lines) + "\n"
