"""Command-line runner: config-driven experiments writing CSV tables and SVG figures.

Subcommands::

    soamzi cg-sweep       conversion gain against data modulation index
    soamzi linearity      quasi-static port-A sweep and second-derivative zero
    soamzi evm-sweep      EVM against baud with constellations
    soamzi validate       identity, oracle and convergence checks (exit 1 on failure)
    soamzi pulse-spectrum clock harmonics, ideal and after the optical filter
    soamzi default-config print the full config schema with defaults
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dsp_evm, plotting, rf_chain, scenarios
from .config import MODES, ConfigError, ExperimentConfig, default_config_text, load_config
from .signals import write_spectrum_csv
from .smallsignal import cg_sweep, write_cg_csv
from .timedomain import LinearityNotFound, find_linearity_point, write_sweep_csv

__all__ = ["main", "build_parser", "cmd_cg_sweep", "cmd_linearity", "cmd_evm_sweep",
           "cmd_validate", "cmd_pulse_spectrum"]


def _prepare(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.evm = dataclasses.replace(cfg.evm, seed=args.seed)
    if args.mode is not None:
        cfg.mode = args.mode
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(["--workers must be >= 1"])
        cfg.workers = args.workers
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _tag(f: float) -> str:
    return f"{f / 1e9:g}GHz".replace(".", "p")


def cmd_cg_sweep(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """CG against modulation index per (architecture, product).

    Analytic rows use the calibrated operating points, including the optical
    filter factors. Oracle rows run the rate-equation simulation at the
    configured drive powers, next to the full-expansion analytic value for the
    same uncalibrated operating point.
    """
    bench = cfg.bench
    rows = []
    if cfg.mode in ("analytic", "both"):
        cal = scenarios.calibrate_reference(cfg.anchors, bench)
        spectra, factors = scenarios.model_spectra(bench, indices=cfg.harmonics)
        for arch in cfg.architectures:
            op = cal.operating_points[arch]
            for row in cg_sweep(op, spectra[arch], cfg.harmonics, cfg.mod_indices,
                                bench.data_power(arch), bench.f_dat, "simplified"):
                row["CG_dB"] += 10.0 * math.log10(factors[arch].get(row["i"], 1.0))
                row["mode"] = "analytic"
                rows.append(row)
    if cfg.mode in ("oracle", "both"):
        for arch in cfg.architectures:
            for m in cfg.mod_indices:
                setup = scenarios.mixer_setup(arch, bench, m_dat=m)
                for r in scenarios.compare_oracle(setup, cfg.harmonics):
                    f = r.index * setup.clock.rep_rate - bench.f_dat
                    rows.append({"arch": arch.value, "i": r.index, "f_target_Hz": f,
                                 "CG_dB": r.cg_oracle_db, "mode": "oracle", "m_dat": m})
                    rows.append({"arch": arch.value, "i": r.index, "f_target_Hz": f,
                                 "CG_dB": r.cg_analytic_db, "mode": "full", "m_dat": m})
    csv_path = out / "cg_sweep.csv"
    write_cg_csv(csv_path, rows)
    svg_path = out / "cg_sweep.svg"
    plotting.render_cg_sweep(csv_path, svg_path)
    stage_path = out / "chain_stages.csv"
    arch = cfg.architectures[0]
    p_out = bench.data_power(arch) * max(cfg.mod_indices)
    rf_chain.write_stage_csv(stage_path, p_out, bench.chain)
    return [csv_path, svg_path, stage_path]


def cmd_linearity(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Quasi-static sweep per architecture and the first SD zero of port J.

    The sweep is always time-domain; ``mode`` does not apply.
    """
    paths, sweeps, points = [], {}, []
    for arch in cfg.architectures:
        sweep = scenarios.linearity_sweep(arch, cfg.bench, cfg.p_ctrl_max, cfg.p_ctrl_points)
        ok = np.isfinite(sweep["J"])
        try:
            p = find_linearity_point(sweep["p_ctrl"][ok], sweep["J"][ok]).p_ctrl
        except (LinearityNotFound, ValueError) as exc:
            print(f"{arch.value}: {exc.args[0]}", file=sys.stderr)
            p = math.nan
        path = out / f"linearity_{arch.value}.csv"
        write_sweep_csv(path, sweep, "power")
        sweeps[arch.value] = path
        paths.append(path)
        points.append((arch.value, p))
    summary = out / "linearity_points.csv"
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arch", "p_ctrl_W", "p_ctrl_dBm"])
        for arch, p in points:
            dbm = rf_chain.watts_to_dbm(p) if p > 0 else math.nan
            writer.writerow([arch, f"{p:.9e}", f"{dbm:.6f}"])
    svg = out / "linearity.svg"
    plotting.render_linearity(sweeps, svg)
    return paths + [summary, svg]


def cmd_evm_sweep(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """EVM against baud with the analytic sideband mixer on calibrated operating points."""
    if cfg.mode == "oracle":
        raise ConfigError(["evm-sweep runs the analytic sideband mixer only; use --mode analytic"])
    evm_cfg = dataclasses.replace(cfg.evm, archs=tuple(a.value for a in cfg.architectures))
    cal = scenarios.calibrate_reference(cfg.anchors, cfg.bench)
    reports = scenarios.run_evm_sweep(evm_cfg, cfg.bench, cal, cfg.workers)
    csv_path = out / "evm_sweep.csv"
    dsp_evm.write_evm_csv(csv_path, reports)
    paths = [csv_path]
    for fmt in evm_cfg.formats:
        svg = out / f"evm_{fmt}.svg"
        plotting.render_evm(csv_path, svg, fmt)
        paths.append(svg)
    for r in reports:
        if not any(math.isclose(r.baud, b) for b in cfg.constellation_bauds):
            continue
        stem = f"constellation_{r.format}_{r.baud / 1e6:g}MBd_{r.arch}_{_tag(r.f_target)}"
        cpath = out / f"{stem}.csv"
        dsp_evm.write_constellation_csv(cpath, r)
        spath = out / f"{stem}.svg"
        plotting.render_constellation(cpath, spath, f"{r.format} {r.baud / 1e6:g} MBd {r.arch} "
                                      f"{r.f_target / 1e9:.2f} GHz, EVM {r.evm_rms:.2f}%")
        paths += [cpath, spath]
    return paths


def cmd_validate(cfg: ExperimentConfig, out: Path, tau_d_scale: float = 1.0) -> tuple[bool, list[Path]]:
    checks = scenarios.validation_suite(cfg.bench, tau_d_scale=tau_d_scale, seed=cfg.seed)
    csv_path = out / "validate.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "measured", "limit", "passed"])
        for c in checks:
            writer.writerow([c.name, f"{c.measured:.6e}", f"{c.limit:g}", int(c.passed)])
    json_path = out / "validate.json"
    json_path.write_text(json.dumps([dataclasses.asdict(c) for c in checks], indent=2) + "\n")
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.measured:.3e} (limit {c.limit:g})")
    return all(c.passed for c in checks), [csv_path, json_path]


def cmd_pulse_spectrum(cfg: ExperimentConfig, out: Path, max_index: int = 6) -> list[Path]:
    """Clock harmonics per architecture, ideal and seen through the output filter."""
    paths = []
    for arch in cfg.architectures:
        setup = scenarios.mixer_setup(arch, cfg.bench)
        ideal = scenarios.clock_spectrum(setup, max_index)
        filtered = rf_chain.filtered_clock_harmonics(setup.clock, cfg.bench.chain, max_index)
        for label, spectrum in (("ideal", ideal), ("filtered", filtered)):
            csv_path = out / f"pulse_spectrum_{arch.value}_{label}.csv"
            write_spectrum_csv(csv_path, spectrum)
            svg = csv_path.with_suffix(".svg")
            plotting.render_pulse_spectrum(csv_path, svg)
            paths += [csv_path, svg]
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soamzi", description="SOA-MZI sampling mixer simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file (defaults if omitted)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [run] output_dir)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--mode", choices=MODES, help="analytic, oracle or both")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("cg-sweep", parents=[common], help="CG against modulation index")
    sub.add_parser("linearity", parents=[common], help="linearity-point search")
    sub.add_parser("evm-sweep", parents=[common], help="EVM against baud")
    val = sub.add_parser("validate", parents=[common], help="run the validation checks")
    val.add_argument("--tau-d-scale", type=float, default=1.0,
                     help="scale the analytic lifetime (fault injection)")
    ps = sub.add_parser("pulse-spectrum", parents=[common], help="dump clock harmonics")
    ps.add_argument("--max-index", type=int, default=6)
    sub.add_parser("default-config", help="print the default config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(default_config_text())
        return 0
    try:
        cfg, out = _prepare(args)
        if args.command == "cg-sweep":
            paths = cmd_cg_sweep(cfg, out)
        elif args.command == "linearity":
            paths = cmd_linearity(cfg, out)
        elif args.command == "evm-sweep":
            paths = cmd_evm_sweep(cfg, out)
        elif args.command == "pulse-spectrum":
            paths = cmd_pulse_spectrum(cfg, out, args.max_index)
        else:
            ok, paths = cmd_validate(cfg, out, args.tau_d_scale)
            for p in paths:
                print(p)
            return 0 if ok else 1
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
