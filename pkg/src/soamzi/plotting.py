"""SVG figures rendered from the CSV files the CLI writes.

Each renderer reads only its CSV, so re-rendering a saved CSV gives the same
figure. SVG output is made byte-stable by fixing the hash salt and dropping
the date metadata.
"""

from __future__ import annotations

import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .timedomain import LinearityNotFound, find_linearity_point  # noqa: E402

__all__ = [
    "render_cg_sweep",
    "render_linearity",
    "render_evm",
    "render_constellation",
    "render_pulse_spectrum",
    "read_csv",
]

plt.rcParams["svg.hashsalt"] = "soamzi"
plt.rcParams["svg.fonttype"] = "none"

_STYLE = {"analytic": "-", "oracle": "-.", "simplified": "-", "full": "--"}


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_cg_sweep(csv_path, svg_path) -> None:
    """CG against modulation index, one line per (architecture, product, mode)."""
    curves = defaultdict(list)
    for row in read_csv(csv_path):
        key = (row["arch"], float(row["f_target_Hz"]), row["mode"])
        curves[key].append((float(row["m_dat"]), float(row["CG_dB"])))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (arch, f, mode), pts in sorted(curves.items()):
        pts.sort()
        m, cg = zip(*pts)
        ax.plot(m, cg, _STYLE.get(mode, "-"), marker="o", ms=3,
                label=f"{arch} {f / 1e9:.0f} GHz ({mode})")
    ax.set_xlabel("data modulation index")
    ax.set_ylabel("conversion gain (dB)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, svg_path)


def render_linearity(csv_paths: dict, svg_path, order: int = 5) -> None:
    """Output quantity and its fitted second derivative against control power.

    ``csv_paths`` maps an architecture label to a sweep CSV.
    """
    fig, axes = plt.subplots(2, len(csv_paths), figsize=(5.2 * len(csv_paths), 6.4), squeeze=False)
    for col, (arch, path) in enumerate(sorted(csv_paths.items())):
        rows = read_csv(path)
        x = np.array([float(r["p_ctrl_W"]) for r in rows]) * 1e3
        keys = [k for k in rows[0] if k != "p_ctrl_W"]
        top, bottom = axes[0, col], axes[1, col]
        for key in keys:
            y = np.array([float(r[key]) for r in rows]) * 1e3
            ok = np.isfinite(y)
            port = key.split("_")[-2]
            top.plot(x[ok], y[ok], marker="o", ms=3, label=f"port {port}")
            poly = np.polynomial.Polynomial.fit(x[ok], y[ok], order)
            xs = np.linspace(x[ok][0], x[ok][-1], 200)
            bottom.plot(xs, poly.deriv(2)(xs), label=f"SD port {port}")
            if port == "J":
                try:
                    p_lin = find_linearity_point(x[ok], y[ok], order).p_ctrl
                except (LinearityNotFound, ValueError):
                    continue
                for ax in (top, bottom):
                    ax.axvline(p_lin, color="k", ls=":", lw=1.0)
                bottom.annotate(f"{p_lin:.3g} mW", (p_lin, 0.0), textcoords="offset points",
                                xytext=(4, 6), fontsize=7)
        bottom.axhline(0.0, color="k", lw=0.6)
        top.set_title(arch)
        top.set_ylabel(keys[0].rsplit("_", 2)[0] + " (mW)")
        bottom.set_ylabel("second derivative (1/mW)")
        bottom.set_xlabel("port A power (mW)")
        for ax in (top, bottom):
            ax.grid(alpha=0.3)
            ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, svg_path)


def render_evm(csv_path, svg_path, fmt: str) -> None:
    """EVM against baud for one format, with its FEC limit as a dashed line."""
    curves = defaultdict(list)
    threshold = None
    for row in read_csv(csv_path):
        if row["format"] != fmt:
            continue
        threshold = float(row["fec_threshold_pct"])
        key = (row["arch"], float(row["f_target_Hz"]))
        curves[key].append((float(row["baud_Hz"]), float(row["evm_pct"])))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (arch, f), pts in sorted(curves.items()):
        pts.sort()
        baud, evm = zip(*pts)
        ax.plot(np.array(baud) / 1e6, evm, marker="o", ms=3, label=f"{arch} {f / 1e9:.2f} GHz")
    if threshold is not None:
        ax.axhline(threshold, ls="--", color="k", lw=1.0, label=f"FEC limit {threshold:.1f}%")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("baud (MBd)")
    ax.set_ylabel("EVM (%)")
    ax.set_title(fmt)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, svg_path)


def render_constellation(csv_path, svg_path, title: str = "") -> None:
    rows = read_csv(csv_path)
    i = np.array([float(r["I"]) for r in rows])
    q = np.array([float(r["Q"]) for r in rows])
    ri = np.array([float(r["ref_I"]) for r in rows])
    rq = np.array([float(r["ref_Q"]) for r in rows])
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    ax.plot(i, q, ".", ms=1.5, alpha=0.5)
    ax.plot(ri, rq, "r+", ms=8)
    ax.set_aspect("equal")
    ax.set_xlabel("I")
    ax.set_ylabel("Q")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, svg_path)


def render_pulse_spectrum(csv_path, svg_path) -> None:
    rows = read_csv(csv_path)
    f = np.array([float(r["freq_Hz"]) for r in rows]) / 1e9
    mag = np.array([float(r["abs_W"]) for r in rows]) * 1e3
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.stem(f, mag)
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel("|p_i| (mW)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, svg_path)
