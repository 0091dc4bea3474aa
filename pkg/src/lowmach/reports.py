"""CSV emission and figure rendering for run artifacts.

All delimited output uses shortest round-trip float formatting, so a
repeated run with the same configuration and seed produces byte-identical
files.  Figures are SVG with a pinned hash salt and no timestamp
metadata, making them byte-stable as well.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "lowmach"

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first
import numpy as np

from .entropy import ConvergenceReport, EntropyTrace
from .errors import ConfigError
from .resonance import resonant_triple_columns, resonant_triples
from .snapshots import format_float
from .spectral import TorusGrid

_SVG_META = {"Date": None}


def _write_rows(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(x) if isinstance(x, float)
                              else str(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def trace_header(shells: int) -> list:
    return (["t", "E", "H", "comp_velocity", "comp_pressure",
             "comp_quantum", "strong_gap"]
            + [f"weak_gap_{i}" for i in range(1, shells + 1)])


def write_trace_csv(trace: EntropyTrace, path) -> None:
    shells = trace.weak_gap.shape[1]
    rows = []
    for i in range(len(trace.times)):
        rows.append([float(trace.times[i]), float(trace.energy[i]),
                     float(trace.entropy[i]), float(trace.comp_velocity[i]),
                     float(trace.comp_pressure[i]),
                     float(trace.comp_quantum[i]),
                     float(trace.strong_gap[i])]
                    + [float(x) for x in trace.weak_gap[i]])
    _write_rows(path, trace_header(shells), rows)


def write_report_csv(report: ConvergenceReport, path) -> None:
    header = ["eps", "sup_H", "sup_H_minus_floor", "sup_strong_gap",
              "fitted_rate", "C_fit", "M_fit"]
    rows = []
    for i in range(len(report.eps_list)):
        rows.append([float(report.eps_list[i]), float(report.sup_H[i]),
                     float(report.sup_H_minus_floor[i]),
                     float(report.sup_strong_gap[i]),
                     float(report.fitted_rate[i]), float(report.C_fit[i]),
                     float(report.M_fit[i])])
    _write_rows(path, header, rows)


def write_gronwall_csv(report: ConvergenceReport, path) -> None:
    header = ["eps", "C_fit", "M_fit", "r_fit"]
    rows = [[float(report.eps_list[i]), float(report.C_fit[i]),
             float(report.M_fit[i]), float(report.r_fit[i])]
            for i in range(len(report.eps_list))]
    _write_rows(path, header, rows)


def write_weak_gaps_csv(report: ConvergenceReport, path) -> None:
    shells = report.weak_integral.shape[1]
    header = ["eps"] + [f"shell_{s}" for s in range(shells)]
    rows = [[float(report.eps_list[i])]
            + [float(x) for x in report.weak_integral[i]]
            for i in range(len(report.eps_list))]
    _write_rows(path, header, rows)


def write_series_csv(path, header, columns) -> None:
    """Generic per-time CSV from parallel 1D arrays."""
    n = len(columns[0])
    for c in columns:
        if len(c) != n:
            raise ValueError("columns differ in length")
    rows = [[float(c[i]) for c in columns] for i in range(n)]
    _write_rows(path, header, rows)


def write_resonant_triples_csv(grid: TorusGrid, path) -> None:
    table = resonant_triples(grid)
    header = resonant_triple_columns(grid.dimension)
    _write_rows(path, header, [[int(x) for x in row] for row in table])


def read_csv(path):
    """(header, float matrix) of a delimited artifact; empty data is an
    error because every emitted file carries at least one row."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"no such CSV: {p}")
    lines = [ln for ln in p.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"empty CSV: {p}")
    header = [h.strip() for h in lines[0].split(",")]
    data = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ConfigError(f"ragged CSV row in {p}")
        try:
            data.append([float(c) for c in cells])
        except ValueError as ex:
            raise ConfigError(f"non-numeric cell in {p}: {ex}") from None
    if not data:
        raise ConfigError(f"CSV {p} has a header but no data rows")
    return header, np.array(data)


def _new_figure():
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=100)
    return fig, ax


def render_trace_figure(header, data, path) -> None:
    """Line chart of the entropy and its three components against time."""
    cols = {name: data[:, i] for i, name in enumerate(header)}
    fig, ax = _new_figure()
    t = cols["t"]
    ax.plot(t, cols["H"], label="H", color="black", linewidth=1.6)
    ax.plot(t, cols["comp_velocity"], label="velocity part", linewidth=1.0)
    ax.plot(t, cols["comp_pressure"], label="pressure part", linewidth=1.0)
    ax.plot(t, cols["comp_quantum"], label="quantum part", linewidth=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("modulated energy")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def render_sweep_figure(header, data, path) -> None:
    """Log-log decay chart of the per-eps suprema, one marker per run."""
    cols = {name: data[:, i] for i, name in enumerate(header)}
    fig, ax = _new_figure()
    eps = cols["eps"]
    for name, marker in (("sup_H", "o"), ("sup_H_minus_floor", "s"),
                         ("sup_strong_gap", "^")):
        vals = cols[name]
        if np.all(vals > 0):
            ax.loglog(eps, vals, marker=marker, label=name)
        else:
            ax.plot(eps, vals, marker=marker, label=name)
            ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("eps")
    ax.set_ylabel("supremum over output times")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_csv(in_path, out_dir) -> Path:
    """Dispatch on the CSV header and render the matching figure."""
    header, data = read_csv(in_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if header[:3] == ["t", "E", "H"]:
        target = out / "entropy_components.svg"
        render_trace_figure(header, data, target)
        return target
    if header[:2] == ["eps", "sup_H"]:
        target = out / "sweep_decay.svg"
        render_sweep_figure(header, data, target)
        return target
    raise ConfigError(
        f"unrecognized CSV header {','.join(header[:3])}...; expected a "
        "trace or sweep report")
