"""Plot-data emission: tidy CSVs with matching rendered figures.

Every scenario that produces time series ends up here: the data goes into a
long-format (series, time, value) CSV and the same series are rendered to a
PNG next to it, so results can be inspected without rerunning anything.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

from .io_formats import write_tidy_csv


class ReportError(RuntimeError):
    """A report was requested but its input artifacts are missing."""


def require_artifacts(paths) -> None:
    missing = [str(p) for p in map(Path, paths) if not p.exists()]
    if missing:
        raise ReportError("missing artifacts: " + ", ".join(missing))


def render_figure(path, series: dict, title: str = "", xlabel: str = "t",
                  ylabel: str = "", logy: bool = False,
                  scatter: bool = False) -> Path:
    """Render {name: (x, y)} to a PNG; one labelled line (or marker) each."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in sorted(series):
        x, y = series[name]
        if scatter:
            ax.plot(x, y, "o-", ms=3, lw=0.8, label=name)
        else:
            ax.plot(x, y, lw=1.2, label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) <= 12:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def emit_plotdata(outdir, stem: str, series: dict, title: str = "",
                  xlabel: str = "t", ylabel: str = "", logy: bool = False,
                  scatter: bool = False) -> list:
    """Write <stem>.csv (tidy long format) and <stem>.png; return both paths."""
    outdir = Path(outdir)
    csv_path = write_tidy_csv(outdir / f"{stem}.csv", series)
    png_path = render_figure(outdir / f"{stem}.png", series, title=title,
                             xlabel=xlabel, ylabel=ylabel, logy=logy,
                             scatter=scatter)
    return [csv_path, png_path]


def trajectory_series(times: np.ndarray, states: np.ndarray, n_nodes: int,
                      probe_nodes=None) -> dict:
    """Pressure / velocity / acceleration traces at a few probe nodes."""
    if probe_nodes is None:
        probe_nodes = sorted({0, n_nodes // 2, n_nodes - 1})
    series = {}
    for i in probe_nodes:
        series[f"u[{i}]"] = (times, states[:, i])
        series[f"ut[{i}]"] = (times, states[:, n_nodes + i])
    return series


def energy_series(times: np.ndarray, states: np.ndarray, W: np.ndarray) -> dict:
    e = np.einsum("ki,ij,kj->k", states, W, states)
    return {"state_energy": (times, e)}
