"""Deterministic artifact writers: CSVs, JSON reports and the run manifest.

All floating-point output uses a fixed 17-significant-digit format so that a
given config and seed reproduce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .propagate import ControlSignal, Trajectory

FLOAT_FMT = "{:.17g}"


def _fmt(x) -> str:
    return FLOAT_FMT.format(float(x))


def write_csv(path, header: list, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) if isinstance(x, (int, float, np.floating))
                              else str(x) for x in row) + "\n")
    return path


def write_trajectory_csv(path, traj: Trajectory, n_nodes: int) -> Path:
    cols = (["time"]
            + [f"u_{i}" for i in range(n_nodes)]
            + [f"ut_{i}" for i in range(n_nodes)]
            + [f"utt_{i}" for i in range(n_nodes)])
    rows = ([t] + list(state) for t, state in zip(traj.times, traj.states))
    return write_csv(path, cols, rows)


def write_control_csv(path, g: ControlSignal) -> Path:
    m = g.values.shape[1]
    cols = ["time"] + [f"g_{j}" for j in range(m)]
    if g.derivative is not None:
        cols += [f"gt_{j}" for j in range(m)]
        rows = ([t] + list(v) + list(d)
                for t, v, d in zip(g.times, g.values, g.derivative))
    else:
        rows = ([t] + list(v) for t, v in zip(g.times, g.values))
    return write_csv(path, cols, rows)


def write_tidy_csv(path, series: dict) -> Path:
    """Long-format (series, time, value) CSV from {name: (times, values)}."""
    rows = []
    for name in sorted(series):
        times, values = series[name]
        for t, v in zip(np.asarray(times), np.asarray(values)):
            rows.append((name, t, v))
    return write_csv(path, ["series", "time", "value"], rows)


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def default(obj):
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, complex):
            return {"re": obj.real, "im": obj.imag}
        raise TypeError(f"not JSON serializable: {type(obj)}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
    return path


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, config: dict, files: list, timings: dict) -> Path:
    """Run manifest: config echo, library versions, timings, file hashes."""
    import scipy

    outdir = Path(outdir)
    manifest = {
        "config": config,
        "versions": {
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings_s": timings,
        "files": {str(Path(f).relative_to(outdir)): sha256_of(f)
                  for f in sorted(map(str, files))},
    }
    return write_json(outdir / "manifest.json", manifest)
