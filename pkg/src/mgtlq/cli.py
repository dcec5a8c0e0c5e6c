"""Command-line front end.

Scenarios mirror the library's capabilities: free/controlled propagation,
spectrum, Riccati solve, closed-loop synthesis, open-loop optimization,
the nonexistence demonstration, initial-value matching/optimization, and
the full numeric validation sweep.

Configuration is key=value lines in a file (``--config``); any key can be
overridden with ``--set key=value`` on the command line.  Every run writes
its artifacts (delimited data, rendered figures, a JSON report) plus a
manifest with content hashes into the output directory.

Exit codes: 0 success, 1 numeric check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import feedback, lq_oracle, riccati, validation
from .io_formats import (write_control_csv, write_csv, write_json,
                         write_manifest, write_trajectory_csv)
from .mesh_fem import MeshError, assemble_fem, build_mesh
from .propagate import (ControlSignal, IntegrationError, propagate_free,
                        propagate_L2_control, propagate_smooth_control,
                        propagate_z_system, spectrum, stable_dt)
from .report import emit_plotdata, energy_series, trajectory_series
from .state_space import PhysicalParams, assemble_system

SCENARIOS = ("free", "smooth_control", "L2_control", "z_system", "spectrum",
             "dre", "closed_loop", "oracle", "nonexistence", "match_g0",
             "optimize_g0", "full_validation")

# reference scenario defaults; dt=0 means "auto" (stability-margin heuristic)
DEFAULTS = {
    "dimension": 1,
    "resolution": 64,
    "gamma0_spec": "default",
    "tau": 1.0,
    "alpha": 2.0,
    "c": 1.0,
    "b": 1.0,
    "T": 2.0,
    "dt": 0.0,
    "nt": 64,
    "seed": 0,
    "ic": "gaussian",          # zero | gaussian | random
    "control": "sine",         # sine | ramp | constant
    "amplitude": 1.0,
    "frequency": 1.0,
    "g0": 0.0,
    "radius": 1.0,
    "n_max": 64,
    "outdir": "out",
}

_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}; known keys: "
                          + ", ".join(sorted(_TYPES)))
    ty = _TYPES[key]
    try:
        if ty is int:
            return int(raw)
        if ty is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc


def load_config(path) -> dict:
    """Parse key=value lines; '#' starts a comment, blank lines ignored."""
    cfg = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        cfg[key] = _coerce(key, raw)
    return cfg


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        cfg.update(load_config(args.config))
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        cfg[key] = _coerce(key, raw)
    return cfg


def build_from_config(cfg: dict):
    mesh = build_mesh(cfg["dimension"], cfg["resolution"], cfg["gamma0_spec"])
    ops = assemble_fem(mesh)
    params = PhysicalParams(tau=cfg["tau"], alpha=cfg["alpha"],
                            c=cfg["c"], b=cfg["b"])
    return assemble_system(ops, params)


def _resolve_dt(sys, cfg: dict) -> float:
    return cfg["dt"] if cfg["dt"] > 0.0 else stable_dt(sys)


def _initial_state(sys, cfg: dict) -> np.ndarray:
    kind = cfg["ic"]
    N = sys.n_nodes
    if kind == "zero":
        return np.zeros(sys.n_state)
    if kind == "gaussian":
        nodes = sys.ops.mesh.nodes
        r2 = ((nodes - 0.3) ** 2 if nodes.ndim == 1
              else ((nodes - 0.3) ** 2).sum(axis=1))
        u0 = np.exp(-50.0 * r2)
        return np.concatenate([u0, np.zeros(2 * N)])
    if kind == "random":
        rng = np.random.default_rng(cfg["seed"])
        return rng.standard_normal(sys.n_state)
    raise ConfigError(f"unknown ic {cfg['ic']!r}; expected zero|gaussian|random")


def _control_signal(sys, cfg: dict) -> ControlSignal:
    m = sys.n_control
    T, a, f = cfg["T"], cfg["amplitude"], cfg["frequency"]
    times = np.linspace(0.0, T, max(cfg["nt"], 2))
    shape = cfg["control"]
    if shape == "sine":
        w = 2.0 * np.pi * f
        vals = a * np.sin(w * times)
        dvals = a * w * np.cos(w * times)
    elif shape == "ramp":
        vals = a * np.maximum(0.0, 1.0 - f * times / T)
        dvals = np.where(vals > 0.0, -a * f / T, 0.0)
    elif shape == "constant":
        vals = np.full_like(times, a)
        dvals = np.zeros_like(times)
    else:
        raise ConfigError(f"unknown control {shape!r}; "
                          "expected sine|ramp|constant")
    return ControlSignal(times, np.tile(vals[:, None], (1, m)),
                         derivative=np.tile(dvals[:, None], (1, m)))


def _emit_trajectory(outdir: Path, sys, traj, stem: str) -> list:
    files = [write_trajectory_csv(outdir / f"{stem}_states.csv", traj,
                                  sys.n_nodes)]
    series = trajectory_series(traj.times, traj.states, sys.n_nodes)
    files += emit_plotdata(outdir, f"{stem}_probes", series,
                           title="probe-node traces", ylabel="value")
    files += emit_plotdata(outdir, f"{stem}_energy",
                           energy_series(traj.times, traj.states, sys.W),
                           title="state energy", ylabel="||y||_Y^2",
                           logy=True)
    return files


# ---------------------------------------------------------------- scenarios

def run_free(sys, cfg, outdir):
    dt = _resolve_dt(sys, cfg)
    traj = propagate_free(sys, _initial_state(sys, cfg), cfg["T"], dt)
    files = _emit_trajectory(outdir, sys, traj, "free")
    return {"dt": dt, "final_norm": float(np.linalg.norm(traj.states[-1]))}, files, True


def run_smooth_control(sys, cfg, outdir):
    dt = _resolve_dt(sys, cfg)
    g = _control_signal(sys, cfg)
    traj = propagate_smooth_control(sys, _initial_state(sys, cfg), g, dt)
    files = [write_control_csv(outdir / "control.csv", g)]
    files += _emit_trajectory(outdir, sys, traj, "smooth")
    return {"dt": dt}, files, True


def run_L2_control(sys, cfg, outdir):
    dt = _resolve_dt(sys, cfg)
    g = _control_signal(sys, cfg)
    traj = propagate_L2_control(sys, _initial_state(sys, cfg), g, dt)
    files = [write_control_csv(outdir / "control.csv", g)]
    files += _emit_trajectory(outdir, sys, traj, "mild")
    return {"dt": dt}, files, True


def run_z_system(sys, cfg, outdir):
    dt = _resolve_dt(sys, cfg)
    y0 = _initial_state(sys, cfg)
    N = sys.n_nodes
    traj = propagate_z_system(sys, y0[:N], y0[N:2 * N], y0[2 * N:],
                              cfg["T"], dt)
    direct = propagate_free(sys, y0, cfg["T"], dt)
    gap = traj.max_norm_gap(direct)
    files = _emit_trajectory(outdir, sys, traj, "z_system")
    return {"dt": dt, "gap_vs_direct": gap}, files, gap <= 1e-6


def run_spectrum(sys, cfg, outdir):
    sp = spectrum(sys)
    ev = sp["eigenvalues"]
    files = [write_csv(outdir / "eigenvalues.csv", ["re", "im"],
                       zip(ev.real, ev.imag))]
    files += emit_plotdata(outdir, "spectrum",
                           {"eigenvalues": (ev.real, ev.imag)},
                           title=f"generator spectrum (gamma = "
                                 f"{sys.params.gamma:g})",
                           xlabel="Re", ylabel="Im", scatter=True)
    payload = {"abscissa": sp["abscissa"],
               "spectral_radius": sp["spectral_radius"],
               "kernel_eigenvalue": sp["kernel_eigenvalue"],
               "gamma": sys.params.gamma}
    return payload, files, True


def run_dre(sys, cfg, outdir):
    # the residual audit differentiates stored snapshots, so cap the auto
    # step: coarse grids would otherwise dominate the residual with FD error
    dt = (cfg["dt"] if cfg["dt"] > 0.0
          else min(stable_dt(sys) / 2.0, cfg["T"] / 100.0))
    ric = riccati.solve_dre(sys, cfg["T"], dt=dt)
    files = emit_plotdata(
        outdir, "dre_health",
        {"riccati_residual": (ric.times, ric.residual_log),
         "G_condition": (ric.times, ric.G_cond)},
        title="Riccati solution health", ylabel="", logy=True)
    payload = {"snapshots": len(ric.times),
               "symmetry_drift": ric.symmetry_drift,
               "max_residual": float(ric.residual_log.max()),
               "min_G_singular_value": float(ric.G_smin.min()),
               "max_G_cond": float(ric.G_cond.max())}
    ok = (ric.symmetry_drift <= 1e-8
          and float(ric.residual_log.max()) <= 1e-6)
    return payload, files, ok


def run_closed_loop(sys, cfg, outdir):
    # cost is a trapezoid sum on the run grid; cap the auto step so the
    # quadrature does not dominate the reported cost on short horizons
    dt = (cfg["dt"] if cfg["dt"] > 0.0
          else min(stable_dt(sys), cfg["T"] / 200.0))
    ric = riccati.solve_dre(sys, cfg["T"])
    y0 = _initial_state(sys, cfg)
    g0 = np.full(sys.n_control, cfg["g0"])
    run = feedback.closed_loop(sys, ric, y0, g0, dt)
    files = [write_trajectory_csv(outdir / "closed_loop_states.csv",
                                  run.trajectory, sys.n_nodes),
             write_control_csv(outdir / "closed_loop_control.csv",
                               run.control)]
    files += emit_plotdata(outdir, "closed_loop_control",
                           {f"g[{j}]": (run.control.times,
                                        run.control.values[:, j])
                            for j in range(sys.n_control)},
                           title="synthesized boundary control", ylabel="g")
    files += emit_plotdata(outdir, "closed_loop_energy",
                           energy_series(run.trajectory.times,
                                         run.trajectory.states, sys.W),
                           title="closed-loop state energy",
                           ylabel="||y||_Y^2", logy=True)
    predicted = feedback.value_at(sys, ric, y0, g0)
    payload = {"cost": run.cost, "predicted_cost": predicted,
               "consistency_gap": run.consistency_gap}
    ok = run.consistency_gap <= 1e-6 * (1.0 + abs(run.cost))
    return payload, files, ok


def run_oracle(sys, cfg, outdir):
    y0 = _initial_state(sys, cfg)
    g0 = np.full(sys.n_control, cfg["g0"])
    prob = lq_oracle.LQProblem(sys=sys, y0=y0, g0_param=g0,
                               T=cfg["T"], nt=cfg["nt"])
    sol = lq_oracle.solve_open_loop(prob)
    files = [write_control_csv(outdir / "oracle_control.csv", sol.g_opt),
             write_trajectory_csv(outdir / "oracle_states.csv",
                                  sol.trajectory, sys.n_nodes)]
    files += emit_plotdata(outdir, "oracle_control",
                           {f"g[{j}]": (sol.g_opt.times,
                                        sol.g_opt.values[:, j])
                            for j in range(sys.n_control)},
                           title="open-loop optimal control", ylabel="g")
    payload = {"cost": sol.cost, "normal_residual": sol.normal_residual,
               "condition_estimate": sol.condition_estimate}
    return payload, files, True


def run_nonexistence(sys, cfg, outdir):
    v = np.full(sys.n_control, cfg["amplitude"])
    demo = lq_oracle.nonexistence_demo(sys, v, cfg["n_max"],
                                       T=cfg["T"], nt=cfg["nt"])
    files = emit_plotdata(
        outdir, "nonexistence",
        {"J(g_n)": (demo["n"], demo["costs"]),
         "J(0)": (demo["n"], np.full_like(demo["costs"], demo["J0"]))},
        title="cost along the vanishing ramp sequence", xlabel="n",
        ylabel="J", logy=True, scatter=True)
    min_cost = float(demo["costs"].min())
    payload = {"J0": demo["J0"], "min_cost": min_cost}
    return payload, files, min_cost < demo["J0"] / 10.0


def run_match_g0(sys, cfg, outdir):
    dt = _resolve_dt(sys, cfg)
    ric = riccati.solve_dre(sys, cfg["T"])
    y0 = _initial_state(sys, cfg)
    g0 = feedback.match_g0(sys, ric, y0)
    run = feedback.closed_loop(sys, ric, y0, g0, dt)
    gap = float(np.linalg.norm(run.control.values[0] - g0))
    files = [write_control_csv(outdir / "matched_control.csv", run.control)]
    files += emit_plotdata(outdir, "matched_control",
                           {f"g[{j}]": (run.control.times,
                                        run.control.values[:, j])
                            for j in range(sys.n_control)},
                           title="control with matched initial value",
                           ylabel="g")
    payload = {"g0": g0.tolist(), "initial_gap": gap, "cost": run.cost}
    return payload, files, gap <= 1e-6 * (1.0 + float(np.linalg.norm(g0)))


def run_optimize_g0(sys, cfg, outdir):
    ric = riccati.solve_dre(sys, cfg["T"])
    y0 = _initial_state(sys, cfg)
    opt = feedback.optimize_g0(sys, ric, y0, cfg["radius"])
    payload = {"g_star": opt.g_star.tolist(),
               "classification": opt.classification,
               "value": opt.value,
               "kernel_residual": opt.kernel_residual,
               "g_norm": opt.g_norm}
    return payload, [], True


def run_full_validation(sys, cfg, outdir):
    results = validation.run_full_validation()
    all_passed = True
    for r in results:
        tag = "PASS" if r["passed"] else "FAIL"
        print(f"[{tag}] {r['name']}  ({r['runtime_s']:.2f}s)")
        all_passed &= r["passed"]
    return {"checks": results,
            "passed": all_passed}, [], all_passed


_HANDLERS = {
    "free": run_free,
    "smooth_control": run_smooth_control,
    "L2_control": run_L2_control,
    "z_system": run_z_system,
    "spectrum": run_spectrum,
    "dre": run_dre,
    "closed_loop": run_closed_loop,
    "oracle": run_oracle,
    "nonexistence": run_nonexistence,
    "match_g0": run_match_g0,
    "optimize_g0": run_optimize_g0,
    "full_validation": run_full_validation,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgtlq",
        description="Boundary-controlled third-order acoustic wave "
                    "workbench: propagation, Riccati synthesis and "
                    "open-loop verification.")
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--outdir", help="output directory "
                        "(default: <outdir>/<scenario>)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        sys_ = build_from_config(cfg)
    except (ConfigError, MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    outdir = Path(args.outdir or Path(cfg["outdir"]) / args.scenario)
    outdir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    try:
        payload, files, ok = _HANDLERS[args.scenario](sys_, cfg, outdir)
    except (ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, riccati.RiccatiError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - t0

    payload = {"scenario": args.scenario, "passed": ok, **payload}
    files = list(files)
    files.append(write_json(outdir / "report.json", payload))
    files.append(write_manifest(outdir, cfg, files,
                                {"scenario_s": elapsed}))
    print(f"{args.scenario}: {'ok' if ok else 'FAILED'} "
          f"({elapsed:.2f}s, artifacts in {outdir})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
