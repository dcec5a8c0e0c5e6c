import json

import pytest

from mgtlq import cli
from mgtlq.io_formats import sha256_of

FAST = ["--set", "resolution=8", "--set", "T=0.5", "--set", "nt=16"]


def run_cli(scenario, outdir, *extra):
    return cli.main([scenario, "--outdir", str(outdir), *FAST, *extra])


def test_free_scenario_artifacts(tmp_path):
    assert run_cli("free", tmp_path) == 0
    for name in ("free_states.csv", "free_probes.csv", "free_probes.png",
                 "free_energy.csv", "free_energy.png", "report.json",
                 "manifest.json"):
        assert (tmp_path / name).exists(), name


def test_manifest_hashes_are_valid(tmp_path):
    assert run_cli("spectrum", tmp_path) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["files"], "manifest lists no artifacts"
    for rel, digest in manifest["files"].items():
        assert sha256_of(tmp_path / rel) == digest
    assert manifest["config"]["resolution"] == 8
    assert "numpy" in manifest["versions"]


def test_deterministic_csv_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("smooth_control", a) == 0
    assert run_cli("smooth_control", b) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment line\nresolution = 8\nT = 0.5\nalpha = 0.5\n")
    out = tmp_path / "out"
    assert cli.main(["spectrum", "--config", str(cfg), "--outdir", str(out),
                     "--set", "alpha=2.0"]) == 0
    report = json.loads((out / "report.json").read_text())
    # the command-line override wins over the config file
    assert report["gamma"] == pytest.approx(1.0)
    assert report["abscissa"] < 0.0


def test_unknown_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("granularity = 8\n")
    assert cli.main(["free", "--config", str(cfg),
                     "--outdir", str(tmp_path / "o")]) == 2


def test_malformed_line_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("resolution 8\n")
    assert cli.main(["free", "--config", str(cfg),
                     "--outdir", str(tmp_path / "o")]) == 2


def test_bad_value_exits_2(tmp_path):
    assert cli.main(["free", "--set", "resolution=tiny",
                     "--outdir", str(tmp_path)]) == 2


def test_bad_physics_exits_2(tmp_path):
    assert cli.main(["free", "--set", "tau=-1", "--outdir", str(tmp_path)]) == 2


def test_unknown_scenario_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["warp_drive", "--outdir", str(tmp_path)])
    assert exc.value.code == 2


def test_z_system_scenario_checks_gap(tmp_path):
    assert run_cli("z_system", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"]
    assert report["gap_vs_direct"] < 1e-6


def test_closed_loop_scenario(tmp_path):
    assert run_cli("closed_loop", tmp_path, "--set", "ic=random") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["cost"] == pytest.approx(report["predicted_cost"], rel=1e-2)


def test_oracle_scenario(tmp_path):
    assert run_cli("oracle", tmp_path, "--set", "ic=random") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["normal_residual"] < 1e-8


def test_nonexistence_scenario(tmp_path):
    assert run_cli("nonexistence", tmp_path, "--set", "T=2.0",
                   "--set", "nt=128", "--set", "n_max=48",
                   "--set", "resolution=16") == 0


def test_match_g0_scenario(tmp_path):
    assert run_cli("match_g0", tmp_path, "--set", "ic=random") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["initial_gap"] < 1e-6


def test_optimize_g0_scenario(tmp_path):
    assert run_cli("optimize_g0", tmp_path, "--set", "ic=random",
                   "--set", "radius=1000000.0") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["classification"] == "interior_stationary"
