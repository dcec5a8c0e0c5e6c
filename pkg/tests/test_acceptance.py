"""End-to-end numeric acceptance suite.

One test per validation check; each prints a pass/fail line with the measured
quantities so the full picture survives in the pytest log.
"""

import pytest

from mgtlq import validation


def _run(check):
    result = check()
    tag = "PASS" if result["passed"] else "FAIL"
    detail = {k: v for k, v in result.items() if k not in ("name", "passed")}
    print(f"[{tag}] {result['name']}: {detail}")
    assert result["passed"], detail
    return result


def test_01_structural_identities():
    r = _run(validation.check_structural_identities)
    assert r["ra2_identity"] <= 1e-10


def test_02_formulation_equivalence():
    r = _run(validation.check_formulation_equivalence)
    assert r["max_gap"] <= 1e-6
    assert min(r["refinement_ratios"]) > 8.0
    assert r["runtime_s"] < 10.0


def test_03_z_system_equivalence():
    r = _run(validation.check_z_system_equivalence)
    assert r["max_gap"] <= 1e-6
    assert r["runtime_s"] < 5.0


def test_04_stability_threshold():
    r = _run(validation.check_stability_threshold)
    assert r["abscissa_stable"] < 0.0
    assert r["abscissa_unstable"] > 0.0
    assert r["runtime_s"] < 5.0


def test_05_nonexistence():
    r = _run(validation.check_nonexistence)
    assert r["J0"] > 0.0
    assert r["min_cost"] < r["J0"] / 10.0
    assert r["runtime_s"] < 30.0


def test_06_riccati_oracle_identity():
    r = _run(validation.check_riccati_oracle_identity)
    assert max(r["relative_errors"]) <= 1e-3
    assert r["runtime_s"] < 60.0


def test_07_closed_loop_optimality():
    r = _run(validation.check_closed_loop_optimality)
    assert max(r["relative_errors"]) <= 1e-3
    assert all(r["gap_ok"])
    assert r["runtime_s"] < 60.0


def test_08_dre_health():
    r = _run(validation.check_dre_health)
    assert r["terminal_exact"]
    assert r["symmetry_drift"] <= 1e-8
    assert r["max_residual"] <= 1e-6
    assert r["min_G_singular_value"] > 0.0
    assert r["runtime_s"] < 30.0


def test_09_matching_condition():
    r = _run(validation.check_matching)
    assert max(r["normalized_residuals"]) <= 1e-6
    assert r["runtime_s"] < 30.0


def test_10_g0_optimization():
    r = _run(validation.check_g0_optimization)
    assert all(r["interior_ok"]) and all(r["boundary_ok"])
    assert r["runtime_s"] < 30.0


def test_11_suboptimality_ordering():
    r = _run(validation.check_suboptimality_ordering)
    assert min(r["margins"]) >= -1e-9


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
