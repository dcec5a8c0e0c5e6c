import dataclasses

import numpy as np
import pytest

from mgtlq.mesh_fem import assemble_fem, build_mesh
from mgtlq.state_space import (PhysicalParams, adjoint, assemble_system,
                               structural_report, u_inner, y_inner)


@pytest.fixture(scope="module")
def sys8():
    return assemble_system(assemble_fem(build_mesh(1, 8)), PhysicalParams())


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(tau=0.0)
    with pytest.raises(ValueError):
        PhysicalParams(b=-1.0)
    assert PhysicalParams(alpha=2.0, c=1.0, b=1.0).gamma == pytest.approx(1.0)


def test_generator_block_structure(sys8):
    N = sys8.n_nodes
    I = np.eye(N)
    Z = np.zeros((N, N))
    # first two block rows shift the state: (u, u_t, u_tt)' starts with
    # u' = u_t, u_t' = u_tt
    np.testing.assert_allclose(sys8.A[:N], np.hstack([Z, I, Z]))
    np.testing.assert_allclose(sys8.A[N:2 * N], np.hstack([Z, Z, I]))


def test_third_row_is_weak_form(sys8):
    # M times the third block row reproduces the assembled weak form
    p = sys8.params
    ops = sys8.ops
    N = sys8.n_nodes
    row = sys8.A[2 * N:]
    np.testing.assert_allclose(
        ops.M @ row,
        -np.hstack([p.c**2 * ops.K,
                    p.b * ops.K + p.c * ops.M_g1,
                    p.alpha * ops.M + (p.b / p.c) * ops.M_g1]) / p.tau,
        atol=1e-12)


def test_input_maps(sys8):
    N = sys8.n_nodes
    p = sys8.params
    # B0 and B1 load only the acceleration block
    assert np.abs(sys8.B0[:2 * N]).max() == 0.0
    assert np.abs(sys8.B1[:2 * N]).max() == 0.0
    np.testing.assert_allclose(sys8.B1, (p.b / p.c**2) * sys8.B0)
    np.testing.assert_allclose(sys8.Bhat, sys8.B0 + sys8.A @ sys8.B1,
                               atol=1e-14)


def test_observation_norm_identity(sys8):
    # ||Robs y||_Y^2 equals the L2 mass norm of the pressure block
    rng = np.random.default_rng(1)
    N = sys8.n_nodes
    for _ in range(10):
        y = rng.standard_normal(sys8.n_state)
        ry = sys8.Robs @ y
        assert ry @ sys8.W @ ry == pytest.approx(
            y[:N] @ sys8.ops.M @ y[:N], rel=1e-10)


def test_observation_self_adjoint(sys8):
    np.testing.assert_allclose(adjoint(sys8, sys8.Robs), sys8.Robs,
                               atol=1e-10)


def test_weighted_adjoint_defining_identity(sys8):
    rng = np.random.default_rng(2)
    Astar = adjoint(sys8, sys8.A)
    Bstar = adjoint(sys8, sys8.Bhat, domain="U", codomain="Y")
    for _ in range(5):
        y = rng.standard_normal(sys8.n_state)
        w = rng.standard_normal(sys8.n_state)
        g = rng.standard_normal(sys8.n_control)
        assert y_inner(sys8, sys8.A @ y, w) == pytest.approx(
            y_inner(sys8, y, Astar @ w), rel=1e-10, abs=1e-12)
        assert y_inner(sys8, sys8.Bhat @ g, w) == pytest.approx(
            u_inner(sys8, g, Bstar @ w), rel=1e-10, abs=1e-12)


def test_adjoint_involution(sys8):
    np.testing.assert_allclose(adjoint(sys8, adjoint(sys8, sys8.A)), sys8.A,
                               atol=1e-10)


def test_structural_report_passes(sys8):
    rep = structural_report(sys8)
    assert rep["passed"], rep["failures"]


def test_structural_report_flags_corruption(sys8):
    bad = dataclasses.replace(sys8, B1=1.01 * sys8.B1)
    rep = structural_report(bad)
    assert not rep["passed"]
    assert "b1_scaling" in rep["failures"]


def test_2d_assembly_structural(sys8):
    sys2d = assemble_system(assemble_fem(build_mesh(2, 4)), PhysicalParams())
    rep = structural_report(sys2d, n_probes=20)
    assert rep["passed"], rep["failures"]
    assert sys2d.n_control == len(sys2d.ops.mesh.gamma0_nodes)
