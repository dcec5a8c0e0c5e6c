import numpy as np
import pytest

from mgtlq.feedback import (closed_loop, match_g0, optimize_g0, value_at)
from mgtlq.lq_oracle import LQProblem, solve_open_loop
from mgtlq.mesh_fem import assemble_fem, build_mesh
from mgtlq.riccati import solve_dre
from mgtlq.state_space import PhysicalParams, assemble_system


@pytest.fixture(scope="module")
def sys8():
    return assemble_system(assemble_fem(build_mesh(1, 8)), PhysicalParams())


@pytest.fixture(scope="module")
def ric(sys8):
    return solve_dre(sys8, 1.0, dt=1e-3)


def test_zero_data_stays_at_rest(sys8, ric):
    run = closed_loop(sys8, ric, np.zeros(sys8.n_state), np.zeros(1), 1e-2)
    assert np.abs(run.control.values).max() < 1e-12
    assert run.cost < 1e-20
    assert run.consistency_gap < 1e-12


def test_synthesis_consistency(sys8, ric):
    rng = np.random.default_rng(0)
    run = closed_loop(sys8, ric, rng.standard_normal(sys8.n_state),
                      rng.standard_normal(1), 1e-3)
    gmax = np.abs(run.control.values).max()
    assert run.consistency_gap < 1e-8 * gmax


def test_cost_matches_value_and_oracle(sys8, ric):
    rng = np.random.default_rng(1)
    y0 = rng.standard_normal(sys8.n_state)
    g0 = rng.standard_normal(1)
    run = closed_loop(sys8, ric, y0, g0, 1e-3)
    predicted = value_at(sys8, ric, y0, g0)
    assert run.cost == pytest.approx(predicted, rel=1e-3)
    sol = solve_open_loop(LQProblem(sys=sys8, y0=y0, g0_param=g0,
                                    T=1.0, nt=64))
    assert run.cost == pytest.approx(sol.cost, rel=1e-3)


def test_physical_state_reconstruction(sys8, ric):
    rng = np.random.default_rng(2)
    run = closed_loop(sys8, ric, rng.standard_normal(sys8.n_state),
                      rng.standard_normal(1), 1e-2)
    rebuilt = run.w_trajectory.states + run.control.values @ sys8.B1.T
    assert np.abs(rebuilt - run.trajectory.states).max() < 1e-12


def test_evolution_property(sys8, ric):
    # restarting the loop from an interior state reproduces the tail
    rng = np.random.default_rng(3)
    y0 = rng.standard_normal(sys8.n_state)
    g0 = rng.standard_normal(1)
    dt = 1e-3
    run = closed_loop(sys8, ric, y0, g0, dt)
    k = len(run.trajectory.times) // 2
    t_mid = run.trajectory.times[k]
    restart = closed_loop(sys8, ric, run.trajectory.states[k],
                          run.control.values[k], dt, t0=t_mid)
    gap = np.abs(restart.trajectory.states[-1]
                 - run.trajectory.states[-1]).max()
    assert gap < 1e-8 * (1.0 + np.abs(run.trajectory.states[-1]).max())


def test_closed_loop_rejects_bad_start(sys8, ric):
    with pytest.raises(ValueError):
        closed_loop(sys8, ric, np.zeros(sys8.n_state), np.zeros(1),
                    1e-2, t0=1.5)


def test_matching_condition(sys8, ric):
    rng = np.random.default_rng(4)
    y0 = rng.standard_normal(sys8.n_state)
    g0 = match_g0(sys8, ric, y0, verify_dt=1e-3)
    run = closed_loop(sys8, ric, y0, g0, 1e-3)
    assert np.abs(run.control.values[0] - g0).max() < 1e-8 * (
        1.0 + np.abs(g0).max())


def test_optimize_interior(sys8, ric):
    rng = np.random.default_rng(5)
    y0 = rng.standard_normal(sys8.n_state)
    opt = optimize_g0(sys8, ric, y0, radius=1e6)
    assert opt.classification == "interior_stationary"
    assert opt.kernel_residual < 1e-8
    # no other g0 in the ball does better
    for k in range(5):
        g = opt.g_star + 0.1 * np.random.default_rng(k).standard_normal(1)
        assert value_at(sys8, ric, y0, g) >= opt.value - 1e-12


def test_optimize_boundary(sys8, ric):
    rng = np.random.default_rng(6)
    y0 = rng.standard_normal(sys8.n_state)
    free = optimize_g0(sys8, ric, y0, radius=1e6)
    rho = 0.25 * free.g_norm
    opt = optimize_g0(sys8, ric, y0, radius=rho)
    assert opt.classification == "boundary"
    assert opt.g_norm == pytest.approx(rho, rel=1e-12)
    assert opt.value >= free.value


def test_optimize_rejects_bad_radius(sys8, ric):
    with pytest.raises(ValueError):
        optimize_g0(sys8, ric, np.zeros(sys8.n_state), radius=0.0)


def test_matched_never_beats_optimized(sys8, ric):
    rng = np.random.default_rng(7)
    for _ in range(3):
        y0 = rng.standard_normal(sys8.n_state)
        g_matched = match_g0(sys8, ric, y0)
        opt = optimize_g0(sys8, ric, y0,
                          radius=10.0 * (1.0 + np.linalg.norm(g_matched)))
        assert value_at(sys8, ric, y0, g_matched) >= opt.value - 1e-9
