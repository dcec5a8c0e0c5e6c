"""Open-loop reference solver for the parametrized LQ tracking problem.

The control is discretized in the same piecewise-linear-in-time class as the
propagators; the control-to-observation map is assembled column by column
(one propagation per control basis function) and the quadratic problem is
solved through its normal equations.  Deliberately transparent rather than
fast: this is the trusted reference the Riccati path is validated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .propagate import (ControlSignal, IntegrationError, Trajectory,
                        propagate_free, propagate_L2_control, stable_dt)
from .state_space import StateSystem


@dataclass(frozen=True)
class LQProblem:
    """Tracking problem on [0, T] with parameter g0 anchoring the dynamics.

    The dynamics runs from alpha = y0 - B1 g0; the cost penalizes the
    pressure residual against ``target`` (nt x N samples, default zero) and
    the control in the boundary L2 norm.
    """

    sys: StateSystem
    y0: np.ndarray
    g0_param: np.ndarray
    T: float
    nt: int
    target: np.ndarray = None

    def __post_init__(self):
        if self.nt < 2:
            raise ValueError(f"nt must be >= 2, got {self.nt}")
        if self.target is not None:
            tgt = np.asarray(self.target, dtype=float)
            if tgt.shape != (self.nt, self.sys.n_nodes):
                raise ValueError(
                    f"target shape {tgt.shape} != ({self.nt}, {self.sys.n_nodes})")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    @property
    def alpha(self) -> np.ndarray:
        return np.asarray(self.y0, dtype=float) - self.sys.B1 @ np.asarray(
            self.g0_param, dtype=float)


@dataclass(frozen=True)
class OpenLoopSolution:
    g_opt: ControlSignal
    cost: float
    trajectory: Trajectory
    normal_residual: float
    condition_estimate: float = field(default=np.nan)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    d = np.diff(times)
    w[:-1] += d / 2.0
    w[1:] += d / 2.0
    return w


def cost(sys: StateSystem, trajectory: Trajectory, g: ControlSignal,
         target: np.ndarray = None) -> float:
    """Trapezoidal quadrature of |u - u_d|_{L2}^2 + |g|_{U}^2 over time."""
    if g.times.shape != trajectory.times.shape or not np.allclose(
            g.times, trajectory.times):
        raise ValueError("control and trajectory must share the time grid")
    u = trajectory.states[:, : sys.n_nodes]
    if target is not None:
        u = u - np.asarray(target, dtype=float)
    w = _trapezoid_weights(trajectory.times)
    state_term = np.einsum("k,ki,ij,kj->", w, u, sys.ops.M, u)
    ctrl_term = np.einsum("k,ki,ij,kj->", w, g.values, sys.Wu, g.values)
    return float(state_term + ctrl_term)


def _substep_dt(sys: StateSystem, grid_dt: float) -> float:
    """Integration step: a whole fraction of the grid spacing, stiff-safe."""
    dt_max = min(stable_dt(sys), grid_dt)
    n_sub = max(1, int(np.ceil(grid_dt / dt_max)))
    return grid_dt / n_sub


def solve_open_loop(p: LQProblem, cond_warn: float = 1e10) -> OpenLoopSolution:
    """Minimize the discrete quadratic cost over piecewise-linear controls.

    Builds the observed response of every control basis function, forms the
    normal equations in the weighted (time-quadrature x boundary-mass)
    geometry and solves them by Cholesky.
    """
    sys = p.sys
    times = p.times
    N, m, nt = sys.n_nodes, sys.n_control, p.nt
    grid_dt = times[1] - times[0]
    dt = _substep_dt(sys, grid_dt)
    wq = _trapezoid_weights(times)

    # free (control-independent) observed response from alpha
    alpha = p.alpha
    free = propagate_free(sys, alpha, p.T, dt)
    sel = _grid_indices(free.times, times)
    r0 = free.states[sel][:, :N]
    if p.target is not None:
        r0 = r0 - np.asarray(p.target, dtype=float)

    # observed responses of all nt*m basis controls, one sweep on a matrix
    # state: column (k, j) is the hat function at grid time k, channel j
    O = _basis_observations(sys, times, dt, sel)

    # normal equations in the weighted geometry: control Gram D, obs Gram Q
    Dw = np.kron(np.diag(wq), sys.Wu)
    MQ = np.kron(np.diag(wq), sys.ops.M)
    H = Dw + O.T @ MQ @ O
    rhs = -O.T @ MQ @ r0.reshape(-1)

    cond = float(np.linalg.cond(H))
    if cond > cond_warn:
        import warnings
        warnings.warn(f"normal equations poorly conditioned: cond ~ {cond:.3g}")
    cho = scipy.linalg.cho_factor(H)
    g_flat = scipy.linalg.cho_solve(cho, rhs)

    grad = H @ g_flat - rhs
    # gradient norm in the control geometry
    normal_residual = float(np.sqrt(grad @ scipy.linalg.solve(Dw, grad, assume_a="pos")))

    g_vals = g_flat.reshape(nt, m)
    g_opt = ControlSignal(times, g_vals)
    y0_run = alpha + sys.B1 @ g_vals[0]
    traj_fine = propagate_L2_control(sys, y0_run, g_opt, dt)
    traj = Trajectory(times, traj_fine.states[sel], "mild_L2")
    J = cost(sys, traj, g_opt, p.target)
    return OpenLoopSolution(g_opt=g_opt, cost=J, trajectory=traj,
                            normal_residual=normal_residual,
                            condition_estimate=cond)


def _grid_indices(fine_times: np.ndarray, grid_times: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(fine_times, grid_times)
    idx = np.clip(idx, 0, len(fine_times) - 1)
    if not np.allclose(fine_times[idx], grid_times, atol=1e-12 * max(1.0, grid_times[-1])):
        raise IntegrationError("integration grid does not contain the control grid")
    return idx


def _basis_observations(sys: StateSystem, times: np.ndarray, dt: float,
                        sel: np.ndarray) -> np.ndarray:
    """Observed u-block responses of all hat-function controls.

    Returns O with shape (nt*N, nt*m): column k*m+j holds the stacked
    pressure samples of the response to the control hat_k(t) e_j.
    """
    N, m, nt = sys.n_nodes, sys.n_control, len(times)
    A, Bhat = sys.A, sys.Bhat
    ncols = nt * m

    def hat_values(t: float) -> np.ndarray:
        """(m, ncols) matrix of all basis controls evaluated at t."""
        k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, nt - 2)
        w = (t - times[k]) / (times[k + 1] - times[k])
        G = np.zeros((m, ncols))
        G[:, k * m:(k + 1) * m] = (1.0 - w) * np.eye(m)
        G[:, (k + 1) * m:(k + 2) * m] = w * np.eye(m)
        return G

    # the pressure block of y = w + B1 g is w's first block: B1 only loads
    # the acceleration block, so the observation never sees B1 g directly
    n_fine = int(round((times[-1] - times[0]) / dt))
    fine = np.linspace(times[0], times[-1], n_fine + 1)
    Wmat = np.zeros((sys.n_state, ncols))
    O = np.zeros((nt * N, ncols))
    pos = 1 if sel[0] == 0 else 0
    for step in range(n_fine):
        t, h = fine[step], fine[step + 1] - fine[step]
        k1 = A @ Wmat + Bhat @ hat_values(t)
        k2 = A @ (Wmat + h / 2.0 * k1) + Bhat @ hat_values(t + h / 2.0)
        k3 = A @ (Wmat + h / 2.0 * k2) + Bhat @ hat_values(t + h / 2.0)
        k4 = A @ (Wmat + h * k3) + Bhat @ hat_values(t + h)
        Wmat = Wmat + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if pos < len(sel) and step + 1 == sel[pos]:
            O[pos * N:(pos + 1) * N, :] = Wmat[:N, :]
            pos += 1
    return O


def nonexistence_demo(sys: StateSystem, v: np.ndarray, n_max: int,
                      T: float = 1.0, nt: int = 256) -> dict:
    """Cost sequence exhibiting the singular (no-minimizer) phenomenon.

    With y0 = B1 v the ramp controls g_n(t) = v max(0, 1 - n t / T) satisfy
    g_n(0) = v and vanish in L2, and J(g_n) -> 0 while J(0) > 0: the
    unparametrized problem has no optimal control for such initial states.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    times = np.linspace(0.0, T, nt)
    grid_dt = times[1] - times[0]
    dt = _substep_dt(sys, grid_dt)
    y0 = sys.B1 @ v
    sel = None

    costs = []
    for n in range(1, n_max + 1):
        ramp = np.maximum(0.0, 1.0 - n * times / T)
        g = ControlSignal(times, np.outer(ramp, v))
        traj_fine = propagate_L2_control(sys, y0, g, dt)
        if sel is None:
            sel = _grid_indices(traj_fine.times, times)
        traj = Trajectory(times, traj_fine.states[sel], "mild_L2")
        costs.append(cost(sys, traj, g))

    free_fine = propagate_free(sys, y0, T, dt)
    free = Trajectory(times, free_fine.states[sel], "ode_smooth")
    J0 = cost(sys, free, ControlSignal.zero(times, len(v)))
    return {"n": np.arange(1, n_max + 1), "costs": np.array(costs), "J0": J0}
