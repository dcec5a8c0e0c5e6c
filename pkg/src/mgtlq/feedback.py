"""Closed-loop synthesis, initial-value matching and parameter optimization.

The closed loop propagates the shifted variable w = y - B1 g, which obeys
the clean equation w' = A w + Bhat g; the physical state is reconstructed
algebraically as y = w + B1 g.  Both synthesis forms are evaluated on every
run -- the direct one g = -(Bhat* P) w and the implicit one
g = -G(t)^{-1} (Bhat* P) y -- and their gap is recorded as a health metric:
they are algebraically identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lq_oracle import cost
from .propagate import ControlSignal, Trajectory, _time_grid
from .riccati import RiccatiError, RiccatiSolution, gain
from .state_space import StateSystem


@dataclass(frozen=True)
class ClosedLoopRun:
    trajectory: Trajectory       # physical state y, tag closed_loop
    control: ControlSignal       # synthesized control
    w_trajectory: Trajectory     # shifted dynamics w = y - B1 g
    cost: float
    consistency_gap: float       # max_t |g_implicit - g_direct|_U


@dataclass(frozen=True)
class G0Optimum:
    g_star: np.ndarray
    classification: str          # "interior_stationary" or "boundary"
    value: float                 # (P(0)(y0 - B1 g*), y0 - B1 g*)_Y
    kernel_residual: float       # |B1* P(0) (y0 - B1 g*)|_U
    g_norm: float                # |g*|_U


def closed_loop(sys: StateSystem, ric: RiccatiSolution, y0: np.ndarray,
                g0: np.ndarray, dt: float, t0: float = 0.0) -> ClosedLoopRun:
    """Run the feedback loop from (y0, g0) over [t0, T].

    The loop is anchored at alpha = y0 - B1 g0 and driven by the
    time-varying gain from the Riccati snapshots.
    """
    T = ric.times[-1]
    if t0 < ric.times[0] - 1e-12 or t0 >= T:
        raise ValueError(f"start time {t0} outside Riccati coverage "
                         f"[{ric.times[0]}, {T})")
    times = t0 + _time_grid(T - t0, dt)
    A, Bhat, B1, Wu = sys.A, sys.Bhat, sys.B1, sys.Wu
    g0 = np.atleast_1d(np.asarray(g0, dtype=float))
    alpha = np.asarray(y0, dtype=float) - B1 @ g0

    def gain_at(t):
        return gain(sys, ric.P_at(t))

    def rhs(t, w):
        return A @ w - Bhat @ (gain_at(t) @ w)

    w = alpha.copy()
    w_states = np.empty((len(times), sys.n_state))
    g_vals = np.empty((len(times), sys.n_control))
    gap = 0.0
    max_g = 0.0
    for k, t in enumerate(times):
        w_states[k] = w
        Kt = gain_at(t)
        g_direct = -Kt @ w
        y = w + B1 @ g_direct
        KtB1 = Kt @ B1
        G = np.eye(sys.n_control) - KtB1
        svals = np.linalg.svd(G, compute_uv=False)
        scale = 1.0 + float(np.abs(KtB1).max())
        if svals.min() * 1e12 < scale or svals.max() / svals.min() > 1e12:
            raise RiccatiError(
                f"feedback-closure operator near singular at t = {t:.6g}")
        g_implicit = -scipy.linalg.solve(G, Kt @ y)
        diff = g_implicit - g_direct
        gap = max(gap, float(np.sqrt(diff @ Wu @ diff)))
        max_g = max(max_g, float(np.sqrt(g_direct @ Wu @ g_direct)))
        g_vals[k] = g_direct
        if k < len(times) - 1:
            h = times[k + 1] - t
            k1 = rhs(t, w)
            k2 = rhs(t + h / 2.0, w + h / 2.0 * k1)
            k3 = rhs(t + h / 2.0, w + h / 2.0 * k2)
            k4 = rhs(t + h, w + h * k3)
            w = w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    y_states = w_states + g_vals @ B1.T
    rel_times = times - t0   # ControlSignal grids start at zero
    control = ControlSignal(rel_times, g_vals)
    traj = Trajectory(times, y_states, "closed_loop")
    w_traj = Trajectory(times, w_states, "closed_loop")
    J = cost(sys, Trajectory(rel_times, y_states, "closed_loop"), control)
    return ClosedLoopRun(trajectory=traj, control=control, w_trajectory=w_traj,
                         cost=J, consistency_gap=gap)


def match_g0(sys: StateSystem, ric: RiccatiSolution, y0: np.ndarray,
             verify_dt: float = None) -> np.ndarray:
    """Parameter g0 making the synthesized control continuous at t = 0.

    With F = Bhat* P(0) the matching condition g(0) = g0 reads
    (I - F B1) g0 = -F y0: the synthesis gives g(0) = -F (y0 - B1 g0).
    (The sign of the right-hand side is fixed by verifying g(0) = g0 on the
    actual closed loop; the statement-level formula with the opposite sign
    fails that verification.)
    """
    F = gain(sys, ric.P_at(0.0))
    Mmatch = np.eye(sys.n_control) - F @ sys.B1
    y0 = np.asarray(y0, dtype=float)
    try:
        g0 = scipy.linalg.solve(Mmatch, -F @ y0)
    except scipy.linalg.LinAlgError as exc:
        raise RiccatiError(f"matching operator singular: {exc}") from exc
    if verify_dt is not None:
        run = closed_loop(sys, ric, y0, g0, verify_dt)
        gap = np.linalg.norm(run.control.values[0] - g0)
        if gap > 1e-6 * (1.0 + np.linalg.norm(g0)):
            raise RiccatiError(
                f"matching verification failed: |g(0) - g0| = {gap:.3g}")
    return g0


def optimize_g0(sys: StateSystem, ric: RiccatiSolution, y0: np.ndarray,
                radius: float) -> G0Optimum:
    """Minimize (P(0)(y0 - B1 g0), y0 - B1 g0)_Y over |g0|_U <= radius.

    The objective is a positive-semidefinite quadratic in g0; interior
    minimizers satisfy the kernel condition B1* P(0) (y0 - B1 g*) = 0,
    otherwise the minimizer sits on the ball boundary (trust-region
    subproblem in the control geometry).
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    y0 = np.asarray(y0, dtype=float)
    P0 = ric.P_at(0.0)
    WP = sys.W @ P0
    WP = 0.5 * (WP + WP.T)          # W-self-adjoint P makes W P symmetric
    B1 = sys.B1
    H = B1.T @ WP @ B1
    H = 0.5 * (H + H.T)
    c = B1.T @ (WP @ y0)

    # move to the Euclidean geometry x = Lu^T g with Wu = Lu Lu^T
    Lu = np.linalg.cholesky(sys.Wu)
    Ht = scipy.linalg.solve_triangular(
        Lu, scipy.linalg.solve_triangular(Lu, H, lower=True).T, lower=True)
    Ht = 0.5 * (Ht + Ht.T)
    ct = scipy.linalg.solve_triangular(Lu, c, lower=True)

    lam, Q = np.linalg.eigh(Ht)
    beta = Q.T @ ct
    lam_tol = max(lam.max(), 0.0) * 1e-12 + 1e-300

    # unconstrained (min-norm) stationary point; c lies in range(H)
    x_free = Q @ np.where(lam > lam_tol, beta / np.maximum(lam, lam_tol), 0.0)
    if np.linalg.norm(x_free) <= radius * (1.0 + 1e-12):
        x_star = x_free
        classification = "interior_stationary"
    else:
        # secular equation: |x(mu)|^2 = sum beta_i^2/(lam_i+mu)^2 = radius^2
        def xnorm(mu):
            return np.sqrt(np.sum((beta / (lam + mu)) ** 2))

        lo, hi = 0.0, 1.0
        while xnorm(hi) > radius:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if xnorm(mid) > radius:
                lo = mid
            else:
                hi = mid
        mu = 0.5 * (lo + hi)
        x_star = Q @ (beta / (lam + mu))
        x_star *= radius / np.linalg.norm(x_star)   # land on the boundary exactly
        classification = "boundary"

    g_star = scipy.linalg.solve_triangular(Lu.T, x_star, lower=False)
    alpha_star = y0 - B1 @ g_star
    value = float(alpha_star @ sys.W @ P0 @ alpha_star)
    resid_vec = c - H @ g_star       # equals Wu (B1* P(0) alpha*)
    kres_vec = scipy.linalg.solve(sys.Wu, resid_vec, assume_a="pos")
    kernel_residual = float(np.sqrt(kres_vec @ sys.Wu @ kres_vec))
    g_norm = float(np.sqrt(g_star @ sys.Wu @ g_star))
    return G0Optimum(g_star=g_star, classification=classification,
                     value=value, kernel_residual=kernel_residual,
                     g_norm=g_norm)


def value_at(sys: StateSystem, ric: RiccatiSolution, y0: np.ndarray,
             g0: np.ndarray) -> float:
    """Optimal cost (P(0) alpha, alpha)_Y for alpha = y0 - B1 g0."""
    alpha = np.asarray(y0, dtype=float) - sys.B1 @ np.atleast_1d(
        np.asarray(g0, dtype=float))
    return float(alpha @ sys.W @ ric.P_at(0.0) @ alpha)
