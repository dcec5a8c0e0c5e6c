"""Backward integration of the non-standard differential Riccati equation.

The equation for the optimal-cost operator P(t), written in the weighted
(state inner product) calculus, is

    dP/dt = -(A* P + P A + R* R - P Bhat Bhat* P),    P(T) = 0,

where every star is the W- or Wu-weighted adjoint and Bhat = B0 + A B1, so
the quadratic term carries the composite gain (B0* + B1* A*) P.  Integration
uses the same fixed-step 4th-order scheme as the propagators, with a
W-symmetrization after every step (symmetry drift is the dominant failure
mode of dense Riccati integration).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .propagate import spectral_radius
from .state_space import StateSystem


class RiccatiError(RuntimeError):
    """Integration failure or loss of the structural properties of P."""


SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class RiccatiSolution:
    """Snapshots of P(t) on an increasing grid, with gain and G(t) logs.

    P is W-self-adjoint at each stored time and P(T) = 0 exactly.  Pdot
    stores the equation right-hand side at the stored times, which makes the
    interpolation between snapshots cubic Hermite (same order as the
    integrator).
    """

    times: np.ndarray            # increasing, times[-1] = T
    P: np.ndarray                # (ns, n, n)
    Pdot: np.ndarray             # (ns, n, n) equation RHS at stored times
    gains: np.ndarray            # (ns, m, n) composite gain Bhat* P(t)
    G_cond: np.ndarray           # (ns,) condition estimate of G(t)
    G_smin: np.ndarray           # (ns,) smallest singular value of G(t)
    residual_log: np.ndarray     # (ns,) weak-form equation residuals
    symmetry_drift: float

    def P_at(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolation of P between snapshots."""
        tg = self.times
        if t <= tg[0]:
            return self.P[0]
        if t >= tg[-1]:
            return self.P[-1]
        k = int(np.searchsorted(tg, t, side="right") - 1)
        h = tg[k + 1] - tg[k]
        s = (t - tg[k]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s**2 * (3 - 2 * s)
        h11 = s**2 * (s - 1)
        return (h00 * self.P[k] + h * h10 * self.Pdot[k]
                + h01 * self.P[k + 1] + h * h11 * self.Pdot[k + 1])


def _weighted_ops(sys: StateSystem):
    """A*, R*R and Bhat Bhat* as plain matrices in state coordinates."""
    W, Wu = sys.W, sys.Wu
    Astar = scipy.linalg.solve(W, sys.A.T @ W, assume_a="pos")
    # R*R from the observation map itself; the residual audit rebuilds the
    # same weight directly from the mass matrix as an independent check
    RstarR = sys.solve_W(sys.Robs.T @ W @ sys.Robs)
    BWuBt = sys.Bhat @ scipy.linalg.solve(Wu, sys.Bhat.T @ W, assume_a="pos")
    return Astar, RstarR, BWuBt


def gain(sys: StateSystem, P_t: np.ndarray) -> np.ndarray:
    """Composite gain Bhat* P = (B0* + B1* A*) P, mapping state -> U."""
    return scipy.linalg.solve(sys.Wu, sys.Bhat.T @ (sys.W @ P_t), assume_a="pos")


def G_operator(sys: StateSystem, P_t: np.ndarray,
               singular_threshold: float = 1e12):
    """Feedback-closure operator G = I - (Bhat* P) B1 on U, with conditioning.

    Raises when G is numerically singular: bounded invertibility of G is a
    structural property of the synthesis, so a singular G is a finding to be
    reported, never patched.
    """
    KB1 = gain(sys, P_t) @ sys.B1
    G = np.eye(sys.n_control) - KB1
    svals = np.linalg.svd(G, compute_uv=False)
    smin, smax = float(svals.min()), float(svals.max())
    # the condition number alone misses exact cancellation at low control
    # dimension, so also compare smin against the cancellation scale
    scale = 1.0 + float(np.abs(KB1).max())
    if smin * singular_threshold < scale or smax / smin > singular_threshold:
        raise RiccatiError(
            f"feedback-closure operator near singular "
            f"(smin = {smin:.3g} at scale {scale:.3g})")
    return G, smax / smin, smin


def _w_adjoint(sys: StateSystem, P: np.ndarray) -> np.ndarray:
    return sys.solve_W(P.T @ sys.W)


def riccati_residual(sys: StateSystem, P_t: np.ndarray, Pdot_t: np.ndarray,
                     n_probes: int = 20, seed: int = 7) -> float:
    """Normalized weak-form residual of the equation at one time.

    sup over random probe pairs of
    |(Pdot y, w) + (Ay, Pw) + (Py, Aw) + (Ry, Rw) - (Bhat*Py, Bhat*Pw)_U|
    divided by the probe Y-norms.
    """
    W, Wu, A = sys.W, sys.Wu, sys.A
    N = sys.n_nodes
    Q = np.zeros_like(W)
    Q[:N, :N] = sys.ops.M
    WBhat = W @ sys.Bhat
    K = scipy.linalg.solve(Wu, WBhat.T @ P_t, assume_a="pos")   # Bhat* P
    E = (Pdot_t.T @ W + A.T @ W @ P_t + P_t.T @ W @ A + Q
         - (K.T @ Wu @ K))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        y = rng.standard_normal(sys.n_state)
        w = rng.standard_normal(sys.n_state)
        num = abs(y @ E @ w)
        den = np.sqrt(y @ W @ y) * np.sqrt(w @ W @ w)
        worst = max(worst, num / den)
    return float(worst)


def solve_dre(sys: StateSystem, T: float, dt: float = None,
              store_stride: int = 1, symmetry_tol: float = SYMMETRY_TOL,
              n_probes: int = 20) -> RiccatiSolution:
    """Integrate the Riccati equation backward from P(T) = 0.

    ``dt`` defaults to a stiff-safe spectral-radius heuristic (the Lyapunov
    part of the flow doubles the spectral radius of A).  Snapshots are stored
    every ``store_stride`` steps.
    """
    if dt is None:
        dt = 1.25 / spectral_radius(sys.A)
    if dt <= 0.0:
        raise RiccatiError(f"dt must be positive, got {dt}")
    n_steps = max(1, int(round(T / dt)))
    # uniform snapshot spacing keeps the finite-difference audit stencils valid
    n_steps = store_stride * int(np.ceil(n_steps / store_stride))
    dt = T / n_steps

    Astar, RstarR, BWuBt = _weighted_ops(sys)

    def rhs_backward(P):
        # d/ds P(T - s): sign-flipped equation right-hand side
        return Astar @ P + P @ sys.A + RstarR - P @ BWuBt @ P

    P = np.zeros((sys.n_state, sys.n_state))
    stored = [P.copy()]
    s_times = [0.0]
    max_drift = 0.0
    for k in range(n_steps):
        k1 = rhs_backward(P)
        k2 = rhs_backward(P + dt / 2.0 * k1)
        k3 = rhs_backward(P + dt / 2.0 * k2)
        k4 = rhs_backward(P + dt * k3)
        P = P + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(P).all():
            raise RiccatiError(
                f"step instability at t = {T - (k + 1) * dt:.6g} "
                f"(spectral-radius*dt = {spectral_radius(sys.A) * dt:.3g})")
        Padj = _w_adjoint(sys, P)
        norm = np.linalg.norm(P)
        drift = np.linalg.norm(P - Padj) / max(norm, 1e-300)
        if norm > 1e-12 and drift > symmetry_tol:
            raise RiccatiError(
                f"W-symmetry drift {drift:.3g} beyond tolerance at "
                f"t = {T - (k + 1) * dt:.6g}")
        max_drift = max(max_drift, drift if norm > 1e-12 else 0.0)
        P = 0.5 * (P + Padj)
        if (k + 1) % store_stride == 0:
            stored.append(P.copy())
            s_times.append((k + 1) * dt)

    # reverse to increasing physical time
    s_times = np.array(s_times)
    times = T - s_times[::-1]
    P_arr = np.array(stored[::-1])
    Pdot_arr = np.array([-rhs_backward(Pk) for Pk in P_arr])

    ns = len(times)
    gains = np.empty((ns, sys.n_control, sys.n_state))
    G_cond = np.empty(ns)
    G_smin = np.empty(ns)
    residuals = np.empty(ns)
    for i in range(ns):
        gains[i] = gain(sys, P_arr[i])
        _, G_cond[i], G_smin[i] = G_operator(sys, P_arr[i])
        residuals[i] = riccati_residual(sys, P_arr[i], _fd_derivative(P_arr, times, i),
                                        n_probes=n_probes)

    return RiccatiSolution(times=times, P=P_arr, Pdot=Pdot_arr, gains=gains,
                           G_cond=G_cond, G_smin=G_smin,
                           residual_log=residuals, symmetry_drift=max_drift)


def _fd_derivative(P_arr: np.ndarray, times: np.ndarray, i: int) -> np.ndarray:
    """4th-order finite-difference dP/dt at stored index i (uniform grid).

    Used for the residual audit so the time derivative entering the check is
    independent of the equation right-hand side.
    """
    ns = len(times)
    h = times[1] - times[0]
    if ns < 5:
        # fall back to low-order differences on very coarse storage
        if i == 0:
            return (P_arr[1] - P_arr[0]) / h
        if i == ns - 1:
            return (P_arr[-1] - P_arr[-2]) / h
        return (P_arr[i + 1] - P_arr[i - 1]) / (2 * h)
    if i < 2:
        sten = P_arr[:5]
        coef = {
            0: np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
            1: np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0,
        }[i]
    elif i > ns - 3:
        sten = P_arr[-5:]
        coef = {
            ns - 2: -np.array([-3.0, -10.0, 18.0, -6.0, 1.0])[::-1] / 12.0,
            ns - 1: -np.array([-25.0, 48.0, -36.0, 16.0, -3.0])[::-1] / 12.0,
        }[i]
    else:
        sten = P_arr[i - 2:i + 3]
        coef = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    return np.einsum("s,sij->ij", coef, sten) / h
