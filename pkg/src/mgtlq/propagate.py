"""Time integration of the free, controlled and auxiliary-variable dynamics.

All propagators use the classical fixed-step 4th-order Runge-Kutta method.
Control samples are interpolated piecewise-linearly in time inside the steps;
where a jump convention matters (merely square-integrable controls) samples
are taken left-continuous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .state_space import StateSystem

#: RK4 stays stable for spectral-radius * dt up to roughly 2.8 on the
#: imaginary axis; keep a margin below that.
RK4_STABILITY_MARGIN = 2.5


class IntegrationError(RuntimeError):
    """Blow-up or mis-specified integration."""


@dataclass(frozen=True)
class ControlSignal:
    """Time-sampled boundary control on Gamma0.

    values has shape (nt, m); derivative, when present, matches it.  The
    anchor g0 is the value used for g(0) in the parametrized (derivative
    free) formulation; it defaults to values[0].
    """

    times: np.ndarray
    values: np.ndarray
    derivative: np.ndarray = None
    g0_anchor: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[0] != t.shape[0]:
            raise ValueError(f"{v.shape[0]} value rows for {t.shape[0]} times")
        if t[0] != 0.0:
            raise ValueError("control grid must start at t=0")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("control times must be strictly increasing")
        if self.derivative is not None:
            d = np.atleast_2d(np.asarray(self.derivative, dtype=float))
            if d.shape != v.shape:
                raise ValueError("derivative shape must match values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if self.derivative is not None:
            object.__setattr__(
                self, "derivative",
                np.atleast_2d(np.asarray(self.derivative, dtype=float)))

    @property
    def anchor(self) -> np.ndarray:
        if self.g0_anchor is not None:
            return np.asarray(self.g0_anchor, dtype=float)
        return self.values[0]

    def at(self, t: float, channel: str = "values") -> np.ndarray:
        """Piecewise-linear sample (left-continuous at grid jumps)."""
        data = self.values if channel == "values" else self.derivative
        tg = self.times
        if t <= tg[0]:
            return data[0]
        if t >= tg[-1]:
            return data[-1]
        k = int(np.searchsorted(tg, t, side="right") - 1)
        w = (t - tg[k]) / (tg[k + 1] - tg[k])
        return (1.0 - w) * data[k] + w * data[k + 1]

    @staticmethod
    def zero(times: np.ndarray, m: int) -> "ControlSignal":
        times = np.asarray(times, dtype=float)
        z = np.zeros((len(times), m))
        return ControlSignal(times, z, derivative=z.copy())


class AnalyticControl:
    """Control defined by callables, evaluated exactly at integrator stages.

    Sampled piecewise-linear controls limit cross-formulation agreement to
    the sampling order; analytic controls keep it at the integrator's order.
    Duck-types the ControlSignal interface the propagators rely on.
    """

    def __init__(self, T: float, func, dfunc=None, m: int = 1, n_samples: int = 65):
        self.times = np.linspace(0.0, T, n_samples)
        self._func = func
        self._dfunc = dfunc
        self.values = np.array([np.atleast_1d(func(t)) for t in self.times])
        self.derivative = (np.array([np.atleast_1d(dfunc(t)) for t in self.times])
                           if dfunc is not None else None)
        self.g0_anchor = None

    @property
    def anchor(self) -> np.ndarray:
        return np.atleast_1d(self._func(0.0))

    def at(self, t: float, channel: str = "values") -> np.ndarray:
        if channel == "values":
            return np.atleast_1d(self._func(t))
        return np.atleast_1d(self._dfunc(t))


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled state (u, u_t, u_tt) with a formulation tag."""

    times: np.ndarray
    states: np.ndarray       # (nt, n_state)
    formulation_tag: str

    def max_norm_gap(self, other: "Trajectory") -> float:
        if self.states.shape != other.states.shape:
            raise ValueError("trajectories sampled on different grids")
        return float(np.abs(self.states - other.states).max())


def spectral_radius(A: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(A)).max())


def stable_dt(sys: StateSystem, margin: float = RK4_STABILITY_MARGIN) -> float:
    """Step-size heuristic dt <= margin / rho(A)."""
    return margin / spectral_radius(sys.A)


def _time_grid(T: float, dt: float) -> np.ndarray:
    if dt <= 0.0:
        raise IntegrationError(f"dt must be positive, got {dt}")
    if T < dt:
        raise IntegrationError(f"horizon T={T} shorter than dt={dt}")
    n_steps = int(round(T / dt))
    return np.linspace(0.0, n_steps * dt, n_steps + 1)


def _rk4_sweep(rhs, y0: np.ndarray, times: np.ndarray, sys: StateSystem) -> np.ndarray:
    """Fixed-step RK4 with a norm blow-up guard."""
    out = np.empty((len(times), len(y0)))
    out[0] = y0
    guard = 1e12 * (1.0 + np.linalg.norm(y0))
    y = y0.astype(float).copy()
    for k in range(len(times) - 1):
        t, dt = times[k], times[k + 1] - times[k]
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2.0, y + dt / 2.0 * k1)
        k3 = rhs(t + dt / 2.0, y + dt / 2.0 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y).all() or np.linalg.norm(y) > guard:
            rho_dt = spectral_radius(sys.A) * dt
            raise IntegrationError(
                f"norm blow-up at t={times[k + 1]:.6g}; "
                f"spectral-radius*dt = {rho_dt:.3g} "
                f"(RK4 margin {RK4_STABILITY_MARGIN})")
        out[k + 1] = y
    return out


def propagate_free(sys: StateSystem, y0: np.ndarray, T: float, dt: float) -> Trajectory:
    """Integrate the free dynamics y' = A y."""
    times = _time_grid(T, dt)
    A = sys.A
    states = _rk4_sweep(lambda t, y: A @ y, np.asarray(y0, dtype=float), times, sys)
    return Trajectory(times, states, "ode_smooth")


def propagate_smooth_control(sys: StateSystem, y0: np.ndarray, g: ControlSignal,
                             dt: float, fd_tol: float = None) -> Trajectory:
    """Integrate y' = A y + B0 g + B1 g_t (needs the derivative channel).

    When ``fd_tol`` is given, the declared derivative is checked against
    finite differences of the samples to that tolerance.
    """
    if g.derivative is None:
        raise IntegrationError(
            "control has no derivative channel; the smooth (H1) formulation "
            "needs g_t -- use propagate_L2_control for L2 controls")
    if fd_tol is not None and len(g.times) >= 3:
        fd = np.gradient(g.values, g.times, axis=0)
        gap = np.abs(fd - g.derivative).max()
        if gap > fd_tol:
            raise IntegrationError(
                f"derivative channel disagrees with finite differences "
                f"({gap:.3g} > {fd_tol:.3g})")
    times = _time_grid(g.times[-1], dt)
    A, B0, B1 = sys.A, sys.B0, sys.B1

    def rhs(t, y):
        return A @ y + B0 @ g.at(t) + B1 @ g.at(t, "derivative")

    states = _rk4_sweep(rhs, np.asarray(y0, dtype=float), times, sys)
    return Trajectory(times, states, "ode_smooth")


def propagate_L2_control(sys: StateSystem, y0: np.ndarray, g: ControlSignal,
                         dt: float) -> Trajectory:
    """Derivative-free formulation, valid for square-integrable controls.

    Integrates w' = A w + Bhat g from w(0) = y0 - B1 g(0) and reconstructs
    y(t) = w(t) + B1 g(t).  The control value at t=0 is the declared anchor.
    """
    times = _time_grid(g.times[-1], dt)
    A, Bhat, B1 = sys.A, sys.Bhat, sys.B1
    w0 = np.asarray(y0, dtype=float) - B1 @ g.anchor

    def rhs(t, w):
        return A @ w + Bhat @ g.at(t)

    w_states = _rk4_sweep(rhs, w0, times, sys)
    g_samples = np.array([g.at(t) for t in times])
    states = w_states + g_samples @ B1.T
    return Trajectory(times, states, "mild_L2")


def propagate_z_system(sys: StateSystem, u0: np.ndarray, u1: np.ndarray,
                       u2: np.ndarray, T: float, dt: float) -> Trajectory:
    """Uncontrolled dynamics via the auxiliary variable z = u_t + (c^2/b) u.

    Integrates the coupled (u, z, z_t) system and converts back to
    (u, u_t, u_tt).  Equivalent to the free dynamics for any tau after
    normalizing the equation by tau, with damping threshold alpha/tau - c^2/b.
    """
    p = sys.params
    if p.b == 0.0:
        raise IntegrationError("z-system transformation undefined for b = 0")
    r = p.c**2 / p.b
    gam = p.alpha / p.tau - r
    N = sys.n_nodes
    M, K, M_g1 = sys.ops.M, sys.ops.K, sys.ops.M_g1
    Minv = scipy.linalg.cho_factor(M)
    AK = scipy.linalg.cho_solve(Minv, K)          # discrete Laplacian
    AM1 = scipy.linalg.cho_solve(Minv, M_g1)      # absorbing boundary term

    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    z0 = u1 + r * u0
    zt0 = u2 + r * u1
    x0 = np.concatenate([u0, z0, zt0])
    times = _time_grid(T, dt)

    def rhs(t, x):
        u, z, zt = x[:N], x[N:2 * N], x[2 * N:]
        utt = zt - r * z + r**2 * u
        du = -r * u + z
        dz = zt
        dzt = -(p.b / p.tau) * (AK @ z) - (p.b / (p.c * p.tau)) * (AM1 @ zt) - gam * utt
        return np.concatenate([du, dz, dzt])

    x_states = _rk4_sweep(rhs, x0, times, sys)
    u = x_states[:, :N]
    z = x_states[:, N:2 * N]
    zt = x_states[:, 2 * N:]
    ut = z - r * u
    utt = zt - r * z + r**2 * u
    states = np.hstack([u, ut, utt])
    return Trajectory(times, states, "z_system")


def spectrum(sys: StateSystem) -> dict:
    """Eigenvalues of A, spectral abscissa excluding the constant-kernel mode.

    The generator annihilates (const, 0, 0); that structural zero eigenvalue
    is excluded from the reported abscissa.
    """
    try:
        eigvals = np.linalg.eigvals(sys.A)
    except np.linalg.LinAlgError as exc:
        raise IntegrationError(f"eigenvalue solver failed: {exc}") from exc
    kernel_idx = int(np.argmin(np.abs(eigvals)))
    rest = np.delete(eigvals, kernel_idx)
    return {
        "eigenvalues": eigvals,
        "kernel_eigenvalue": complex(eigvals[kernel_idx]),
        "abscissa": float(rest.real.max()),
        "spectral_radius": float(np.abs(eigvals).max()),
    }
