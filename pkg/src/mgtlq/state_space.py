"""First-order state system for the boundary-controlled acoustic model.

The state is y = (u, u_t, u_tt) stacked nodally, the control acts through the
Gamma0 trace load.  All adjoints are weighted: the state space carries the
block inner product W = blockdiag(K+M, K+M, M) (discrete H1 x H1 x L2) and
the control space carries the Gamma0 boundary mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .mesh_fem import FemOperators


@dataclass(frozen=True)
class PhysicalParams:
    """Relaxation time tau, damping alpha, sound speed c, diffusivity b.

    gamma = alpha - c^2/b separates exponentially stable free dynamics
    (gamma > 0) from unstable ones; non-positive gamma is allowed for
    instability studies.
    """

    tau: float = 1.0
    alpha: float = 2.0
    c: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.c <= 0.0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.b <= 0.0:
            raise ValueError(f"b must be positive, got {self.b}")

    @property
    def gamma(self) -> float:
        return self.alpha - self.c**2 / self.b


@dataclass(frozen=True)
class StateSystem:
    """Dense state-space quadruple plus inner-product weights.

    A     : generator on (u, u_t, u_tt), shape (3N, 3N)
    B0,B1 : control input maps, shape (3N, m); B1 = (b/c^2) B0
    Bhat  : B0 + A B1 (composite input map of the derivative-free formulation)
    Robs  : observation map on the state space; ||Robs y||_Y = |y_1|_{L2}
    W     : state inner-product weight, blockdiag(K+M, K+M, M)
    Wu    : control inner-product weight (Gamma0 boundary mass)
    """

    ops: FemOperators
    params: PhysicalParams
    A: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    Bhat: np.ndarray
    Robs: np.ndarray
    W: np.ndarray
    Wu: np.ndarray
    n_nodes: int
    n_state: int
    n_control: int
    # Cholesky factor of W, cached for weighted solves
    _W_cho: tuple = field(default=None, repr=False)

    def solve_W(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._W_cho, rhs)

    def u_block(self, y: np.ndarray) -> np.ndarray:
        """First state block (acoustic pressure nodal values)."""
        return y[..., : self.n_nodes] if y.ndim > 1 else y[: self.n_nodes]


def assemble_system(ops: FemOperators, params: PhysicalParams) -> StateSystem:
    """Assemble the dense generator, input maps and weights."""
    M, K, M_g1, T0, Mg0 = ops.M, ops.K, ops.M_g1, ops.T0, ops.Mg0
    N = M.shape[0]
    m = T0.shape[1]
    tau, alpha, c, b = params.tau, params.alpha, params.c, params.b

    Minv = scipy.linalg.cho_factor(M)

    def msolve(X):
        return scipy.linalg.cho_solve(Minv, X)

    A = np.zeros((3 * N, 3 * N))
    A[:N, N:2 * N] = np.eye(N)
    A[N:2 * N, 2 * N:] = np.eye(N)
    A[2 * N:, :N] = -(c**2 / tau) * msolve(K)
    A[2 * N:, N:2 * N] = -(1.0 / tau) * msolve(b * K + c * M_g1)
    A[2 * N:, 2 * N:] = -(1.0 / tau) * (alpha * np.eye(N) + (b / c) * msolve(M_g1))

    B0 = np.zeros((3 * N, m))
    B0[2 * N:, :] = (c**2 / tau) * msolve(T0)
    B1 = (b / c**2) * B0
    Bhat = B0 + A @ B1

    W = scipy.linalg.block_diag(K + M, K + M, M)
    Wu = Mg0.copy()

    Robs = _observation_map(M, K, N)

    return StateSystem(
        ops=ops, params=params, A=A, B0=B0, B1=B1, Bhat=Bhat, Robs=Robs,
        W=W, Wu=Wu, n_nodes=N, n_state=3 * N, n_control=m,
        _W_cho=scipy.linalg.cho_factor(W),
    )


def _observation_map(M: np.ndarray, K: np.ndarray, N: int) -> np.ndarray:
    """Observation acting as C^{-1/2} on the first block, C = M^{-1}(K+M).

    With the H1 weight K+M on the first block this gives exactly
    ||Robs y||_Y^2 = y_1^T M y_1: the observed quantity is the pressure in
    the L2 norm.  Built from the generalized eigenproblem (K+M) v = lam M v.
    """
    lam, V = scipy.linalg.eigh(K + M, M)   # V^T M V = I, V^T (K+M) V = diag(lam)
    S = V @ np.diag(lam ** -0.5) @ V.T @ M
    R = np.zeros((3 * N, 3 * N))
    R[:N, :N] = S
    return R


def y_inner(sys: StateSystem, y: np.ndarray, w: np.ndarray) -> float:
    """State-space inner product (y, w)_Y = y^T W w."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if y.shape != (sys.n_state,) or w.shape != (sys.n_state,):
        raise ValueError(f"state vectors must have shape ({sys.n_state},)")
    return float(y @ sys.W @ w)


def u_inner(sys: StateSystem, g: np.ndarray, h: np.ndarray) -> float:
    """Control-space inner product (g, h)_U = g^T Wu h."""
    return float(np.asarray(g) @ sys.Wu @ np.asarray(h))


def adjoint(sys: StateSystem, Op: np.ndarray, domain: str = "Y",
            codomain: str = "Y") -> np.ndarray:
    """Weighted adjoint of ``Op`` mapping ``domain`` -> ``codomain``.

    Spaces: "Y" (state, weight W) or "U" (control, weight Wu).  The adjoint
    maps codomain -> domain and satisfies (Op x, z)_cod = (x, Op* z)_dom.
    """
    weights = {"Y": sys.W, "U": sys.Wu}
    try:
        Wd, Wc = weights[domain], weights[codomain]
    except KeyError as exc:
        raise ValueError(f"unknown space {exc}; expected 'Y' or 'U'") from exc
    return scipy.linalg.solve(Wd, Op.T @ Wc, assume_a="pos")


def structural_report(sys: StateSystem, n_probes: int = 100, seed: int = 0) -> dict:
    """Check the structural operator identities on the assembled system.

    Returns a dict with the four residuals and a global pass flag:
      (i)   ||Robs B1|| (structurally zero)
      (ii)  ||B1 - (b/c^2) B0||
      (iii) max over random probes of | ||Robs A^2 y||_Y^2 / (y3^T M y3) - 1 |
      (iv)  ||K 1|| (constants in the stiffness kernel)
    """
    rng = np.random.default_rng(seed)
    N = sys.n_nodes

    res_rb1 = float(np.abs(sys.Robs @ sys.B1).max()) if sys.B1.size else 0.0
    res_b1 = float(np.abs(sys.B1 - (sys.params.b / sys.params.c**2) * sys.B0).max())

    A2 = sys.A @ sys.A
    worst = 0.0
    for _ in range(n_probes):
        y = rng.standard_normal(sys.n_state)
        y3 = y[2 * N:]
        ra2y = sys.Robs @ (A2 @ y)
        lhs = float(ra2y @ sys.W @ ra2y)
        rhs = float(y3 @ sys.ops.M @ y3)
        worst = max(worst, abs(lhs / rhs - 1.0))
    # the identity at the zero case: y3 = 0 forces Robs A^2 y = 0
    y = rng.standard_normal(sys.n_state)
    y[2 * N:] = 0.0
    zero_case = float(np.linalg.norm(sys.Robs @ (A2 @ y)))

    ones = np.ones(N)
    res_kernel = float(np.linalg.norm(sys.ops.K @ ones, np.inf))

    checks = {
        "robs_b1": res_rb1,
        "b1_scaling": res_b1,
        "ra2_identity": worst,
        "ra2_zero_case": zero_case,
        "stiffness_kernel": res_kernel,
    }
    tol = {"robs_b1": 0.0, "b1_scaling": 0.0, "ra2_identity": 1e-10,
           "ra2_zero_case": 1e-10, "stiffness_kernel": 1e-10}
    failures = [k for k, v in checks.items() if v > tol[k]]
    return {**checks, "passed": not failures, "failures": failures}


def dump_system(sys: StateSystem, outdir, prefix: str = "system") -> list:
    """Dump A, B0, B1, W, Wu in the triplet text format; returns file paths."""
    from pathlib import Path
    from .mesh_fem import dump_matrix_triplets

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, mat in (("A", sys.A), ("B0", sys.B0), ("B1", sys.B1),
                      ("W", sys.W), ("Wu", sys.Wu)):
        path = outdir / f"{prefix}_{name}.txt"
        dump_matrix_triplets(mat, path, name=name)
        written.append(path)
    return written
