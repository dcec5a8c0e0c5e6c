"""Spatial discretization: meshes, P1 Galerkin matrices, boundary maps.

The domain is the unit interval (1D) or the unit square (2D, uniform
triangulation).  The boundary is split in two disjoint parts: the controlled
part Gamma0 and the absorbing part Gamma1.  All operators are assembled with
consistent (non-lumped) P1 quadrature so that the discrete trace identities
hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class MeshError(ValueError):
    """Invalid mesh specification or degenerate geometry."""


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh of the unit interval or unit square.

    ``gamma0_nodes`` and ``gamma1_nodes`` partition the boundary nodes;
    the two sets never intersect.
    """

    dimension: int
    nodes: np.ndarray            # (N,) in 1D, (N, 2) in 2D
    elements: np.ndarray         # (ne, 2) segments or (ne, 3) triangles
    gamma0_nodes: np.ndarray     # indices of controlled boundary nodes
    gamma1_nodes: np.ndarray     # indices of absorbing boundary nodes
    # boundary facets (2D only): (nf, 2) node pairs per boundary part
    gamma0_facets: np.ndarray = field(default=None, repr=False)
    gamma1_facets: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def validate(self) -> None:
        g0 = set(self.gamma0_nodes.tolist())
        g1 = set(self.gamma1_nodes.tolist())
        if g0 & g1:
            raise MeshError(f"Gamma0 and Gamma1 overlap on nodes {sorted(g0 & g1)}")
        if not g0:
            raise MeshError("Gamma0 is empty")
        if not g1:
            raise MeshError("Gamma1 is empty")


@dataclass(frozen=True)
class FemOperators:
    """Assembled P1 operators for one mesh.

    M     : consistent mass matrix (L2 inner product)
    K     : stiffness matrix (discrete -Laplacian, natural Neumann BC)
    M_g1  : boundary mass on Gamma1, full-size with support on Gamma1 nodes
    T0    : Gamma0 trace-load map, shape (N, |Gamma0|); column j is the load
            vector of the j-th Gamma0 nodal hat function
    T1    : Gamma1 trace-load map, shape (N, |Gamma1|)
    Mg0   : boundary mass on Gamma0 (control-space inner product)
    """

    mesh: Mesh
    M: np.ndarray
    K: np.ndarray
    M_g1: np.ndarray
    T0: np.ndarray
    T1: np.ndarray
    Mg0: np.ndarray


_EDGE_SELECTORS_2D = ("left edge", "right edge", "bottom edge", "top edge")


def build_mesh(dimension: int, resolution: int, gamma0_spec: str = "default") -> Mesh:
    """Build a uniform mesh with a Gamma0/Gamma1 boundary partition.

    ``resolution`` is the element count per axis.  In 1D the default spec puts
    Gamma0 at x=0 and Gamma1 at x=1.  In 2D ``gamma0_spec`` names one edge of
    the unit square ("left edge" by default); corner nodes shared with the
    adjacent edges are assigned to Gamma0.
    """
    if dimension not in (1, 2):
        raise MeshError(f"dimension must be 1 or 2, got {dimension}")
    if resolution < 2:
        raise MeshError(f"resolution must be >= 2, got {resolution}")

    if dimension == 1:
        return _build_interval(resolution, gamma0_spec)
    return _build_square(resolution, gamma0_spec)


def _build_interval(resolution: int, gamma0_spec: str) -> Mesh:
    nodes = np.linspace(0.0, 1.0, resolution + 1)
    elements = np.column_stack([np.arange(resolution), np.arange(1, resolution + 1)])
    if gamma0_spec in ("default", "left"):
        g0, g1 = [0], [resolution]
    elif gamma0_spec == "right":
        g0, g1 = [resolution], [0]
    else:
        raise MeshError(f"unknown 1D gamma0_spec {gamma0_spec!r}")
    mesh = Mesh(1, nodes, elements, np.array(g0), np.array(g1))
    mesh.validate()
    return mesh


def _build_square(resolution: int, gamma0_spec: str) -> Mesh:
    n = resolution + 1
    xs = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return i * n + j

    tris = []
    for i in range(resolution):
        for j in range(resolution):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    elements = np.array(tris)

    if gamma0_spec == "default":
        gamma0_spec = "left edge"
    if gamma0_spec not in _EDGE_SELECTORS_2D:
        raise MeshError(f"unknown 2D gamma0_spec {gamma0_spec!r}; "
                        f"expected one of {_EDGE_SELECTORS_2D}")

    x, y = nodes[:, 0], nodes[:, 1]
    on_boundary = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
    edge_masks = {
        "left edge": x == 0.0,
        "right edge": x == 1.0,
        "bottom edge": y == 0.0,
        "top edge": y == 1.0,
    }
    g0_mask = edge_masks[gamma0_spec] & on_boundary
    g1_mask = on_boundary & ~g0_mask
    g0 = np.flatnonzero(g0_mask)
    g1 = np.flatnonzero(g1_mask)

    # each boundary facet belongs to exactly one part: the gamma0 edge's
    # facets to Gamma0, everything else to Gamma1
    g0_facets, g1_facets = [], []
    for edge, emask in edge_masks.items():
        ids = np.flatnonzero(emask)
        coord = nodes[ids, 1] if edge in ("left edge", "right edge") else nodes[ids, 0]
        ids = ids[np.argsort(coord)]
        pairs = np.column_stack([ids[:-1], ids[1:]])
        if edge == gamma0_spec:
            g0_facets.append(pairs)
        else:
            g1_facets.append(pairs)
    gamma0_facets = np.vstack(g0_facets)
    gamma1_facets = np.vstack(g1_facets)

    mesh = Mesh(2, nodes, elements, g0, g1,
                gamma0_facets=gamma0_facets, gamma1_facets=gamma1_facets)
    mesh.validate()
    return mesh


def assemble_fem(mesh: Mesh) -> FemOperators:
    """Assemble mass, stiffness and boundary operators by P1 quadrature."""
    N = mesh.n_nodes
    M = np.zeros((N, N))
    K = np.zeros((N, N))

    if mesh.dimension == 1:
        for e, (a, b) in enumerate(mesh.elements):
            h = mesh.nodes[b] - mesh.nodes[a]
            if h <= 0.0:
                raise MeshError(f"degenerate element {e}: zero or negative length")
            Me = (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
            Ke = (1.0 / h) * np.array([[1.0, -1.0], [-1.0, 1.0]])
            for i, gi in enumerate((a, b)):
                for j, gj in enumerate((a, b)):
                    M[gi, gj] += Me[i, j]
                    K[gi, gj] += Ke[i, j]
        # 0-dimensional boundary: the trace load degenerates to point evaluation
        T0 = _point_trace(N, mesh.gamma0_nodes)
        T1 = _point_trace(N, mesh.gamma1_nodes)
    else:
        for e, (a, b, c) in enumerate(mesh.elements):
            p = mesh.nodes[[a, b, c]]
            d1, d2 = p[1] - p[0], p[2] - p[0]
            det = d1[0] * d2[1] - d1[1] * d2[0]
            area = 0.5 * abs(det)
            if area == 0.0:
                raise MeshError(f"degenerate element {e}: zero area")
            Me = (area / 12.0) * np.array([[2.0, 1.0, 1.0],
                                           [1.0, 2.0, 1.0],
                                           [1.0, 1.0, 2.0]])
            # P1 gradients
            G = np.array([[p[1, 1] - p[2, 1], p[2, 1] - p[0, 1], p[0, 1] - p[1, 1]],
                          [p[2, 0] - p[1, 0], p[0, 0] - p[2, 0], p[1, 0] - p[0, 0]]]) / det
            Ke = area * (G.T @ G)
            for i, gi in enumerate((a, b, c)):
                for j, gj in enumerate((a, b, c)):
                    M[gi, gj] += Me[i, j]
                    K[gi, gj] += Ke[i, j]
        T0 = _facet_trace(mesh, mesh.gamma0_facets, mesh.gamma0_nodes)
        T1 = _facet_trace(mesh, mesh.gamma1_facets, mesh.gamma1_nodes)

    if mesh.dimension == 1:
        M_g1 = np.zeros((N, N))
        for node in mesh.gamma1_nodes:
            M_g1[node, node] = 1.0
    else:
        M_g1 = _facet_mass(mesh, mesh.gamma1_facets)

    Mg0 = T0[mesh.gamma0_nodes, :]
    return FemOperators(mesh=mesh, M=M, K=K, M_g1=M_g1, T0=T0, T1=T1, Mg0=Mg0)


def _point_trace(N: int, boundary_nodes: np.ndarray) -> np.ndarray:
    T = np.zeros((N, len(boundary_nodes)))
    for j, node in enumerate(boundary_nodes):
        T[node, j] = 1.0
    return T


def _facet_trace(mesh: Mesh, facets: np.ndarray, boundary_nodes: np.ndarray) -> np.ndarray:
    """Trace-load map: phi on boundary nodes -> interior load int_G phi psi_i."""
    N = mesh.n_nodes
    col_of = {int(node): j for j, node in enumerate(boundary_nodes)}
    T = np.zeros((N, len(boundary_nodes)))
    for a, b in facets:
        h = np.linalg.norm(mesh.nodes[b] - mesh.nodes[a])
        Me = (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
        for i, gi in enumerate((a, b)):
            for j, gj in enumerate((a, b)):
                # phi is indexed by this part's nodes; hat functions centered
                # on nodes of the other part (shared corners) carry no dof here
                cj = col_of.get(int(gj))
                if cj is not None:
                    T[gi, cj] += Me[i, j]
    return T


def _facet_mass(mesh: Mesh, facets: np.ndarray) -> np.ndarray:
    """Full-size boundary mass matrix over the given facets (symmetric)."""
    N = mesh.n_nodes
    B = np.zeros((N, N))
    for a, b in facets:
        h = np.linalg.norm(mesh.nodes[b] - mesh.nodes[a])
        Me = (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
        for i, gi in enumerate((a, b)):
            for j, gj in enumerate((a, b)):
                B[gi, gj] += Me[i, j]
    return B


def neumann_map(ops: FemOperators, which: str, phi: np.ndarray) -> np.ndarray:
    """Discrete Green map: solve (K + M) v = trace-load(phi).

    ``which`` selects the boundary part ("gamma0" or "gamma1") carrying the
    flux data phi; the flux is zero on the rest of the boundary.
    """
    if which == "gamma0":
        T = ops.T0
    elif which == "gamma1":
        T = ops.T1
    else:
        raise ValueError(f"which must be 'gamma0' or 'gamma1', got {which!r}")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (T.shape[1],):
        raise ValueError(f"phi has shape {phi.shape}, expected ({T.shape[1]},)")
    return scipy.linalg.solve(ops.K + ops.M, T @ phi, assume_a="pos")


def dump_matrix_triplets(A: np.ndarray, path, name: str = "matrix") -> None:
    """Write a dense matrix in the plain-text triplet format.

    Header line: ``# <name> <rows> <cols>``, then one ``row col value`` line
    per structurally nonzero entry.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"# {name} {A.shape[0]} {A.shape[1]}\n")
        for i, j in zip(*np.nonzero(A)):
            fh.write(f"{i} {j} {A[i, j]:.17g}\n")


def load_matrix_triplets(path) -> np.ndarray:
    """Read a matrix written by :func:`dump_matrix_triplets`."""
    with open(path) as fh:
        header = fh.readline().split()
        rows, cols = int(header[-2]), int(header[-1])
        A = np.zeros((rows, cols))
        for line in fh:
            i, j, v = line.split()
            A[int(i), int(j)] = float(v)
    return A
