"""P1 Lagrange space on a simplicial mesh.

Degrees of freedom are the mesh vertices. Quadrature rules are Stroud conical
products (Gauss-Jacobi along the collapsed directions, Gauss-Legendre in the
last), which keeps every weight positive at any order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import Mesh, all_cell_geometry

_REF_VOLUME = {2: 0.5, 3: 1.0 / 6.0}

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference simplex, points in barycentric coordinates."""

    dim: int
    points: np.ndarray     # (n_q, dim+1) barycentric
    weights: np.ndarray    # (n_q,), positive, summing to the reference volume
    exactness_degree: int


def quadrature(dim: int, degree: int) -> QuadratureRule:
    """Conical product rule exact for polynomials of total degree >= degree.

    degree must lie in [1, 6]; one point per direction at degree 1 (the
    centroid rule), and n points per direction integrate degree 2n-1 exactly.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if not 1 <= degree <= 6:
        raise ValueError(f"unsupported quadrature degree {degree}, need 1..6")
    n = (degree + 2) // 2
    axes = []
    for k in range(dim):
        jacobi_pow = dim - 1 - k
        if jacobi_pow == 0:
            xx, ww = roots_legendre(n)
        else:
            # weight (1-x)^a on [-1,1]; rescale to (1-u)^a on [0,1]
            xx, ww = roots_jacobi(n, jacobi_pow, 0.0)
            ww = ww / 2.0**jacobi_pow
        axes.append((0.5 * (xx + 1.0), 0.5 * ww))

    pts = np.empty((n**dim, dim))
    wts = np.empty(n**dim)
    for row, idx in enumerate(itertools.product(*[range(n)] * dim)):
        remaining = 1.0
        w = 1.0
        for k in range(dim):
            xi = axes[k][0][idx[k]]
            pts[row, k] = remaining * xi
            w *= axes[k][1][idx[k]]
            remaining *= 1.0 - xi
        wts[row] = w

    bary = np.column_stack([1.0 - pts.sum(axis=1), pts])
    bary.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(dim=dim, points=bary, weights=wts,
                          exactness_degree=2 * n - 1)


class FunctionSpace:
    """P1 space over a mesh with Dirichlet or Neumann boundary bookkeeping.

    Immutable once built. Caches per-cell geometry and quadrature tables for
    the assembly routines.
    """

    def __init__(self, mesh: Mesh, bc_kind: str = DIRICHLET):
        if bc_kind not in (DIRICHLET, NEUMANN):
            raise ValueError(f"bc_kind must be '{DIRICHLET}' or '{NEUMANN}'")
        self.mesh = mesh
        self.n_dofs = mesh.n_vertices
        self.bc_kind = bc_kind
        if bc_kind == DIRICHLET:
            self.dirichlet_dofs = np.array(sorted(mesh.boundary_vertices), dtype=np.int64)
        else:
            self.dirichlet_dofs = np.array([], dtype=np.int64)
        self.cell_volumes, self.cell_gradients = all_cell_geometry(mesh)
        self._quad_cache = {}
        self._pattern = None

    def quad(self, degree: int) -> QuadratureRule:
        if degree not in self._quad_cache:
            self._quad_cache[degree] = quadrature(self.mesh.dim, degree)
        return self._quad_cache[degree]

    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)


@dataclass
class FemFunction:
    """Nodal coefficient vector tied to a FunctionSpace."""

    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, "
                f"space has {self.space.n_dofs} dofs")

    def copy(self) -> "FemFunction":
        return FemFunction(self.space, self.coeffs.copy())


def interpolate(g, t: float, space: FunctionSpace) -> FemFunction:
    """Nodal interpolant of g(x, t): coeffs[i] = g(vertex_i, t).

    g may be vectorized over an (n, dim) array of points or accept a single
    point; non-finite values are reported with the vertex that produced them.
    """
    verts = space.mesh.vertices
    try:
        vals = np.asarray(g(verts, t), dtype=float)
        if vals.shape != (space.n_dofs,):
            raise ValueError
    except Exception:
        vals = np.array([float(g(v, t)) for v in verts])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"non-finite value {vals[i]} at vertex {i} {tuple(verts[i])}, t={t}")
    return FemFunction(space, vals)


def eval_in_cell(f: FemFunction, cell: int, bary) -> tuple:
    """Value and gradient of f at a barycentric point of one cell."""
    bary = np.asarray(bary, dtype=float)
    conn = f.space.mesh.cells[cell]
    nodal = f.coeffs[conn]
    value = float(bary @ nodal)
    gradient = nodal @ f.space.cell_gradients[cell]
    return value, gradient


def apply_dirichlet(u: FemFunction, value: float = 0.0) -> FemFunction:
    """Overwrite the constrained entries with the prescribed boundary value."""
    u.coeffs[u.space.dirichlet_dofs] = value
    return u
