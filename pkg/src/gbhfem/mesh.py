"""Structured simplicial meshes of axis-aligned boxes in 2D and 3D.

Each grid square is cut into two triangles along its lower-left to upper-right
diagonal; each grid cube into the six tetrahedra that share the main diagonal
(Kuhn subdivision). Vertex coordinates come from np.linspace, whose endpoints
are exact, so boundary detection is plain equality against the box bounds.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

_FACTORIAL = {2: 2.0, 3: 6.0}

# local facet orderings that give outward normals on positively oriented cells
_TRI_EDGES = ((0, 1), (1, 2), (2, 0))
_TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh of a box. Immutable; safe to share between threads."""

    dim: int
    vertices: np.ndarray          # (n_vertices, dim) float
    cells: np.ndarray             # (n_cells, dim+1) int, positively oriented
    boundary_vertices: frozenset
    boundary_facets: tuple        # vertex tuples, outward-facing orientation
    extent: tuple                 # ((low, high), ...) per axis

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def h(self) -> float:
        """Grid spacing of the structured construction (max over axes)."""
        return max((hi - lo) for lo, hi in self.extent) / self._n_per_side

    _n_per_side: int = field(default=1, repr=False)


def _normalize_extent(dim, extent):
    if extent is None:
        return tuple((0.0, 1.0) for _ in range(dim))
    extent = np.asarray(extent, dtype=float)
    if extent.shape == (2,):
        extent = np.tile(extent, (dim, 1))
    if extent.shape != (dim, 2):
        raise ValueError(f"extent must be (low, high) or {dim} such pairs, got shape {extent.shape}")
    for lo, hi in extent:
        if not hi > lo:
            raise ValueError(f"degenerate extent: low={lo} high={hi}")
    return tuple((float(lo), float(hi)) for lo, hi in extent)


def build_structured_mesh(dim: int, n: int, extent=None) -> Mesh:
    """Uniform n-per-side simplicial mesh of an axis-aligned box.

    Parameters
    ----------
    dim : 2 or 3
    n : cells per side, at least 1
    extent : (low, high) pair applied to every axis, or one pair per axis;
        defaults to the unit box.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if n < 1:
        raise ValueError(f"need at least one cell per side, got n={n}")
    extent = _normalize_extent(dim, extent)

    axes = [np.linspace(lo, hi, n + 1) for lo, hi in extent]
    if dim == 2:
        X, Y = np.meshgrid(axes[0], axes[1])        # index = j*(n+1) + i
        vertices = np.column_stack([X.ravel(), Y.ravel()])
        cells = _square_cells(n)
    else:
        Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
        cells = _cube_cells(n)

    on_bound = np.zeros(vertices.shape[0], dtype=bool)
    for ax, (lo, hi) in enumerate(extent):
        on_bound |= (vertices[:, ax] == lo) | (vertices[:, ax] == hi)
    boundary_vertices = frozenset(np.flatnonzero(on_bound).tolist())

    boundary_facets = _boundary_facets(cells, dim)

    vertices.setflags(write=False)
    cells.setflags(write=False)
    return Mesh(dim=dim, vertices=vertices, cells=cells,
                boundary_vertices=boundary_vertices,
                boundary_facets=boundary_facets, extent=extent,
                _n_per_side=n)


def _square_cells(n):
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    # both triangles positively oriented (counterclockwise)
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])
    return tris


def _cube_cells(n):
    stride_j = n + 1
    stride_k = (n + 1) * (n + 1)
    strides = np.array([1, stride_j, stride_k])
    corner = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                                  indexing="ij"), axis=-1).reshape(-1, 3)
    base = corner[:, 0] * 1 + corner[:, 1] * stride_j + corner[:, 2] * stride_k

    tets = []
    eye = np.eye(3, dtype=np.int64)
    for perm in itertools.permutations(range(3)):
        offs = np.zeros((4, 3), dtype=np.int64)
        for step, ax in enumerate(perm):
            offs[step + 1] = offs[step] + eye[ax]
        sign = _perm_sign(perm)
        local = offs @ strides
        if sign < 0:
            local = local[[0, 1, 3, 2]]
        tets.append(base[:, None] + local[None, :])
    cells = np.stack(tets, axis=1).reshape(-1, 4)
    return cells


def _perm_sign(perm):
    sign = 1
    p = list(perm)
    for a in range(len(p)):
        for b in range(a + 1, len(p)):
            if p[a] > p[b]:
                sign = -sign
    return sign


def _boundary_facets(cells, dim):
    local = _TRI_EDGES if dim == 2 else _TET_FACES
    seen = {}
    for cell in cells:
        for loc in local:
            facet = tuple(int(cell[v]) for v in loc)
            key = tuple(sorted(facet))
            if key in seen:
                seen[key] = None
            else:
                seen[key] = facet
    return tuple(f for f in seen.values() if f is not None)


def cell_geometry(mesh: Mesh, cell: int):
    """Volume and the constant P1 barycentric gradients of one cell.

    Returns (volume, gradients) with gradients[v] the gradient of the hat
    function of local vertex v; the rows sum to zero.
    """
    vols, grads = all_cell_geometry(mesh)
    return float(vols[cell]), grads[cell]


def all_cell_geometry(mesh: Mesh):
    """Vectorized volumes (n_cells,) and gradients (n_cells, dim+1, dim)."""
    verts = mesh.vertices[mesh.cells]          # (n_c, d+1, d)
    edges = verts[:, 1:, :] - verts[:, :1, :]  # rows are x_m - x_0
    d = mesh.dim
    if d == 2:
        det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
        inv = np.empty_like(edges)
        inv[:, 0, 0] = edges[:, 1, 1]
        inv[:, 0, 1] = -edges[:, 0, 1]
        inv[:, 1, 0] = -edges[:, 1, 0]
        inv[:, 1, 1] = edges[:, 0, 0]
        inv /= det[:, None, None]
    else:
        a, b, c = edges[:, 0], edges[:, 1], edges[:, 2]
        det = (a[:, 0] * (b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1])
               - a[:, 1] * (b[:, 0] * c[:, 2] - b[:, 2] * c[:, 0])
               + a[:, 2] * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]))
        inv = np.empty_like(edges)
        inv[:, 0, 0] = b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1]
        inv[:, 0, 1] = a[:, 2] * c[:, 1] - a[:, 1] * c[:, 2]
        inv[:, 0, 2] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
        inv[:, 1, 0] = b[:, 2] * c[:, 0] - b[:, 0] * c[:, 2]
        inv[:, 1, 1] = a[:, 0] * c[:, 2] - a[:, 2] * c[:, 0]
        inv[:, 1, 2] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
        inv[:, 2, 0] = b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]
        inv[:, 2, 1] = a[:, 1] * c[:, 0] - a[:, 0] * c[:, 1]
        inv[:, 2, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        inv /= det[:, None, None]

    vols = det / _FACTORIAL[d]
    grads = np.empty((mesh.n_cells, d + 1, d))
    # gradient of barycentric m (m >= 1) is column m-1 of inv(E)
    grads[:, 1:, :] = np.swapaxes(inv, 1, 2)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return vols, grads
