"""CSR matrices and linear solvers for the nonsymmetric Newton systems.

Thin wrapper over scipy.sparse: direct LU below 50k unknowns, BiCGStab with
Jacobi preconditioning above. The assembly routines share one sparsity pattern
per space and only rewrite values between Newton iterations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

DIRECT_DOF_LIMIT = 50_000


class SolverError(RuntimeError):
    pass


class SparseMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free columns."""

    def __init__(self, mat):
        if not sparse.issparse(mat):
            mat = sparse.csr_matrix(np.asarray(mat, dtype=float))
        mat = mat.tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        self._m = mat

    @classmethod
    def from_csr_arrays(cls, row_offsets, col_indices, values, shape):
        return cls(sparse.csr_matrix((values, col_indices, row_offsets), shape=shape))

    @property
    def n_rows(self) -> int:
        return self._m.shape[0]

    @property
    def n_cols(self) -> int:
        return self._m.shape[1]

    @property
    def row_offsets(self) -> np.ndarray:
        return self._m.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._m.indices

    @property
    def values(self) -> np.ndarray:
        return self._m.data

    def scipy(self) -> sparse.csr_matrix:
        return self._m

    def dense(self) -> np.ndarray:
        return self._m.toarray()

    def copy(self) -> "SparseMatrix":
        return SparseMatrix(self._m.copy())

    def __add__(self, other):
        return SparseMatrix(self._m + other._m)

    def __mul__(self, scalar):
        return SparseMatrix(self._m * float(scalar))

    __rmul__ = __mul__


@dataclass
class LinearSolverConfig:
    method: str = "auto"            # auto | direct | bicgstab
    rel_tol: float = 1e-12
    max_iter: int = 2000
    preconditioner: str = "jacobi"  # none | jacobi

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in ("auto", "direct", "bicgstab"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


def spmv(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n_cols,):
        raise ValueError(f"shape mismatch: matrix is {A.n_rows}x{A.n_cols}, vector has {x.shape}")
    return A.scipy() @ x


def solve(A: SparseMatrix, b, cfg: LinearSolverConfig | None = None) -> np.ndarray:
    """Solve A x = b to ||Ax - b|| <= rel_tol ||b||."""
    if cfg is None:
        cfg = LinearSolverConfig()
    b = np.asarray(b, dtype=float)
    if A.n_rows != A.n_cols:
        raise ValueError(f"matrix is {A.n_rows}x{A.n_cols}, not square")
    if b.shape != (A.n_rows,):
        raise ValueError(f"rhs has shape {b.shape}, need ({A.n_rows},)")

    method = cfg.method
    if method == "auto":
        method = "direct" if A.n_rows <= DIRECT_DOF_LIMIT else "bicgstab"

    if method == "direct":
        try:
            lu = spla.splu(A.scipy().tocsc())
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
        return lu.solve(b)

    M = None
    if cfg.preconditioner == "jacobi":
        diag = A.scipy().diagonal()
        if np.any(diag == 0.0):
            raise SolverError("Jacobi preconditioner hit a zero diagonal entry")
        inv = 1.0 / diag
        M = spla.LinearOperator(A.scipy().shape, matvec=lambda v: inv * v)
    x, info = spla.bicgstab(A.scipy(), b, rtol=cfg.rel_tol, atol=0.0,
                            maxiter=cfg.max_iter, M=M)
    if info != 0:
        res = np.linalg.norm(A.scipy() @ x - b)
        raise SolverError(
            f"BiCGStab did not converge (info={info}) after "
            f"{cfg.max_iter if info > 0 else info} iterations, residual {res:.3e}")
    return x


def eliminate_dirichlet(A: SparseMatrix, b: np.ndarray, dofs: np.ndarray) -> SparseMatrix:
    """Zero the constrained rows and columns, put 1 on their diagonal.

    Modifies b in place so the constrained solution entries come out zero.
    Keeps symmetry whenever A was symmetric.
    """
    if dofs.size == 0:
        return A
    m = A.scipy().tolil()
    m[dofs, :] = 0.0
    m[:, dofs] = 0.0
    m[dofs, dofs] = 1.0
    b[dofs] = 0.0
    return SparseMatrix(m.tocsr())


class SharedPattern:
    """Fixed CSR sparsity from the vertex adjacency of a mesh.

    Rebuilding symbolic structure every Newton iteration would dominate the
    assembly cost; instead the flat position of every (cell, local i, local j)
    pair is tabulated once and value arrays are rewritten in place.
    """

    def __init__(self, space):
        cells = space.mesh.cells
        nv = space.n_dofs
        d1 = cells.shape[1]
        rows = np.repeat(cells, d1, axis=1).ravel()
        cols = np.tile(cells, (1, d1)).ravel()
        skeleton = sparse.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(nv, nv))
        skeleton.sum_duplicates()
        skeleton.sort_indices()
        self.indptr = skeleton.indptr.copy()
        self.indices = skeleton.indices.copy()
        self.nnz = skeleton.nnz
        self.shape = (nv, nv)

        # flat index of (c, a, b) inside the CSR data array; the key
        # row*n + col is globally sorted in CSR order, so one searchsorted does it
        csr_rows = np.repeat(np.arange(nv), np.diff(self.indptr))
        keys = csr_rows.astype(np.int64) * nv + self.indices
        flat = np.searchsorted(keys, rows.astype(np.int64) * nv + cols)
        self.flat_index = flat.reshape(cells.shape[0], d1, d1)
        self._csr_rows = csr_rows
        self._keys = keys
        self._constraint_cache = {}

    def constraint_positions(self, dofs: np.ndarray):
        """Data positions to zero and the diagonal positions for constrained dofs."""
        key = dofs.tobytes()
        if key not in self._constraint_cache:
            nv = self.shape[0]
            constrained = np.zeros(nv, dtype=bool)
            constrained[dofs] = True
            zero_pos = np.flatnonzero(constrained[self._csr_rows] | constrained[self.indices])
            diag_pos = np.searchsorted(self._keys, dofs.astype(np.int64) * (nv + 1))
            self._constraint_cache[key] = (zero_pos, diag_pos)
        return self._constraint_cache[key]

    def matrix(self, local_values: np.ndarray) -> SparseMatrix:
        """Scatter (n_cells, d+1, d+1) local matrices into a fresh CSR matrix."""
        data = np.zeros(self.nnz)
        np.add.at(data, self.flat_index.ravel(), local_values.ravel())
        return SparseMatrix(sparse.csr_matrix(
            (data, self.indices, self.indptr), shape=self.shape))


def pattern(space) -> SharedPattern:
    if space._pattern is None:
        space._pattern = SharedPattern(space)
    return space._pattern
