"""Discrete forms: mass and stiffness matrices, the nonlinear advection and
reaction vectors with their Newton Jacobians, and time-averaged load vectors.

All assembly is vectorized over cells and scatters into the shared CSR
pattern of the space. Quadrature degrees: the advection form u^delta (sum of
partials) phi is a piecewise polynomial of degree 2 delta + 2 and is
integrated exactly up to delta = 2, which is what makes the discrete skew
identity dot(B(u), u) = 0 hold to machine precision for boundary-vanishing u.
The reaction form is capped at degree 6 (inexact for delta = 2, a quadrature
crime of order h^2 that does not pollute the first-order rate).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SparseMatrix, pattern
from .space import FemFunction, FunctionSpace

_REF_VOLUME = {2: 0.5, 3: 1.0 / 6.0}
_GAUSS2 = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class ProblemCoefficients:
    """Coefficients of the advection-diffusion-reaction equation with memory."""

    alpha: float = 1.0   # advection
    beta: float = 1.0    # reaction strength
    gamma: float = 0.5   # reaction root in (0, 1)
    delta: int = 1       # nonlinearity power
    nu: float = 1.0      # diffusion
    eta: float = 0.0     # memory coupling

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"advection coefficient must be >= 0, got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"reaction coefficient must be >= 0, got {self.beta}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if int(self.delta) != self.delta or self.delta < 1:
            raise ValueError(f"delta must be a positive integer, got {self.delta}")
        if self.nu <= 0.0:
            raise ValueError(f"diffusion coefficient must be > 0, got {self.nu}")
        if self.eta < 0.0:
            raise ValueError(f"memory coefficient must be >= 0, got {self.eta}")

    def advection_degree(self) -> int:
        return min(2 * self.delta + 2, 6)

    def reaction_degree(self) -> int:
        return min(2 * (2 * self.delta + 1), 6)


def _scaled_weights(space: FunctionSpace, degree: int):
    """Barycentric points and per-cell physical quadrature weights."""
    rule = space.quad(degree)
    scale = space.cell_volumes / _REF_VOLUME[space.mesh.dim]
    return rule.points, scale[:, None] * rule.weights[None, :]


def mass_matrix(space: FunctionSpace) -> SparseMatrix:
    """Entries int phi_i phi_j; exact (the P1 element mass is known in closed
    form: vol (1 + delta_ab) / ((d+1)(d+2)))."""
    d = space.mesh.dim
    n_loc = d + 1
    local = np.full((n_loc, n_loc), 1.0) + np.eye(n_loc)
    local /= (d + 1) * (d + 2)
    values = space.cell_volumes[:, None, None] * local[None, :, :]
    return pattern(space).matrix(values)


def stiffness_matrix(space: FunctionSpace) -> SparseMatrix:
    """Entries int grad phi_i . grad phi_j; exact for P1."""
    g = space.cell_gradients
    values = np.einsum("c,cad,cbd->cab", space.cell_volumes, g, g)
    return pattern(space).matrix(values)


def _cell_values(u: FemFunction, lam: np.ndarray):
    """Nodal values per cell and their quadrature-point interpolants."""
    u_cell = u.coeffs[u.space.mesh.cells]        # (n_c, d+1)
    return u_cell, u_cell @ lam.T                # (n_c, n_q)


def advection_vector(u: FemFunction, coeffs: ProblemCoefficients) -> np.ndarray:
    """Entries int u^delta (sum_d du/dx_d) phi_i."""
    space = u.space
    lam, W = _scaled_weights(space, coeffs.advection_degree())
    u_cell, u_q = _cell_values(u, lam)
    grad_u = np.einsum("ca,cad->cd", u_cell, space.cell_gradients)
    slope = grad_u.sum(axis=1)                   # cellwise constant
    powered = u_q if coeffs.delta == 1 else u_q**coeffs.delta
    local = slope[:, None] * ((W * powered) @ lam)
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.mesh.cells, local)
    return out


def advection_jacobian(u: FemFunction, coeffs: ProblemCoefficients) -> SparseMatrix:
    """Derivative of advection_vector: direction w enters as
    delta u^(delta-1) w (sum du) + u^delta (sum dw)."""
    space = u.space
    delta = coeffs.delta
    lam, W = _scaled_weights(space, coeffs.advection_degree())
    u_cell, u_q = _cell_values(u, lam)
    grad_u = np.einsum("ca,cad->cd", u_cell, space.cell_gradients)
    slope = grad_u.sum(axis=1)
    gsum = space.cell_gradients.sum(axis=2)      # (n_c, d+1)
    u_pow_dm1 = np.ones_like(u_q) if delta == 1 else u_q**(delta - 1)
    u_pow = u_q if delta == 1 else u_q**delta
    term1 = np.einsum("cq,qa,qb->cab", W * (delta * u_pow_dm1) * slope[:, None], lam, lam)
    term2 = np.einsum("cq,qa,cb->cab", W * u_pow, lam, gsum)
    return pattern(space).matrix(term1 + term2)


def _reaction_value(u_q, coeffs):
    # c(u) = (1+gamma) u^(delta+1) - gamma u - u^(2 delta + 1)
    g, d = coeffs.gamma, coeffs.delta
    return (1.0 + g) * u_q**(d + 1) - g * u_q - u_q**(2 * d + 1)


def _reaction_derivative(u_q, coeffs):
    g, d = coeffs.gamma, coeffs.delta
    return (1.0 + g) * (d + 1) * u_q**d - g - (2 * d + 1) * u_q**(2 * d)


def reaction_vector(u: FemFunction, coeffs: ProblemCoefficients) -> np.ndarray:
    """Entries (c(u), phi_i) for the cubic-type reaction."""
    space = u.space
    lam, W = _scaled_weights(space, coeffs.reaction_degree())
    _, u_q = _cell_values(u, lam)
    local = (W * _reaction_value(u_q, coeffs)) @ lam
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.mesh.cells, local)
    return out


def reaction_jacobian(u: FemFunction, coeffs: ProblemCoefficients) -> SparseMatrix:
    space = u.space
    lam, W = _scaled_weights(space, coeffs.reaction_degree())
    _, u_q = _cell_values(u, lam)
    local = np.einsum("cq,qa,qb->cab", W * _reaction_derivative(u_q, coeffs), lam, lam)
    return pattern(space).matrix(local)


def _evaluate_field(f, points: np.ndarray, t: float) -> np.ndarray:
    """Evaluate f(x, t) on an (n, dim) array of points, scalar fallback."""
    try:
        vals = np.asarray(f(points, t), dtype=float)
        if vals.shape != (points.shape[0],):
            raise ValueError
        return vals
    except Exception:
        return np.array([float(f(p, t)) for p in points])


def load_vector(f, space: FunctionSpace, t_start: float, t_end: float,
                degree: int = 5) -> np.ndarray:
    """Entries (f^k, phi_i) with f^k the time average of f over the step,
    approximated by 2-point Gauss-Legendre (exact through cubic in t)."""
    if not t_end > t_start:
        raise ValueError(f"need t_end > t_start, got [{t_start}, {t_end}]")
    lam, W = _scaled_weights(space, degree)
    verts = space.mesh.vertices[space.mesh.cells]             # (n_c, d+1, d)
    points = np.einsum("qa,cad->cqd", lam, verts)
    flat = points.reshape(-1, space.mesh.dim)

    mid = 0.5 * (t_start + t_end)
    half = 0.5 * (t_end - t_start)
    f_avg = 0.5 * (_evaluate_field(f, flat, mid - half * _GAUSS2)
                   + _evaluate_field(f, flat, mid + half * _GAUSS2))
    f_q = f_avg.reshape(W.shape)
    local = (W * f_q) @ lam
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.mesh.cells, local)
    return out
