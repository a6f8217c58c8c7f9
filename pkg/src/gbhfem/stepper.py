"""Backward Euler time stepping with memory history and per-step Newton.

Each step solves the nonlinear system

    M (u^k - u^{k-1})/dt + nu A u^k + eta dt w_0 A u^k
        + eta dt sum_{j<k} w_{k-j} A u^j + alpha B(u^k) - beta C(u^k) = F^k

where the j = k part of the memory sum sits inside the Newton iteration (it
is linear in the unknown) and the older history enters as a fixed load. The
full history is kept in one preallocated array; the memory sum is applied to
a single accumulated vector per step, not per past index.

Also provides the excitable-media variant: the same equation coupled to a
pointwise recovery field v, advanced Gauss-Seidel style (u implicit with
lagged v, then v pointwise implicit).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (ProblemCoefficients, advection_jacobian,
                       advection_vector, load_vector, mass_matrix,
                       reaction_jacobian, reaction_vector, stiffness_matrix)
from .kernel import KernelSpec, WeightTable, build_weights
from .linalg import LinearSolverConfig, SparseMatrix, pattern, solve
from .space import NEUMANN, FemFunction, FunctionSpace


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t_k = k dt of [0, t_final] into n_steps steps."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.t_final <= 0.0:
            raise ValueError(f"final time must be positive, got {self.t_final}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one step, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass
class NewtonConfig:
    abs_tol: float = 1e-10
    max_iter: int = 25
    damping: str = "none"   # none | line-halving

    def __post_init__(self):
        if self.abs_tol <= 0.0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.damping not in ("none", "line-halving"):
            raise ValueError(f"unknown damping {self.damping!r}")


class NewtonError(RuntimeError):
    pass


class TimeHistory:
    """All computed snapshots u^0 ... u^k in one (n_steps+1, n_dofs) block."""

    def __init__(self, space: FunctionSpace, grid: TimeGrid):
        self.space = space
        self.grid = grid
        self.snapshots = np.zeros((grid.n_steps + 1, space.n_dofs))
        self.steps_completed = 0
        self.newton_iterations: list[int] = []
        self.final_residuals: list[float] = []

    def __len__(self) -> int:
        return self.steps_completed + 1

    def solution(self, k: int) -> FemFunction:
        if not 0 <= k <= self.steps_completed:
            raise IndexError(f"step {k} not computed yet (have 0..{self.steps_completed})")
        return FemFunction(self.space, self.snapshots[k].copy())

    @property
    def final(self) -> FemFunction:
        return self.solution(self.steps_completed)


class DiscreteOperators:
    """Mass and stiffness on a fixed space, assembled once per study run."""

    def __init__(self, space: FunctionSpace):
        self.space = space
        self.mass = mass_matrix(space)
        self.stiffness = stiffness_matrix(space)
        self.pattern = pattern(space)
        self._M = self.mass.scipy()
        self._A = self.stiffness.scipy()


def memory_load(ops: DiscreteOperators, history: TimeHistory, k: int,
                weights: WeightTable, eta: float) -> np.ndarray | None:
    """The fixed part of the memory term at step k,

        eta dt sum_{j=1}^{k-1} w_{k-j} A u^j,

    or None when it vanishes (first step, or eta = 0)."""
    if eta == 0.0 or k < 2:
        return None
    w = weights.w
    acc = weights.dt * (w[1:k][::-1] @ history.snapshots[1:k])
    return eta * (ops._A @ acc)


def residual(ops: DiscreteOperators, u: np.ndarray, history: TimeHistory,
             k: int, weights: WeightTable, coeffs: ProblemCoefficients,
             load: np.ndarray | None, history_term: np.ndarray | None = None
             ) -> np.ndarray:
    """Algebraic residual of the step-k system at the trial state u.

    history_term, when given, must equal memory_load(...) for this step; the
    Newton loop passes it to avoid resumming the history every iteration.
    """
    if k < 1 or k > history.steps_completed + 1:
        raise ValueError(f"step {k} needs history through {k - 1}, "
                         f"have {history.steps_completed}")
    space = ops.space
    dt = weights.dt
    u_prev = history.snapshots[k - 1]

    r = ops._M @ ((u - u_prev) / dt)
    visc = coeffs.nu + coeffs.eta * dt * weights.w[0]
    r += visc * (ops._A @ u)
    if history_term is None:
        history_term = memory_load(ops, history, k, weights, coeffs.eta)
    if history_term is not None:
        r += history_term
    if coeffs.alpha != 0.0:
        r += coeffs.alpha * advection_vector(FemFunction(space, u), coeffs)
    if coeffs.beta != 0.0:
        r -= coeffs.beta * reaction_vector(FemFunction(space, u), coeffs)
    if load is not None:
        r -= load
    r[space.dirichlet_dofs] = 0.0
    return r


def _jacobian(ops: DiscreteOperators, u: np.ndarray, weights: WeightTable,
              coeffs: ProblemCoefficients) -> SparseMatrix:
    # every operator shares the adjacency pattern, so sum raw value arrays
    dt = weights.dt
    visc = coeffs.nu + coeffs.eta * dt * weights.w[0]
    data = ops.mass.values / dt + visc * ops.stiffness.values
    if coeffs.alpha != 0.0:
        data = data + coeffs.alpha * advection_jacobian(
            FemFunction(ops.space, u), coeffs).values
    if coeffs.beta != 0.0:
        data = data - coeffs.beta * reaction_jacobian(
            FemFunction(ops.space, u), coeffs).values
    zero_pos, diag_pos = ops.pattern.constraint_positions(ops.space.dirichlet_dofs)
    data[zero_pos] = 0.0
    data[diag_pos] = 1.0
    return SparseMatrix.from_csr_arrays(ops.pattern.indptr, ops.pattern.indices,
                                        data, ops.pattern.shape)


def newton_step_solve(ops: DiscreteOperators, history: TimeHistory, k: int,
                      weights: WeightTable, coeffs: ProblemCoefficients,
                      load: np.ndarray | None,
                      newton: NewtonConfig | None = None,
                      linear: LinearSolverConfig | None = None):
    """Advance one step: Newton from the previous snapshot.

    Returns (u^k, iterations, final residual norm). An initial guess already
    below tolerance counts as 0 iterations; an affine system takes exactly 1.
    """
    if newton is None:
        newton = NewtonConfig()
    hist_term = memory_load(ops, history, k, weights, coeffs.eta)

    u = history.snapshots[k - 1].copy()
    r = residual(ops, u, history, k, weights, coeffs, load, hist_term)
    norm = float(np.linalg.norm(r))
    norms = [norm]
    iterations = 0
    while norm > newton.abs_tol:
        if iterations >= newton.max_iter:
            raise NewtonError(
                f"no convergence in {newton.max_iter} iterations at step {k}; "
                f"residual norms {', '.join(f'{v:.3e}' for v in norms)}")
        J = _jacobian(ops, u, weights, coeffs)
        du = solve(J, r, linear)
        scale = 1.0
        while True:
            u_try = u - scale * du
            r_try = residual(ops, u_try, history, k, weights, coeffs, load, hist_term)
            norm_try = float(np.linalg.norm(r_try))
            if newton.damping != "line-halving" or norm_try < norm or scale < 1e-3:
                break
            scale *= 0.5
        u, r, norm = u_try, r_try, norm_try
        iterations += 1
        norms.append(norm)
    return u, iterations, norm


@dataclass(frozen=True)
class Problem:
    """Everything one transient solve needs besides solver knobs."""

    space: FunctionSpace
    coeffs: ProblemCoefficients
    kernel: KernelSpec
    grid: TimeGrid
    u0: FemFunction
    forcing: object = None    # f(x, t) or None for zero


def _initial_state(problem: Problem) -> np.ndarray:
    u0 = problem.u0.coeffs if isinstance(problem.u0, FemFunction) \
        else np.asarray(problem.u0, dtype=float)
    u0 = u0.copy()
    u0[problem.space.dirichlet_dofs] = 0.0
    return u0


def run(problem: Problem, callback=None, newton: NewtonConfig | None = None,
        linear: LinearSolverConfig | None = None) -> TimeHistory:
    """March the scheme over the whole grid; history plus iteration counts."""
    space = problem.space
    grid = problem.grid
    ops = DiscreteOperators(space)
    weights = build_weights(problem.kernel, grid.dt, grid.n_steps)
    history = TimeHistory(space, grid)
    history.snapshots[0] = _initial_state(problem)

    times = grid.times()
    for k in range(1, grid.n_steps + 1):
        load = None
        if problem.forcing is not None:
            load = load_vector(problem.forcing, space, times[k - 1], times[k])
        try:
            u, iterations, res = newton_step_solve(
                ops, history, k, weights, problem.coeffs, load, newton, linear)
        except NewtonError as exc:
            raise NewtonError(f"t = {times[k]:.6g}: {exc}") from exc
        history.snapshots[k] = u
        history.steps_completed = k
        history.newton_iterations.append(iterations)
        history.final_residuals.append(res)
        if callback is not None:
            callback(k, history)
    return history


# ---------------------------------------------------------------------------
# excitable-media coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FhnCoefficients(ProblemCoefficients):
    """Adds the recovery dynamics dv/dt = epsilon (u - rho v)."""

    epsilon: float = 0.02
    rho: float = 0.5

    def __post_init__(self):
        super().__post_init__()
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.rho < 0.0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")


def run_fhn(problem: Problem, v0, callback=None,
            newton: NewtonConfig | None = None,
            linear: LinearSolverConfig | None = None):
    """Coupled run: u implicit with the lagged recovery load -(v^{k-1}, phi),
    then the pointwise-implicit update v^k = (v^{k-1} + dt e u^k)/(1 + dt e rho).

    Returns (u history, v history).
    """
    coeffs = problem.coeffs
    if not isinstance(coeffs, FhnCoefficients):
        raise ValueError("run_fhn needs FhnCoefficients (epsilon, rho)")
    space = problem.space
    if space.bc_kind != NEUMANN:
        raise ValueError("the coupled system uses natural boundary conditions; "
                         f"space has bc_kind {space.bc_kind!r}")

    grid = problem.grid
    dt = grid.dt
    ops = DiscreteOperators(space)
    weights = build_weights(problem.kernel, dt, grid.n_steps)

    u_hist = TimeHistory(space, grid)
    v_hist = TimeHistory(space, grid)
    u_hist.snapshots[0] = _initial_state(problem)
    v_hist.snapshots[0] = v0.coeffs if isinstance(v0, FemFunction) \
        else np.asarray(v0, dtype=float)

    times = grid.times()
    for k in range(1, grid.n_steps + 1):
        v_prev = v_hist.snapshots[k - 1]
        load = -(ops._M @ v_prev)
        if problem.forcing is not None:
            load = load + load_vector(problem.forcing, space, times[k - 1], times[k])
        try:
            u, iterations, res = newton_step_solve(
                ops, u_hist, k, weights, coeffs, load, newton, linear)
        except NewtonError as exc:
            raise NewtonError(f"t = {times[k]:.6g}: {exc}") from exc
        u_hist.snapshots[k] = u
        u_hist.steps_completed = k
        u_hist.newton_iterations.append(iterations)
        u_hist.final_residuals.append(res)
        v_hist.snapshots[k] = (v_prev + dt * coeffs.epsilon * u) \
            / (1.0 + dt * coeffs.epsilon * coeffs.rho)
        v_hist.steps_completed = k
        if callback is not None:
            callback(k, u_hist, v_hist)
    return u_hist, v_hist
