"""Error norms against manufactured solutions and mesh-refinement studies.

The study error is the discrete space-time quantity

    E^2 = ||u(T) - u^N||_L2^2 + sum_{k=1}^N nu dt ||grad(u(t_k) - u^k)||_L2^2

reported as E (the square root); errors are measured against the exact
manufactured solution. Quadrature degree 5 keeps the integration error one
order below the nonlinear assembly throughout.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .assembly import _scaled_weights
from .mesh import build_structured_mesh
from .mms import case as lookup_case
from .mms import exact, exact_gradient, forcing
from .space import FemFunction, FunctionSpace, interpolate
from .stepper import Problem, TimeGrid, run

ERROR_QUAD_DEGREE = 5


def _quad_points(space: FunctionSpace, degree: int):
    lam, W = _scaled_weights(space, degree)
    verts = space.mesh.vertices[space.mesh.cells]
    pts = np.einsum("qa,cad->cqd", lam, verts)
    return lam, W, pts


def l2_error(u_h: FemFunction, exact_fn, t: float,
             degree: int = ERROR_QUAD_DEGREE) -> float:
    """|| u_h - exact(., t) ||_L2 by cellwise quadrature."""
    space = u_h.space
    lam, W, pts = _quad_points(space, degree)
    u_q = u_h.coeffs[space.mesh.cells] @ lam.T
    e_q = np.asarray(exact_fn(pts.reshape(-1, space.mesh.dim), t)).reshape(u_q.shape)
    return math.sqrt(float(np.sum(W * (u_q - e_q) ** 2)))


def h1_semi_error(u_h: FemFunction, grad_fn, t: float,
                  degree: int = ERROR_QUAD_DEGREE) -> float:
    """|| grad u_h - grad exact(., t) ||_L2; the discrete gradient is cellwise
    constant."""
    space = u_h.space
    lam, W, pts = _quad_points(space, degree)
    grad_h = np.einsum("ca,cad->cd", u_h.coeffs[space.mesh.cells],
                       space.cell_gradients)
    g_q = np.asarray(grad_fn(pts.reshape(-1, space.mesh.dim), t))
    g_q = g_q.reshape(pts.shape)
    diff = g_q - grad_h[:, None, :]
    return math.sqrt(float(np.sum(W * np.sum(diff**2, axis=-1))))


def triple_norm(history, exact_fn, grad_fn, nu: float) -> float:
    """The study error E of a completed run."""
    grid = history.grid
    if history.steps_completed != grid.n_steps:
        raise ValueError(f"history incomplete: {history.steps_completed} of "
                         f"{grid.n_steps} steps")
    space = history.space
    times = grid.times()
    total = l2_error(FemFunction(space, history.snapshots[-1]),
                     exact_fn, grid.t_final) ** 2
    for k in range(1, grid.n_steps + 1):
        g = h1_semi_error(FemFunction(space, history.snapshots[k]),
                          grad_fn, times[k])
        total += nu * grid.dt * g * g
    return math.sqrt(total)


def convergence_rate(e_coarse: float, e_fine: float,
                     h_coarse: float, h_fine: float) -> float:
    """r = log(e_coarse/e_fine) / log(h_coarse/h_fine)."""
    if min(e_coarse, e_fine, h_coarse, h_fine) <= 0.0:
        raise ValueError("rates need positive errors and mesh sizes")
    if h_coarse == h_fine:
        raise ValueError("rates need two distinct mesh sizes")
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


# ---------------------------------------------------------------------------
# refinement studies
# ---------------------------------------------------------------------------

@dataclass
class StudyRow:
    n: int
    h: float
    dt: float
    errors: dict          # eta -> E
    rates: dict           # eta -> rate, None on the coarsest row
    newton_max_iters: int
    wall_time: float


@dataclass
class StudyResult:
    case_name: str
    etas: tuple
    t_final: float
    rows: list


def run_study(case_name: str, mesh_sizes, etas=(0.0, 1.0), t_final: float = 1.0,
              dt_over_h: float = 1.0, base_coeffs=None, newton=None,
              linear=None, progress=None, dt=None) -> StudyResult:
    """One transient solve per (mesh, eta); rows ordered coarse to fine.

    The time step follows the mesh, dt = dt_over_h * h (rounded to divide
    t_final evenly), unless a fixed dt is given, which then applies to every
    mesh. Both eta columns of a row share the mesh and operators.
    """
    sizes = [int(n) for n in mesh_sizes]
    if not sizes:
        raise ValueError("need at least one mesh size")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"mesh sizes must increase strictly, got {sizes}")
    etas = tuple(float(e) for e in etas)
    if not etas:
        raise ValueError("need at least one eta value")
    if dt_over_h <= 0.0:
        raise ValueError(f"dt_over_h must be positive, got {dt_over_h}")
    if dt is not None and dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    dim = lookup_case(case_name).dim
    rows: list[StudyRow] = []
    prev: StudyRow | None = None
    for n in sizes:
        start = time.perf_counter()
        mesh = build_structured_mesh(dim, n)
        space = FunctionSpace(mesh)
        h = mesh.h
        step = dt if dt is not None else dt_over_h * h
        grid = TimeGrid(t_final, max(1, round(t_final / step)))

        errors = {}
        max_iters = 0
        for eta in etas:
            if base_coeffs is None:
                c = lookup_case(case_name, eta=eta)
            else:
                c = lookup_case(case_name, coeffs=replace(base_coeffs, eta=eta))
            u0 = interpolate(lambda x, t: exact(c, x, t), 0.0, space)
            hist = run(Problem(space=space, coeffs=c.coeffs, kernel=c.kernel,
                               grid=grid, u0=u0,
                               forcing=lambda x, t, c=c: forcing(c, x, t)),
                       newton=newton, linear=linear)
            errors[eta] = triple_norm(hist,
                                      lambda x, t, c=c: exact(c, x, t),
                                      lambda x, t, c=c: exact_gradient(c, x, t),
                                      c.coeffs.nu)
            max_iters = max(max_iters, max(hist.newton_iterations))
        rates = {eta: None for eta in etas}
        if prev is not None:
            rates = {eta: convergence_rate(prev.errors[eta], errors[eta],
                                           prev.h, h) for eta in etas}
        row = StudyRow(n=n, h=h, dt=grid.dt, errors=errors, rates=rates,
                       newton_max_iters=max_iters,
                       wall_time=time.perf_counter() - start)
        rows.append(row)
        prev = row
        if progress is not None:
            progress(row)
    return StudyResult(case_name=case_name, etas=etas, t_final=t_final,
                       rows=rows)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _eta_tag(eta: float) -> str:
    return f"{eta:g}"


def write_csv(result: StudyResult, path) -> None:
    """Machine-readable table, full float precision."""
    header = ["n", "h", "dt"]
    for eta in result.etas:
        header += [f"error_eta{_eta_tag(eta)}", f"rate_eta{_eta_tag(eta)}"]
    header += ["newton_max_iters", "wall_time"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in result.rows:
            rec = [row.n, f"{row.h:.17g}", f"{row.dt:.17g}"]
            for eta in result.etas:
                rec.append(f"{row.errors[eta]:.17g}")
                rate = row.rates[eta]
                rec.append("" if rate is None else f"{rate:.17g}")
            rec += [row.newton_max_iters, f"{row.wall_time:.3f}"]
            writer.writerow(rec)


def format_sci(x: float) -> str:
    """Mantissa-exponent form used in the printed tables, e.g. 7.21(-01)."""
    if x == 0.0:
        return "0.00(+00)"
    exp = int(math.floor(math.log10(abs(x))))
    mant = x / 10.0**exp
    # rounding the mantissa display can push it to 10.00; renormalize
    if abs(mant) >= 9.995:
        mant /= 10.0
        exp += 1
    return f"{mant:.2f}({exp:+03d})"


def format_table(result: StudyResult) -> str:
    """Aligned plain-text table, one block row per mesh."""
    cols = ["n", "h"]
    for eta in result.etas:
        cols += [f"error(eta={_eta_tag(eta)})", "rate"]
    widths = [6, 10] + [14, 6] * len(result.etas)
    lines = [f"case {result.case_name}, T = {result.t_final:g}, dt = h*const"]
    lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip())
    for row in result.rows:
        rec = [str(row.n), f"{row.h:.4e}"]
        for eta in result.etas:
            rec.append(format_sci(row.errors[eta]))
            rate = row.rates[eta]
            rec.append("-" if rate is None else f"{rate:.2f}")
        lines.append("  ".join(c.ljust(w) for c, w in zip(rec, widths)).rstrip())
    return "\n".join(lines) + "\n"
