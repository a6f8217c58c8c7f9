"""End-to-end acceptance checks for the solver and verification harness.

One test per check, in a fixed numbered order; `pytest -v` prints one
pass/fail line for each. The heavy refinement studies are shared through
module fixtures, so the Newton statistics come from the same runs that the
convergence gates inspect.

Frozen reference error magnitudes are included for some protocols. They
come from an independently produced table for the same problems and are
used for an informative side-by-side print, never for a gate: a different
mesh construction and quadrature legitimately shift absolute errors.
"""

import itertools
import time

import numpy as np
import pytest
from scipy.integrate import quad

from gbhfem.analysis import l2_error, run_study
from gbhfem.assembly import (ProblemCoefficients, advection_jacobian,
                             advection_vector, mass_matrix, reaction_jacobian,
                             reaction_vector, stiffness_matrix)
from gbhfem.kernel import build_weights, exponential, positivity_form, power_law
from gbhfem.mesh import build_structured_mesh
from gbhfem.mms import case as manufactured_case
from gbhfem.mms import case_names, exact, forcing
from gbhfem.space import NEUMANN, FemFunction, FunctionSpace, interpolate
from gbhfem.stepper import FhnCoefficients, Problem, TimeGrid, run, run_fhn

from oracles import pde_residual
from test_app import read_scalar_field
from gbhfem.app import write_vtk

# reference magnitudes for these protocols, for an informative comparison only
REFERENCE_ERRORS = {
    "smooth-exp-2d": {
        0.0: [7.21e-1, 3.54e-1, 1.74e-1, 8.62e-2, 4.29e-2],
        1.0: [6.77e-1, 3.28e-1, 1.60e-1, 7.90e-2, 3.92e-2]},
    "smooth-exp-3d": {
        0.0: [1.35, 7.40e-1, 3.71e-1, 1.83e-1],
        1.0: [1.33, 7.13e-1, 3.53e-1, 1.73e-1]},
    "singular-cubic-2d": {
        0.0: [8.04e-1, 4.14e-1, 2.09e-1, 1.05e-1, 5.26e-2],
        1.0: [8.05e-1, 4.14e-1, 2.09e-1, 1.05e-1, 5.25e-2]},
    "singular-threehalves-2d": {
        0.0: [1.44, 9.24e-1, 5.02e-1, 2.59e-1, 1.31e-1],
        1.0: [1.47, 9.35e-1, 5.06e-1, 2.60e-1, 1.32e-1]},
}


def reference_deviation(result):
    """Largest relative deviation from the reference magnitudes."""
    table = REFERENCE_ERRORS[result.case_name]
    worst = 0.0
    for eta, column in table.items():
        for row, ref in zip(result.rows, column):
            worst = max(worst, abs(row.errors[eta] / ref - 1.0))
    return worst


def gated_rates(result, start_row):
    return [row.rates[eta] for row in result.rows[start_row:]
            for eta in result.etas]


@pytest.fixture(scope="module")
def smooth_2d_study():
    start = time.perf_counter()
    result = run_study("smooth-exp-2d", (4, 8, 16, 32, 64))
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def singular_2d_studies():
    start = time.perf_counter()
    cubic = run_study("singular-cubic-2d", (4, 8, 16, 32, 64))
    threehalves = run_study("singular-threehalves-2d", (4, 8, 16, 32, 64))
    return cubic, threehalves, time.perf_counter() - start


@pytest.fixture(scope="module")
def smooth_3d_study():
    start = time.perf_counter()
    result = run_study("smooth-exp-3d", (2, 4, 8, 16))
    return result, time.perf_counter() - start


def test_01_smooth_kernel_2d_convergence(smooth_2d_study):
    result, elapsed = smooth_2d_study
    rates = gated_rates(result, start_row=2)
    deviation = reference_deviation(result)
    print(f"smooth 2D: gated rates {[f'{r:.2f}' for r in rates]}, "
          f"reference deviation {deviation:.0%} (informative), "
          f"{elapsed:.0f}s")
    assert all(0.90 <= r <= 1.10 for r in rates)
    assert elapsed <= 300.0


def test_02_singular_kernel_2d_convergence(singular_2d_studies):
    cubic, threehalves, elapsed = singular_2d_studies
    cubic_final = [cubic.rows[-1].rates[eta] for eta in cubic.etas]
    three_final = [threehalves.rows[-1].rates[eta] for eta in threehalves.etas]
    print(f"singular 2D: cubic final rates "
          f"{[f'{r:.2f}' for r in cubic_final]}, three-halves final rates "
          f"{[f'{r:.2f}' for r in three_final]}, reference deviations "
          f"{reference_deviation(cubic):.0%} / "
          f"{reference_deviation(threehalves):.0%} (informative), "
          f"{elapsed:.0f}s")
    assert all(0.90 <= r <= 1.10 for r in cubic_final)
    # the three-halves profile is still pre-asymptotic at this resolution;
    # gate the lower edge and keep a sanity ceiling
    assert all(0.90 <= r <= 1.15 for r in three_final)
    assert elapsed <= 600.0


def test_03_smooth_kernel_3d_convergence(smooth_3d_study):
    result, elapsed = smooth_3d_study
    finest = [result.rows[-1].rates[eta] for eta in result.etas]
    print(f"smooth 3D: finest-pair rates {[f'{r:.2f}' for r in finest]}, "
          f"reference deviation {reference_deviation(result):.0%} "
          f"(informative), {elapsed:.0f}s")
    assert all(0.85 <= r <= 1.15 for r in finest)
    assert elapsed <= 600.0


def test_04_memory_weight_positivity():
    kernels = [exponential(0.0), exponential(1.0),
               power_law(0.5), power_law(0.1)]
    rng = np.random.default_rng(404)
    worst = np.inf
    for kern, dt, n in itertools.product(kernels, (0.2, 0.05), (10, 100)):
        table = build_weights(kern, dt, n)
        for _ in range(200):
            a = rng.standard_normal(n)
            scale = a @ a
            form = positivity_form(table, a)
            worst = min(worst, form / scale)
            assert form >= -1e-12 * scale
    print(f"positivity: smallest normalized quadratic form {worst:.3e}")


def test_05_singular_weights_match_double_quadrature():
    dt = 0.1
    table = build_weights(power_law(0.5), dt, 25, method="analytic")

    def omega_quad(m):
        # cell average of K(t - s) computed by nested adaptive quadrature
        def inner(tau):
            lo = 0.0 if m == 0 else (m - 1) * dt + tau
            hi = tau if m == 0 else m * dt + tau
            return quad(lambda s: s ** -0.5, lo, hi,
                        epsabs=1e-14, epsrel=1e-13, limit=300)[0]
        return quad(inner, 0.0, dt,
                    epsabs=1e-14, epsrel=1e-13, limit=300)[0] / dt ** 2

    errors = {}
    for m in (0, 1, 2, 5, 20):
        reference = omega_quad(m)
        errors[m] = abs(table.w[m] - reference) / abs(reference)
        assert errors[m] <= 1e-10
    print("weight vs quadrature relative errors: "
          + ", ".join(f"m={m}: {e:.1e}" for m, e in errors.items()))


def test_06_advection_skew_identity():
    space = FunctionSpace(build_structured_mesh(2, 8))
    rng = np.random.default_rng(606)
    worst = 0.0
    for delta in (1, 2):
        coeffs = ProblemCoefficients(delta=delta)
        for _ in range(50):
            values = np.zeros(space.n_dofs)
            values[space.free_dofs()] = rng.standard_normal(
                space.free_dofs().size)
            u = FemFunction(space, values)
            b = advection_vector(u, coeffs)
            scale = np.abs(b).sum() * np.abs(values).max()
            worst = max(worst, abs(b @ values) / scale)
            assert abs(b @ values) <= 1e-12 * scale
    print(f"skew identity: worst normalized pairing {worst:.3e}")


def test_07_jacobians_match_finite_differences():
    space = FunctionSpace(build_structured_mesh(2, 8))
    rng = np.random.default_rng(707)
    step = 1e-6
    worst = 0.0
    for state in range(20):
        coeffs = ProblemCoefficients(delta=1 + state % 2)
        values = rng.uniform(-1.0, 1.0, space.n_dofs)
        for vector, jacobian in ((advection_vector, advection_jacobian),
                                 (reaction_vector, reaction_jacobian)):
            dense = jacobian(FemFunction(space, values), coeffs).dense()
            approx = np.empty_like(dense)
            for i in range(space.n_dofs):
                bump = np.zeros(space.n_dofs)
                bump[i] = step
                fp = vector(FemFunction(space, values + bump), coeffs)
                fm = vector(FemFunction(space, values - bump), coeffs)
                approx[:, i] = (fp - fm) / (2.0 * step)
            rel = np.linalg.norm(approx - dense) / np.linalg.norm(dense)
            worst = max(worst, rel)
            assert rel <= 1e-6
    print(f"jacobian consistency: worst relative error {worst:.2e}")


def test_08_newton_iteration_counts(smooth_2d_study, singular_2d_studies,
                                    smooth_3d_study):
    cubic, threehalves, _ = singular_2d_studies
    studies = [smooth_2d_study[0], cubic, threehalves, smooth_3d_study[0]]
    observed = max(row.newton_max_iters
                   for result in studies for row in result.rows)
    print(f"newton: at most {observed} iterations per step "
          f"across all refinement studies")
    assert observed <= 5


def test_09_discrete_energy_stability():
    """Gradient energy stays under the growth bound, with the dual norm of
    the forcing replaced by the larger full L2 norm (conservative check)."""
    name = "smooth-exp-2d"
    mesh = build_structured_mesh(2, 32)
    space = FunctionSpace(mesh)
    stiffness = stiffness_matrix(space).scipy()
    mass = mass_matrix(space).scipy()
    grid = TimeGrid(1.0, 32)
    zero = FemFunction(space, np.zeros(space.n_dofs))
    margins = {}
    for eta in (0.0, 1.0):
        c = manufactured_case(name, eta=eta)
        u0 = interpolate(lambda x, t: exact(c, x, t), 0.0, space)
        history = run(Problem(space=space, coeffs=c.coeffs, kernel=c.kernel,
                              grid=grid, u0=u0,
                              forcing=lambda x, t: forcing(c, x, t)))
        energy = sum(grid.dt * (u @ (stiffness @ u))
                     for u in history.snapshots[1:])
        load = sum(grid.dt * l2_error(zero,
                                      lambda x, t: forcing(c, x, t),
                                      t) ** 2
                   for t in grid.times()[1:])
        initial = history.snapshots[0] @ (mass @ history.snapshots[0])
        coeffs = c.coeffs
        growth = np.exp(coeffs.beta * (1.0 + coeffs.gamma) ** 2
                        * grid.t_final)
        bound = (load / coeffs.nu + initial) * growth
        margins[eta] = energy / bound
        assert energy <= bound
    print("stability: energy at "
          + ", ".join(f"{m:.3f}" for m in margins.values())
          + " of the admissible bound (eta = 0, 1)")


def test_10_manufactured_solutions_solve_the_pde():
    rng = np.random.default_rng(1010)
    worst = {}
    for name in case_names():
        c = manufactured_case(name, eta=1.0)
        largest = 0.0
        for _ in range(50):
            x = rng.uniform(0.05, 0.95, c.dim)
            t = rng.uniform(0.05, 1.0)
            largest = max(largest, abs(pde_residual(c, x, t)))
        worst[name] = largest
        assert largest <= 1e-9
    print("pde residuals: "
          + ", ".join(f"{k}: {v:.1e}" for k, v in worst.items()))


def test_11_excitable_media_runs_stay_bounded(tmp_path):
    mesh = build_structured_mesh(2, 32, extent=(0.0, 2.5))
    space = FunctionSpace(mesh, bc_kind=NEUMANN)
    kern = power_law(0.5)
    grid = TimeGrid(200.0, 1000)
    u0 = np.where(mesh.vertices[:, 0] < 1.25, 1.0, 0.0)
    v0 = np.where(mesh.vertices[:, 1] < 1.25, 0.1, 0.0)
    start = time.perf_counter()
    peaks = {}
    for eta, (delta, alpha) in itertools.product(
            (0.0001, 0.01, 1.0), ((1, 0.0), (1, 0.1), (2, 0.1))):
        out = tmp_path / f"eta{eta:g}_delta{delta}_alpha{alpha:g}"
        out.mkdir()
        coeffs = FhnCoefficients(alpha=alpha, delta=delta, eta=eta)
        write_vtk(mesh, {"u": u0, "v": v0}, out / "state_000000.vtk")

        def snap(k, u_hist, v_hist):
            if k % 250 == 0:
                write_vtk(mesh, {"u": u_hist.snapshots[k],
                                 "v": v_hist.snapshots[k]},
                          out / f"state_{k:06d}.vtk")

        u_hist, _ = run_fhn(Problem(space=space, coeffs=coeffs, kernel=kern,
                                    grid=grid, u0=FemFunction(space, u0)),
                            v0=v0, callback=snap)
        assert u_hist.steps_completed == grid.n_steps
        peak = float(np.abs(u_hist.snapshots).max())
        peaks[eta, delta, alpha] = peak
        assert peak <= 2.0
        snapshots = sorted(out.glob("state_*.vtk"))
        assert len(snapshots) == 5
        final = read_scalar_field(snapshots[-1], "u")
        assert final.size == space.n_dofs and np.isfinite(final).all()
    elapsed = time.perf_counter() - start
    print("excitable media: all 9 runs complete, max |u| = "
          f"{max(peaks.values()):.3f}, {elapsed:.0f}s")
