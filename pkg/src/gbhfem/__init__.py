"""Finite element solver for the generalized Burgers-Huxley equation with
weakly singular memory kernels: P1 elements, backward Euler, positive memory
quadrature, manufactured-solution verification, and a FitzHugh-Nagumo demo."""

from .analysis import (StudyResult, StudyRow, convergence_rate, format_table,
                       h1_semi_error, l2_error, run_study, triple_norm,
                       write_csv)
from .app import RunConfig, main, parse_config, serialize_config, write_vtk
from .assembly import ProblemCoefficients
from .kernel import (Exponential, KernelSpec, PowerLaw, WeightTable,
                     build_weights, convolve_exact, exponential, no_kernel,
                     positivity_form, power_law)
from .linalg import LinearSolverConfig, SparseMatrix, solve, spmv
from .mesh import Mesh, build_structured_mesh, cell_geometry
from .mms import ManufacturedCase, case_names
from .space import (DIRICHLET, NEUMANN, FemFunction, FunctionSpace,
                    QuadratureRule, eval_in_cell, interpolate, quadrature)
from .stepper import (FhnCoefficients, NewtonConfig, NewtonError, Problem,
                      TimeGrid, TimeHistory, run, run_fhn)

__version__ = "0.1.0"

__all__ = [
    "DIRICHLET", "Exponential", "FemFunction", "FhnCoefficients",
    "FunctionSpace", "KernelSpec", "LinearSolverConfig", "ManufacturedCase",
    "Mesh", "NEUMANN", "NewtonConfig", "NewtonError", "PowerLaw", "Problem",
    "ProblemCoefficients", "QuadratureRule", "RunConfig", "SparseMatrix",
    "StudyResult", "StudyRow", "TimeGrid", "TimeHistory", "WeightTable",
    "build_structured_mesh", "build_weights", "case_names", "cell_geometry",
    "convergence_rate", "convolve_exact", "eval_in_cell", "exponential",
    "format_table", "h1_semi_error", "interpolate", "l2_error", "main",
    "no_kernel", "parse_config", "positivity_form", "power_law", "quadrature",
    "run", "run_fhn", "run_study", "serialize_config", "solve", "spmv",
    "triple_norm", "write_csv", "write_vtk",
]
