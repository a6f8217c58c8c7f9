"""Manufactured solutions u(x,t) = g(t) prod_i sin(w pi x_i) and their forcing.

The separable form keeps every term of the forcing closed-form: the Laplacian
is a multiple of u itself, so the memory convolution reduces to the scalar
integral (K * g)(t), taken from the exact-convolution table in the kernel
module. Pairs without a closed form fall back to adaptive quadrature (logged
once per pairing).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .assembly import ProblemCoefficients
from .kernel import (ExpTime, KernelSpec, Poly, PowerTime, convolve_exact,
                     convolve_numeric, exponential, power_law)

log = logging.getLogger(__name__)

_FALLBACK_TOL = 1e-10


@dataclass(frozen=True)
class SinePi:
    """Spatial factor prod_i sin(frequency pi x_i); zero on the box boundary."""

    frequency: int = 1

    def __post_init__(self):
        if self.frequency not in (1, 2):
            raise ValueError(f"frequency must be 1 or 2, got {self.frequency}")

    def product(self, x: np.ndarray) -> np.ndarray:
        return np.prod(np.sin(self.frequency * np.pi * x), axis=-1)

    def partials(self, x: np.ndarray) -> np.ndarray:
        """All first partials, shape (n, dim)."""
        w = self.frequency * np.pi
        s = np.sin(w * x)
        c = np.cos(w * x)
        out = np.empty_like(x)
        for i in range(x.shape[-1]):
            rest = np.prod(np.delete(s, i, axis=-1), axis=-1)
            out[..., i] = w * c[..., i] * rest
        return out


@dataclass(frozen=True)
class ExpDecay:
    """g(t) = e^-t."""

    def __call__(self, t):
        return np.exp(-np.asarray(t, dtype=float))

    def derivative(self, t):
        return -np.exp(-np.asarray(t, dtype=float))

    def profile(self):
        return ExpTime(1.0)


@dataclass(frozen=True)
class CubicPoly:
    """g(t) = t^3 - t^2 + 1; starts at 1 with two vanishing derivatives at 0."""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return t**3 - t**2 + 1.0

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return 3.0 * t**2 - 2.0 * t

    def profile(self):
        return Poly((1.0, 0.0, -1.0, 1.0))


@dataclass(frozen=True)
class ThreeHalves:
    """g(t) = t^(3/2); continuous first derivative, singular second one."""

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** 1.5

    def derivative(self, t):
        return 1.5 * np.sqrt(np.asarray(t, dtype=float))

    def profile(self):
        return PowerTime(1.5)


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    spatial: SinePi
    temporal: object
    dim: int
    kernel: KernelSpec
    coeffs: ProblemCoefficients

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")


@lru_cache(maxsize=None)
def _convolution_mode(kernel: KernelSpec, profile) -> str:
    if kernel.is_none:
        return "exact"
    try:
        convolve_exact(kernel, profile, 1.0)
        return "exact"
    except ValueError:
        log.warning("no closed-form convolution for %r against %r; "
                    "falling back to adaptive quadrature", kernel.variant, profile)
        return "numeric"


def _memory_convolution(case: ManufacturedCase, t: float) -> float:
    profile = case.temporal.profile()
    if _convolution_mode(case.kernel, profile) == "exact":
        return convolve_exact(case.kernel, profile, t)
    return convolve_numeric(case.kernel, case.temporal, t, tol=_FALLBACK_TOL)


def _points(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def exact(case: ManufacturedCase, x, t: float):
    """u(x, t); x a single point or an (n, dim) block."""
    pts, single = _points(x)
    vals = float(case.temporal(t)) * case.spatial.product(pts)
    return float(vals[0]) if single else vals


def exact_gradient(case: ManufacturedCase, x, t: float):
    pts, single = _points(x)
    grad = float(case.temporal(t)) * case.spatial.partials(pts)
    return grad[0] if single else grad


def forcing(case: ManufacturedCase, x, t: float):
    """The source that makes u solve the equation: moving every term of

        u_t + alpha u^d sum_i du/dx_i - nu Lap u - eta (K * Lap u)
            = beta u (1 - u^d)(u^d - gamma) + f

    to the right-hand side. Lap u = -(dim) (w pi)^2 u for this separable family,
    so the memory term is the scalar convolution (K * g)(t) times the spatial
    factor."""
    pts, single = _points(x)
    c = case.coeffs
    w = case.spatial.frequency * np.pi
    lap_factor = case.dim * w * w

    g = float(case.temporal(t))
    g_dot = float(case.temporal.derivative(t))
    phi = case.spatial.product(pts)
    u = g * phi

    f = g_dot * phi
    f += c.alpha * u**c.delta * g * case.spatial.partials(pts).sum(axis=-1)
    f += c.nu * lap_factor * u
    if c.eta != 0.0:
        f += c.eta * lap_factor * phi * _memory_convolution(case, t)
    f -= c.beta * u * (1.0 - u**c.delta) * (u**c.delta - c.gamma)
    return float(f[0]) if single else f


# ---------------------------------------------------------------------------
# named cases
# ---------------------------------------------------------------------------

# family -> (temporal factor, kernel, sine frequency)
_FAMILIES = {
    "smooth-exp": (ExpDecay(), exponential(1.0), 1),
    "singular-cubic": (CubicPoly(), power_law(0.5), 1),
    "singular-threehalves": (ThreeHalves(), power_law(0.5), 2),
}


def case_names() -> list[str]:
    return [f"{family}-{d}d" for family in _FAMILIES for d in (2, 3)]


def case(name: str, eta: float = 0.0,
         coeffs: ProblemCoefficients | None = None) -> ManufacturedCase:
    """Look up a study case by name, e.g. 'smooth-exp-2d'.

    eta sets the memory coupling in the default coefficient set; a full
    coefficient object overrides it entirely.
    """
    family, sep, dim_tag = name.rpartition("-")
    if family not in _FAMILIES or dim_tag not in ("2d", "3d"):
        raise ValueError(f"unknown case {name!r}; choose from {case_names()}")
    temporal, kernel, frequency = _FAMILIES[family]
    if coeffs is None:
        coeffs = ProblemCoefficients(eta=eta)
    return ManufacturedCase(name=name, spatial=SinePi(frequency),
                            temporal=temporal, dim=int(dim_tag[0]),
                            kernel=kernel, coeffs=coeffs)
