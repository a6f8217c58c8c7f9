"""Independent cross-checks shared by the test modules.

Everything here rederives values on its own terms: forcing terms by symbolic
differentiation (including the memory convolution, which sympy integrates
from scratch), and memory convolutions by adaptive quadrature under the
substitution sigma = tau^2 that removes the inverse-square-root endpoint.
"""
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy import integrate

from gbhfem.kernel import Exponential, PowerLaw
from gbhfem.mms import CubicPoly, ExpDecay, ManufacturedCase, ThreeHalves, forcing

_TEMPORAL = {
    ExpDecay: lambda t: sp.exp(-t),
    CubicPoly: lambda t: t**3 - t**2 + 1,
    ThreeHalves: lambda t: t * sp.sqrt(t),
}


def _symbolic_kernel(case, t, s):
    v = case.kernel.variant
    if isinstance(v, Exponential):
        return sp.exp(-sp.nsimplify(v.rate) * (t - s))
    if isinstance(v, PowerLaw):
        return (t - s) ** (sp.nsimplify(v.alpha) - 1)
    raise ValueError(f"no symbolic form for {v!r}")


@lru_cache(maxsize=None)
def _symbolic_terms(case: ManufacturedCase):
    """Lambdified PDE pieces (u_t, advection, laplacian, laplacian of the
    spatial factor, reaction) plus the full forcing, all derived by sympy."""
    t = sp.symbols("t", positive=True)
    xs = sp.symbols(f"x0:{case.dim}", positive=True)
    w = case.spatial.frequency * sp.pi
    g = _TEMPORAL[type(case.temporal)](t)
    phi = sp.prod([sp.sin(w * xi) for xi in xs])
    u = g * phi
    c = case.coeffs
    d = sp.Integer(c.delta)
    gamma = sp.nsimplify(c.gamma)

    u_t = sp.diff(u, t)
    adv = u**d * sum(sp.diff(u, xi) for xi in xs)
    lap = sum(sp.diff(u, xi, 2) for xi in xs)
    lap_phi = sum(sp.diff(phi, xi, 2) for xi in xs)
    reac = u * (1 - u**d) * (u**d - gamma)

    f = u_t + sp.nsimplify(c.alpha) * adv - sp.nsimplify(c.nu) * lap \
        - sp.nsimplify(c.beta) * reac
    if c.eta != 0.0:
        s = sp.symbols("s", positive=True)
        conv = sp.integrate(_symbolic_kernel(case, t, s) * g.subs(t, s), (s, 0, t))
        f -= sp.nsimplify(c.eta) * lap_phi * conv

    args = (*xs, t)
    lam = lambda expr: sp.lambdify(args, expr, modules="numpy")
    return lam(u_t), lam(adv), lam(lap), lam(lap_phi), lam(reac), lam(f)


def symbolic_forcing(case: ManufacturedCase, point, t: float) -> float:
    return float(_symbolic_terms(case)[5](*point, t))


def quadrature_convolution(case: ManufacturedCase, t: float) -> float:
    """(K * g)(t) by adaptive quadrature alone, no closed forms."""
    if t == 0.0:
        return 0.0
    K = case.kernel.variant
    g = case.temporal
    if isinstance(K, PowerLaw):
        a = K.alpha
        val, err = integrate.quad(
            lambda tau: 2.0 * tau ** (2.0 * a - 1.0) * float(g(t - tau * tau)),
            0.0, np.sqrt(t), epsabs=1e-13, epsrel=1e-12, limit=400)
        return K.scale * val
    val, err = integrate.quad(lambda s: float(K(t - s)) * float(g(s)), 0.0, t,
                              epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def pde_residual(case: ManufacturedCase, point, t: float) -> float:
    """Exact solution and packaged forcing pushed through the strong equation,
    every derivative symbolic and the memory term integrated numerically."""
    u_t, adv, lap, lap_phi, _reac, _f = _symbolic_terms(case)
    c = case.coeffs
    reac = _reac(*point, t)
    r = u_t(*point, t) + c.alpha * adv(*point, t) - c.nu * lap(*point, t) \
        - c.beta * reac
    if c.eta != 0.0:
        r -= c.eta * lap_phi(*point, t) * quadrature_convolution(case, t)
    return float(r - forcing(case, np.asarray(point, dtype=float), t))
