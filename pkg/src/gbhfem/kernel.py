"""Memory kernels, their quadrature weights, and exact convolutions.

The time-stepping scheme needs the averaged double integrals

    omega_kj = dt^-2 int_{t_{k-1}}^{t_k} int_{t_{j-1}}^{min(t, t_j)} K(t-s) ds dt

which on a uniform grid depend only on m = k - j. Writing K2 for the double
primitive of K (K2'' = K, K2(0) = K2'(0) = 0) they collapse to second
differences,

    omega_kk = K2(dt) / dt^2
    omega_kj = [K2((m+1)dt) - 2 K2(m dt) + K2((m-1)dt)] / dt^2,  m = k - j >= 1

so one 1D array indexed by m covers the whole lower triangle. Supported
kernels are nonnegative and nonincreasing, which keeps the quadratic form of
the memory term nonnegative; sign-changing kernels are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma as _gamma


# ---------------------------------------------------------------------------
# kernel variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """K(t) = t^(alpha-1), or t^(alpha-1)/Gamma(alpha) when normalized.

    alpha = 1/2 unnormalized gives K(t) = 1/sqrt(t); alpha = 1 the constant 1.
    """

    alpha: float
    normalized: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"power-law exponent alpha must lie in (0, 1], got {self.alpha}")

    @property
    def scale(self) -> float:
        return 1.0 / _gamma(self.alpha) if self.normalized else 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * t ** (self.alpha - 1.0)

    def primitive(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * t ** self.alpha / self.alpha

    def double_primitive(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        a = self.alpha
        return self.scale * sigma ** (a + 1.0) / (a * (a + 1.0))


@dataclass(frozen=True)
class Exponential:
    """K(t) = e^(-rate t); rate 0 is the constant kernel K = 1."""

    rate: float

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError(f"exponential rate must be >= 0, got {self.rate}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-self.rate * t)

    def primitive(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return t.copy()
        return -np.expm1(-self.rate * t) / self.rate

    def double_primitive(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        lam = self.rate
        if lam == 0.0:
            return 0.5 * sigma**2
        return sigma / lam + np.expm1(-lam * sigma) / lam**2


@dataclass(frozen=True)
class KernelSpec:
    """A memory kernel; variant None means no memory term at all."""

    variant: PowerLaw | Exponential | None

    def __call__(self, t):
        if self.variant is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.variant(t)

    @property
    def is_none(self) -> bool:
        return self.variant is None


def power_law(alpha: float, normalized: bool = False) -> KernelSpec:
    return KernelSpec(PowerLaw(alpha, normalized))


def exponential(rate: float) -> KernelSpec:
    return KernelSpec(Exponential(rate))


def no_kernel() -> KernelSpec:
    return KernelSpec(None)


# ---------------------------------------------------------------------------
# quadrature weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightTable:
    """Lower-triangular weights omega_kj stored by lag m = k - j.

    omega(k, j) = w[k - j]; w[0] is the diagonal entry. Nonnegative for every
    supported kernel.
    """

    dt: float
    n_steps: int
    w: np.ndarray
    method: str  # analytic | numeric

    def omega(self, k: int, j: int) -> float:
        if not 1 <= j <= k <= self.n_steps:
            raise IndexError(f"need 1 <= j <= k <= {self.n_steps}, got k={k} j={j}")
        return float(self.w[k - j])


def build_weights(kernel: KernelSpec, dt: float, n_steps: int,
                  method: str = "auto") -> WeightTable:
    """Quadrature weights of the memory term for a uniform step dt.

    method 'auto' takes the closed form whenever the kernel provides a double
    primitive and falls back to numerical integration otherwise; 'numeric'
    forces the fallback (used for cross-checks).
    """
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    if n_steps < 1:
        raise ValueError(f"need at least one step, got {n_steps}")
    if method not in ("auto", "analytic", "numeric"):
        raise ValueError(f"unknown weight method {method!r}")

    if kernel.is_none:
        return WeightTable(dt=dt, n_steps=n_steps,
                           w=np.zeros(n_steps), method="analytic")

    variant = kernel.variant
    if method in ("auto", "analytic"):
        if not hasattr(variant, "double_primitive"):
            if method == "analytic":
                raise ValueError(f"no closed-form weights for {variant!r}")
        else:
            sigma = np.arange(n_steps + 1) * dt
            k2 = variant.double_primitive(sigma)
            w = np.empty(n_steps)
            w[0] = k2[1] / dt**2
            if n_steps > 1:
                w[1:] = (k2[2:] - 2.0 * k2[1:-1] + k2[:-2]) / dt**2
            return WeightTable(dt=dt, n_steps=n_steps, w=w, method="analytic")

    w = _weights_numeric(variant, dt, n_steps)
    return WeightTable(dt=dt, n_steps=n_steps, w=w, method="numeric")


def _weights_numeric(K, dt: float, n_steps: int) -> np.ndarray:
    """Weights by integrating in sigma = t - s, which removes the diagonal
    singularity: the double integral over a step block is a 1D integral of
    K(sigma) against the overlap length of the block at lag sigma."""
    w = np.empty(n_steps)
    val, _ = integrate.quad(lambda s: K(s) * (dt - s), 0.0, dt,
                            epsabs=1e-14, epsrel=1e-12, limit=400)
    w[0] = val / dt**2
    for m in range(1, n_steps):
        # tent profile dt - |sigma - m dt| on ((m-1) dt, (m+1) dt)
        lo, mid, hi = (m - 1) * dt, m * dt, (m + 1) * dt
        v1, _ = integrate.quad(lambda s: K(s) * (s - lo), lo, mid,
                               epsabs=1e-14, epsrel=1e-12, limit=400)
        v2, _ = integrate.quad(lambda s: K(s) * (hi - s), mid, hi,
                               epsabs=1e-14, epsrel=1e-12, limit=400)
        w[m] = (v1 + v2) / dt**2
    return w


def positivity_form(table: WeightTable, a) -> float:
    """The quadratic form sum_k (sum_{j<=k} omega_kj dt a_j) a_k."""
    a = np.asarray(a, dtype=float)
    if a.shape != (table.n_steps,):
        raise ValueError(f"sequence length {a.shape} does not match n_steps={table.n_steps}")
    inner = np.convolve(table.w, a)[:table.n_steps] * table.dt
    return float(inner @ a)


# ---------------------------------------------------------------------------
# exact convolutions for manufactured forcings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerTime:
    """g(t) = t^exponent, exponent >= 0 (half-integers welcome)."""

    exponent: float

    def __post_init__(self):
        if self.exponent < 0.0:
            raise ValueError(f"exponent must be >= 0, got {self.exponent}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.exponent == 0.0:
            return np.ones_like(t)
        return t ** self.exponent


@dataclass(frozen=True)
class ExpTime:
    """g(t) = e^(-rate t)."""

    rate: float

    def __call__(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Poly:
    """g(t) = sum_i coefficients[i] t^i."""

    coefficients: tuple

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c in reversed(self.coefficients):
            out = out * t + c
        return out


def convolve_exact(kernel: KernelSpec, profile, t: float) -> float:
    """Closed-form (K * g)(t) = int_0^t K(t-s) g(s) ds.

    Power-law kernels pair with powers through the Beta identity
    int_0^t (t-s)^(a-1) s^m ds = t^(m+a) Gamma(a) Gamma(m+1) / Gamma(m+a+1);
    exponential kernels pair with exponentials and integer powers. Raises
    for combinations without a closed form.
    """
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    if kernel.is_none:
        return 0.0
    if t == 0.0:
        return 0.0
    variant = kernel.variant

    if isinstance(variant, PowerLaw):
        a = variant.alpha
        if isinstance(profile, PowerTime):
            m = profile.exponent
            return variant.scale * t ** (m + a) * _gamma(a) * _gamma(m + 1.0) / _gamma(m + a + 1.0)
        if isinstance(profile, Poly):
            acc = 0.0
            for i, c in enumerate(profile.coefficients):
                if c == 0.0:
                    continue
                acc += c * t ** (i + a) * _gamma(a) * _gamma(i + 1.0) / _gamma(i + a + 1.0)
            return variant.scale * acc
        raise ValueError(f"no closed form for power-law kernel with {type(profile).__name__}")

    if isinstance(variant, Exponential):
        lam = variant.rate
        if isinstance(profile, ExpTime):
            mu = profile.rate
            if lam == mu:
                return t * math.exp(-lam * t)
            return (math.exp(-mu * t) - math.exp(-lam * t)) / (lam - mu)
        if isinstance(profile, PowerTime) and float(profile.exponent).is_integer():
            return _exp_power_convolution(lam, int(profile.exponent), t)
        if isinstance(profile, Poly):
            return sum(c * _exp_power_convolution(lam, i, t)
                       for i, c in enumerate(profile.coefficients) if c != 0.0)
        raise ValueError(f"no closed form for exponential kernel with {type(profile).__name__}")

    raise ValueError(f"unsupported kernel variant {variant!r}")


def _exp_power_convolution(lam: float, m: int, t: float) -> float:
    # int_0^t e^{-lam (t-s)} s^m ds by repeated integration by parts
    if lam == 0.0:
        return t ** (m + 1) / (m + 1)
    acc = 0.0
    for i in range(m + 1):
        acc += (-1.0) ** i * math.factorial(m) / math.factorial(m - i) \
            * t ** (m - i) / lam ** (i + 1)
    acc += (-1.0) ** (m + 1) * math.factorial(m) / lam ** (m + 1) * math.exp(-lam * t)
    return acc


def convolve_numeric(kernel: KernelSpec, g, t: float, tol: float = 1e-12) -> float:
    """(K * g)(t) by adaptive quadrature; reference path for arbitrary g.

    Splits at t/2 so the kernel singularity at s = t and any nonsmoothness of
    g at s = 0 land in separate panels; the singular panel uses the
    algebraic-weight rule.
    """
    if t == 0.0:
        return 0.0
    if kernel.is_none:
        return 0.0
    variant = kernel.variant
    if isinstance(variant, PowerLaw) and variant.alpha < 1.0:
        mid = 0.5 * t
        smooth, _ = integrate.quad(lambda s: variant(t - s) * g(s), 0.0, mid,
                                   epsabs=tol, epsrel=tol, limit=400)
        singular, _ = integrate.quad(lambda s: g(s), mid, t,
                                     weight="alg", wvar=(0.0, variant.alpha - 1.0),
                                     epsabs=tol, epsrel=tol, limit=400)
        return smooth + variant.scale * singular
    val, _ = integrate.quad(lambda s: variant(t - s) * g(s), 0.0, t,
                            epsabs=tol, epsrel=tol, limit=400)
    return val
