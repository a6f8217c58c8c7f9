"""
Quadrature weights for memory kernels
=====================================

The integro-differential term couples every new time step to the whole
history through a kernel K. The discrete convolution uses averaged double
integrals of K over time-step cells, computed here from the kernel's double
primitive. This script shows the weight tables for the three kernel
families, the exact row-sum identity, and the positivity of the quadratic
form that makes the scheme provably stable.
"""

import numpy as np

from gbhfem import build_weights, exponential, positivity_form, power_law
from gbhfem.kernel import PowerTime, convolve_exact

dt, n = 0.1, 8

# The constant kernel K = 1 gives the classic pattern: half weight on the
# newest cell (a triangle, not a square), unit weight on the rest.
table = build_weights(exponential(0.0), dt, n)
print("K = 1       ", np.array2string(table.w, precision=3))

# The weakly singular kernel 1 / sqrt(t) concentrates weight at small lags.
singular = build_weights(power_law(0.5), dt, n)
print("K = t^-1/2  ", np.array2string(singular.w, precision=3))

# A decaying kernel forgets, so the tail weights shrink.
print("K = e^-t    ",
      np.array2string(build_weights(exponential(1.0), dt, n).w, precision=3))

# Row sums telescope exactly, whatever the kernel: sum_j omega_kj * dt
# equals the increment of the double primitive of K over the newest cell,
# and that double primitive is the convolution of K with t.
k = n
row = sum(singular.omega(k, j) * dt for j in range(1, k + 1))


def k2(t):
    return convolve_exact(power_law(0.5), PowerTime(1.0), t)


exact_row = (k2(k * dt) - k2((k - 1) * dt)) / dt
print(f"row sum {row:.12f} vs double-primitive increment {exact_row:.12f}")

# The memory quadrature is positive: the double-sum quadratic form stays
# nonnegative for any real sequence. This is the discrete version of the
# sign condition that keeps the memory term dissipative.
rng = np.random.default_rng(7)
worst = min(positivity_form(singular, rng.standard_normal(n))
            for _ in range(1000))
print(f"smallest quadratic form over 1000 random sequences: {worst:.3e}")
