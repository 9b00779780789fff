"""
A first sum-of-Gaussians approximation
======================================

Approximate the inverse multiquadric 1/sqrt(1/2 + x^2) by 40 Gaussians,
look at the weights, then compress the sum to 12 Gaussians.
"""

import math

from gmpy2 import mpfr

import sogkit
from sogkit.numerics import workprec

kernel = sogkit.imq_kernel()

# n = 20 gives p = 40 Gaussians with exponents j/5, j = 0..39
config = sogkit.VpConfig(n=20, n_c=5)
approx = sogkit.build_sog(kernel, config)
print(f"working precision: {approx.bits} bits")
print(f"smallest bandwidth s_min = {float(approx.s_min):.4f} (sqrt(5/39) = {math.sqrt(5 / 39):.4f})")

# the weights are enormous and alternate in sign; they cancel to O(1) values
print(f"largest weight |w| = {float(approx.w_max):.3e}")

# so evaluation has to happen at the working precision
with workprec(approx.bits):
    for x in ("0", "0.5", "1"):
        fx = kernel.eval(mpfr(x))
        print(f"x={x:>4}  f={float(fx):.10f}  f_p - f = {float(sogkit.evaluate(approx, mpfr(x)) - fx):+.2e}")

report = sogkit.max_relative_error(approx)
print(f"eps_inf on 1000 random points in [0,1]: {report.eps_inf:.3e}")

# balanced truncation keeps 12 (complex) Gaussians with small weights
reduced = sogkit.reduce(approx, q=12)
print(f"q={reduced.q}: largest weight {float(reduced.w_max):.3f}, "
      f"s_q = {float(reduced.s_min):.3f}, complex pairs {reduced.complex_pairs}")
print(f"eps_inf after reduction: {sogkit.max_relative_error(reduced).eps_inf:.3e}")

# these weights survive a trip through float64
for w, t in reduced.float_terms()[:4]:
    print(f"  w={w:.6g}  t={t:.6g}")
