"""
Error at the origin
===================

At x = 0 the approximation is the plain sum of the damped cosine
coefficients, so its error can be tracked to large n cheaply. A kernel
with a corner at the origin (e^{-x}) converges like 1/n; a smooth one
(the inverse multiquadric) like 1/n^2.
"""

import math

import sogkit

for kernel in (sogkit.exponential_kernel(), sogkit.imq_kernel()):
    fit = sogkit.rate_at_zero(kernel, [16, 32, 64, 128, 256], n_c=4)
    print(f"{kernel.name}: slope {fit.slope:.3f}")
    for n, err in zip(fit.n_list, fit.errors):
        print(f"  n={n:4d}  f_p(0) - f(0) = {err:+.3e}")

# for e^{-x} the error is (ln 2/(n pi)) sqrt(n_c) in size; f_p(0) lies below f(0)
n = 256
print(f"predicted size at n={n}: {math.log(2) / (n * math.pi) * 2:.3e}")
