"""
Accuracy against the number of Gaussians and the bandwidth
==========================================================

Two sweeps. First p grows while n_c = ceil(n/4) keeps the smallest
bandwidth near 1/sqrt(8). Then p is fixed and n_c varies, which moves
the smallest bandwidth. The CSV text is what a plotting tool would read.
"""

from fractions import Fraction

import sogkit
from sogkit.diagnostics import fit_loglog

narrow = sogkit.gaussian_kernel(h=Fraction(1, 10))
imq = sogkit.imq_kernel()

# the narrow Gaussian needs more than 100 terms before it converges quickly
by_order = sogkit.sweep_p(narrow, [25, 50, 100, 150])
print(by_order.to_csv(timing=False))

# the smooth IMQ kernel converges algebraically at a fixed n_c
imq_order = sogkit.sweep_p(imq, [16, 32, 64, 128], n_c_policy=4)
slope, _ = fit_loglog(imq_order.column("p"), imq_order.column("eps_inf"), discard=1)
print(f"IMQ: eps_inf ~ p^{slope:.2f}\n")

# at fixed p = 40 a smaller bandwidth helps the narrow Gaussian and barely matters for IMQ
for kernel in (narrow, imq):
    sweep = sogkit.sweep_bandwidth(kernel, 20, [1, 2, 4, 6, 8, 10])
    print(kernel.name)
    for row in sweep.rows:
        print(f"  s_min={row.s_min:.3f}  eps_inf={row.eps_inf:.2e}  w_max={row.w_max:.2e}")
