"""
Compressing 100 Gaussians
=========================

Build 100-term approximations of the inverse multiquadric and of the
Matern kernel with nu = 2, then reduce each to 90, 70, 50, 30 and 10 terms.
Runs for a few minutes: balancing a 99-state system at 856 bits is the
expensive step, and it happens once per kernel.
"""

import sogkit
from sogkit.diagnostics import reduction_table

for kernel in (sogkit.imq_kernel(), sogkit.matern_kernel(nu=2)):
    table = reduction_table(kernel, n=50, n_c=13)
    print(table.format())

    # the Hankel singular values explain how far each kernel compresses
    sigma = table.sigma
    print("Hankel singular values sigma_k / sigma_1 at k = 10, 30, 50, 70, 90:")
    print("  " + "  ".join(f"{sigma[k - 1] / sigma[0]:.1e}" for k in (10, 30, 50, 70, 90)))
    print()
