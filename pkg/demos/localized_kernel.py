"""
Kernels that do not decay
=========================

The construction needs f(x) -> 0. A kernel that levels off can be
multiplied by a smooth window that is 1 up to x_c and 0 beyond
x_c + delta; the approximation is then meaningful on [0, x_c].
"""

import gmpy2
import sogkit

# 1 + 1/(1 + x^2) levels off at 1 instead of vanishing
plateau = sogkit.custom_kernel(
    "plateau", lambda x: 1 + 1 / (1 + gmpy2.square(x)), 2, decays=False)

try:
    sogkit.build_sog(plateau, sogkit.VpConfig(20))
except sogkit.InvalidInput as exc:
    print(f"refused: {exc}")

local = sogkit.localize(plateau, x_c=1, delta=1)
print("window values:", [round(float(local.window(x)), 4) for x in (0.5, 1.0, 1.5, 1.9, 2.5)])

approx = sogkit.build_sog(local, sogkit.VpConfig(40, 10))
report = sogkit.max_relative_error(approx, local, domain=(0.0, 1.0))
print(f"eps_inf on [0, 1]: {report.eps_inf:.2e}")
