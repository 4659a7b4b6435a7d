"""
Integral identities on flat tori
================================

The trapezoid rule is spectrally accurate for smooth periodic integrands.
"""

import numpy as np

from doubleforms import chart as C

torus = C.ChartMetric.euclidean(4, [0.0] * 4, [2 * np.pi] * 4, [True] * 4)

# volume and a simple mean
print("vol(T4) =", C.integrate(torus, C.ScalarField.constant(1.0), 4), " (2pi)^4 =", (2 * np.pi) ** 4)
for res in (4, 8, 16):
    print(res, C.integrate(torus, C.ScalarField.parse("exp(cos(x1))"), res))

# the full suite of integral identities for one test function
for row in C.integral_identity_suite(torus, C.ScalarField.parse("sin(x1)*sin(x2)"), 16):
    print(f"{row.identity:28s} {row.status:15s} {row.residual:.2e}")
