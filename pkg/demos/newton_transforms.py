"""
Newton transforms and the sigma_k of symmetric matrices
=======================================================
"""

import numpy as np

from doubleforms import curvinv as cv
from doubleforms.dfalg import from_bilinear

rng = np.random.default_rng(3)
a = rng.standard_normal((5, 5))
h = from_bilinear(a + a.T)
eig = np.linalg.eigvalsh(h.matrix())

# sigma_k against the elementary symmetric polynomials of the eigenvalues
for k in range(6):
    coeffs = np.poly(eig)            # prod (t - lambda_i)
    print(f"sigma_{k}: {cv.sigma_k(h, k): .10f}   from eigenvalues: {(-1) ** k * coeffs[k]: .10f}")

# the explicit double-form Newton transform matches the recursive one
for k in range(4):
    lhs, rhs = cv.newton_explicit_sides(h, k)
    print(f"k={k}: explicit vs recursive residual", cv.residual(lhs, rhs))

# also for a curvature tensor
ctx = cv.random_curvature(8, 3, seed=4)
print("Newton formula residual, R, k=2:", cv.newton_formula_residual(ctx.R, 2))
print("Avez-type residual, k=2:", cv.avez_type_residual(ctx, 2))
