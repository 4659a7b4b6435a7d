"""
Gauss-Bonnet curvatures of algebraic curvature tensors
======================================================
"""

import math

from doubleforms import curvinv as cv

# round spheres: h4 grows like n!/(4 (n-4)!)
for n in (4, 5, 6):
    print(f"h4(S^{n}) =", cv.gauss_bonnet(cv.space_form_curvature(n, 1.0), 2))

# a random curvature tensor, built to satisfy the first Bianchi identity
ctx = cv.random_curvature(6, 3, seed=1)
print("scal =", ctx.scal, " Bianchi residual =", float(cv.first_bianchi_residual(ctx.R)))

# the top Lovelock tensor vanishes in even dimension
print("max |T6| on n=6:", float(abs(cv.lovelock(ctx, 3).entries).max()))

# quadratic split of h4 into Weyl and Schouten parts
q = cv.quadratic_invariants(ctx)
n = ctx.n
print("h4 =", q.h4, " |W|^2 + 2(n-2)(n-3) sigma2 =", q.weyl_norm2 + 2 * (n - 2) * (n - 3) * q.sigma2)

# products: S2 x S2 has h4 = 2
s2 = cv.space_form_curvature(2, 1.0)
print("h4(S2 x S2) =", cv.gauss_bonnet(cv.product_curvature(s2, s2), 2))

# a small S3 times a unit S2: positive h4 but negative sigma2
sig = cv.s3r_times_sp_signs(0.1, 2)
print("S3(0.1) x S2:", sig)

# a conformally flat tensor: h_{2k} is a fixed multiple of sigma_k(A)
A = cv.random_curvature(5, 3, seed=2).A
cf = cv.conformally_flat_curvature(A)
k = 2
coeff = math.factorial(5 - k) * math.factorial(k) / math.factorial(5 - 2 * k)
print("h4 =", cv.gauss_bonnet(cf, k), " coeff * sigma2(A) =", coeff * cv.sigma_k(A, k))
