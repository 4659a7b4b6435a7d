"""
Double forms as subset-indexed arrays
=====================================

A (p,q) double form on R^n is stored as a C(n,p) x C(n,q) array.
"""

import numpy as np
from doubleforms.dfalg import (contract, exterior_product, from_bilinear, hodge_star,
                               inner_product, metric_form, power)

n = 4
g = metric_form(n)
print("g is a", g.bidegree, "form; g^4 / 4! =", float(power(g, 4).entries[0, 0]) / 24)

# a symmetric bilinear form, promoted to a (1,1) double form
rng = np.random.default_rng(0)
a = rng.standard_normal((n, n))
h = from_bilinear(a + a.T)

# the product is commutative on even total degree
hg = exterior_product(h, g)
print("h.g == g.h:", np.allclose(hg.entries, exterior_product(g, h).entries))

# contracting g^k recovers a multiple of g^(k-1)
print("c(g^2) = 2(n-1) g:", np.allclose(contract(power(g, 2)).entries, 2 * (n - 1) * g.entries))

# the star is an isometry, and squares to the identity on (p,p) forms
hs = hodge_star(h)
print("|*h|^2 - |h|^2 =", inner_product(hs, hs) - inner_product(h, h))
print("**h == h:", np.allclose(hodge_star(hs).entries, h.entries))

# det h appears as h^n / n!
print("h^4/4! =", float(power(h, 4).entries[0, 0]) / 24, " det =", np.linalg.det(h.matrix()))
