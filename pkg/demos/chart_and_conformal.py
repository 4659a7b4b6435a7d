"""
Curvature from a metric given by formulas
=========================================

Finite differences on a coordinate chart, then conformal changes of the metric.
"""

import numpy as np

from doubleforms import chart as C
from doubleforms import models
from doubleforms.dfalg import metric_form

# the unit 4-sphere in stereographic coordinates
s4 = models.sphere(4)
x = np.array([0.3, -0.2, 0.1, 0.25])
fr = C.curvature_at(s4.chart(), x)
print("max |R - g^2/2| =", float(np.max(np.abs(fr.R.entries - 0.5 * metric_form(4, 2).entries))))

# order-4 stencils: halving the step cuts the error by about 16
errs = []
for step in (0.1, 0.05):
    R = C.curvature_at(s4.chart(fd_order=4, fd_step=step), x).R
    errs.append(float(np.max(np.abs(R.entries - 0.5 * metric_form(4, 2).entries))))
print("error ratio:", errs[0] / errs[1])

# a metric typed in by hand
r2 = "x1^2 + x2^2 + x3^2"
g = C.ChartMetric.from_expressions([[f"4/(1 + {r2})^2" if i == j else "0" for j in range(3)]
                                    for i in range(3)], [-1] * 3, [1] * 3, [False] * 3)
print("scal of the hand-written S^3:", C.curvature_at(g, np.zeros(3)).ctx.scal)

# conformal change on a flat 4-torus: h4 transforms by a divergence-type operator
torus = C.ChartMetric.euclidean(4, [0.0] * 4, [2 * np.pi] * 4, [True] * 4)
f = C.ScalarField.parse("0.1*sin(x1)*cos(x2)")
pts = np.random.default_rng(0).uniform(0, 2 * np.pi, (5, 4))
chk = C.conformal_h4_check(torus, f, pts)
print("conformal h4 law, max |lhs - rhs|:", float(np.max(np.abs(chk.lhs - chk.rhs))))

# the K operator on S^5 under a positive density
s5 = models.sphere(5)
ops = C.conformal_power_ops(s5.chart(), C.ScalarField.parse("1 + 0.1*x1^2"), s5.sample_points(5, seed=1))
print("K-law residuals:", ops.residual)
