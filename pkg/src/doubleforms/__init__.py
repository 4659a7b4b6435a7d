"""Double forms, curvature invariants and conformal identities.

Modules:

- :mod:`doubleforms.dfalg`: the double-form algebra on R^n
- :mod:`doubleforms.curvinv`: curvature invariants at a point
- :mod:`doubleforms.chart`: geometry on coordinate charts by finite differences
- :mod:`doubleforms.models`: model manifolds with closed-form invariants
- :mod:`doubleforms.exprlang`: the scalar expression language
- :mod:`doubleforms.cli`: the command-line driver
"""

from .dfalg import (DegreeError, DoubleForm, DoubleFormError, contract, exterior_product, from_bilinear,
                    hodge_star, inner_product, metric_form, power, scalar_form)
from .curvinv import (ConsistencyError, CurvatureContext, gauss_bonnet, lovelock, newton_transform,
                      quadratic_invariants, random_curvature, sigma_k, space_form_curvature)

__version__ = "0.1.0"

__all__ = [
    "DegreeError", "DoubleForm", "DoubleFormError", "contract", "exterior_product", "from_bilinear",
    "hodge_star", "inner_product", "metric_form", "power", "scalar_form",
    "ConsistencyError", "CurvatureContext", "gauss_bonnet", "lovelock", "newton_transform",
    "quadratic_invariants", "random_curvature", "sigma_k", "space_form_curvature",
]
