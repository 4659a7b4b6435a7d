"""Model manifolds with chart presentations and closed-form invariants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .chart import ChartMetric
from .curvinv import CurvatureContext, product_curvature, space_form_curvature
from .dfalg import MAX_DIM

__all__ = ["ModelManifold", "space_form", "sphere", "flat_torus", "product", "build_model", "MODEL_NAMES"]

MAX_CHART_DIM = 6


@dataclass(frozen=True)
class ModelManifold:
    """A named model: a chart constructor, an exact pointwise curvature and an oracle table.

    ``oracles`` maps names such as ``"h4"``, ``"sigma2"``, ``"scal"``,
    ``"ric_eigenvalues"`` and ``"T2_eigenvalues"`` to exact values.
    """

    name: str
    n: int
    params: dict
    make_chart: Callable[..., ChartMetric]
    make_context: Callable[[], CurvatureContext]
    oracles: dict = field(default_factory=dict)
    homogeneous: bool = True

    def chart(self, **fd) -> ChartMetric:
        return self.make_chart(**fd)

    def context(self) -> CurvatureContext:
        return self.make_context()

    def sample_points(self, count: int, seed: int = 0) -> np.ndarray:
        """Interior points of the chart box, kept away from the faces."""
        chart = self.chart()
        lows, highs = np.asarray(chart.lows), np.asarray(chart.highs)
        rng = np.random.default_rng(seed)
        margin = 0.1 * (highs - lows)
        return rng.uniform(lows + margin, highs - margin, size=(count, self.n))


def _space_form_oracles(n, kappa):
    oracles = {"scal": n * (n - 1) * kappa,
               "ric_eigenvalues": [(n - 1) * kappa] * n,
               "T2_eigenvalues": [(n - 1) * (n - 2) * kappa / 2] * n}
    for k in range(1, n // 2 + 1):
        oracles[f"h{2 * k}"] = kappa ** k * math.factorial(n) / (2 ** k * math.factorial(n - 2 * k))
    for k in range(n + 1):
        oracles[f"sigma{k}"] = math.comb(n, k) * (kappa / 2) ** k
    return oracles


def _stereographic(n, kappa, **fd):
    """g = 4 / (1 + kappa |x|^2)^2 delta, on a box inside the domain of validity."""
    if kappa >= 0:
        half = 1.0
    else:
        # keep 1 + kappa |x|^2 >= 0.19 on the whole box
        half = 0.9 / math.sqrt(-kappa * n)

    def func(x):
        factor = 4.0 / (1.0 + kappa * np.sum(x * x, axis=-1)) ** 2
        return factor[..., None, None] * np.eye(n)

    return ChartMetric(n, func, (-half,) * n, (half,) * n, (False,) * n,
                       axes=frozenset(range(n)) if kappa else frozenset(), label=f"space_form({n},{kappa})", **fd)


def space_form(n: int, kappa: float = 1.0) -> ModelManifold:
    """Constant sectional curvature kappa, R = (kappa/2) g^2."""
    if not 2 <= n <= MAX_DIM:
        raise ValueError(f"space form needs 2 <= n <= {MAX_DIM}")
    kappa = float(kappa)
    return ModelManifold("space_form", n, {"n": n, "kappa": kappa},
                         lambda **fd: _stereographic(n, kappa, **fd),
                         lambda: space_form_curvature(n, kappa),
                         _space_form_oracles(n, kappa))


def sphere(n: int, radius: float = 1.0) -> ModelManifold:
    if radius <= 0:
        raise ValueError("radius must be positive")
    model = space_form(n, 1.0 / radius ** 2)
    return ModelManifold("sphere", n, {"n": n, "radius": float(radius)}, model.make_chart,
                         model.make_context, model.oracles)


def flat_torus(n: int, side: float = 2 * math.pi) -> ModelManifold:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"flat torus needs 1 <= n <= {MAX_DIM}")
    side = float(side)
    oracles = {"scal": 0.0, "ric_eigenvalues": [0.0] * n, "T2_eigenvalues": [0.0] * n, "volume": side ** n}
    oracles.update({f"h{2 * k}": 0.0 for k in range(1, n // 2 + 1)})
    oracles.update({f"sigma{k}": 0.0 for k in range(1, n + 1)})
    return ModelManifold("flat_torus", n, {"n": n, "side": side},
                         lambda **fd: ChartMetric.euclidean(n, (0.0,) * n, (side,) * n, (True,) * n, **fd),
                         lambda: space_form_curvature(n, 0.0) if n >= 2 else None,
                         oracles)


def _product_chart(m1, m2, **fd):
    c1, c2 = m1.chart(), m2.chart()
    n1, n = m1.n, m1.n + m2.n

    def func(x):
        out = np.zeros(x.shape[:-1] + (n, n))
        out[..., :n1, :n1] = c1(x[..., :n1])
        out[..., n1:, n1:] = c2(x[..., n1:])
        return out

    axes = None
    if c1.axes is not None and c2.axes is not None:
        axes = frozenset(c1.axes) | frozenset(i + n1 for i in c2.axes)
    return ChartMetric(n, func, c1.lows + c2.lows, c1.highs + c2.highs, c1.periodic + c2.periodic,
                       axes=axes, label=f"{c1.label} x {c2.label}", **fd)


def product(m1: ModelManifold, m2: ModelManifold) -> ModelManifold:
    """Riemannian product with independent coordinate blocks."""
    n = m1.n + m2.n
    if n > MAX_DIM:
        raise OverflowError(f"product dimension {n} exceeds {MAX_DIM}")
    o1, o2 = m1.oracles, m2.oracles
    scal = o1["scal"] + o2["scal"]
    ric = list(o1["ric_eigenvalues"]) + list(o2["ric_eigenvalues"])
    oracles = {"scal": scal, "ric_eigenvalues": ric, "T2_eigenvalues": [scal / 2 - r for r in ric],
               "h4": o1.get("h4", 0.0) + o1["scal"] * o2["scal"] / 2 + o2.get("h4", 0.0)}
    if "volume" in o1 and "volume" in o2:
        oracles["volume"] = o1["volume"] * o2["volume"]

    def context():
        ctxs = [m.context() if m.n >= 2 else None for m in (m1, m2)]
        if ctxs[0] is None or ctxs[1] is None:
            raise ValueError("products need factors of dimension >= 2")
        return product_curvature(ctxs[0], ctxs[1])

    return ModelManifold("product", n, {"factors": [dict(m1.params, model=m1.name), dict(m2.params, model=m2.name)]},
                         lambda **fd: _product_chart(m1, m2, **fd), context, oracles)


MODEL_NAMES = ("space_form", "sphere", "flat_torus", "product")


def build_model(desc: dict) -> ModelManifold:
    """Build a model from a config dict such as ``{"model": "sphere", "n": 3, "radius": 0.1}``."""
    desc = dict(desc)
    name = desc.pop("model")
    if name == "product":
        factors = desc.pop("factors")
        if len(factors) < 2:
            raise ValueError("product needs at least two factors")
        model = build_model(factors[0])
        for other in factors[1:]:
            model = product(model, build_model(other))
        return model
    builders = {"space_form": space_form, "sphere": sphere, "flat_torus": flat_torus}
    if name not in builders:
        raise ValueError(f"unknown model {name!r}")
    return builders[name](**desc)
