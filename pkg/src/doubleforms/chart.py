"""Riemannian geometry on coordinate charts by finite differences.

Every quantity is pushed to a g-orthonormal frame (Cholesky) before it
reaches :mod:`doubleforms.dfalg`.  Points may be a single ``(n,)`` array or
a batch ``(..., n)``; batched inputs give batched outputs.

Sign convention: ``Delta f = -trace(Hess f)``.  Wherever a formula is
written with a plain trace of the Hessian, the trace is used directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import exprlang
from .curvinv import CurvatureContext, gauss_bonnet, lovelock, sigma_k
from .dfalg import DoubleForm, first_bianchi_residual, from_bilinear, from_tensor, metric_form
from .report import Row, make_row

__all__ = [
    "ScalarField", "ChartMetric", "PointFrame", "FieldJet", "ChartError",
    "curvature_at", "covariant_hessian", "field_jet", "ell_2k", "hessian_sigma_k",
    "conformal_operator", "power_operator", "k_operator",
    "conformal_h4_check", "cocycle_check", "conformal_power_ops", "bidegree_covariance_check",
    "integrate", "integral_identity_suite",
]


class ChartError(ValueError):
    pass


class ScalarField:
    """A vectorised scalar function of chart coordinates.

    ``axes`` is the set of 0-based coordinate axes the field depends on, or
    None when unknown.  Arithmetic composes fields point-wise.
    """

    def __init__(self, func: Callable, axes=None, label: str = ""):
        self.func = func
        self.axes = None if axes is None else frozenset(axes)
        self.label = label

    @classmethod
    def parse(cls, text: str) -> "ScalarField":
        expr = exprlang.parse(text)
        return cls.from_expr(expr, label=text)

    @classmethod
    def from_expr(cls, expr, label: str = "") -> "ScalarField":
        axes = {i - 1 for i in exprlang.coordinates(expr)}
        return cls(lambda x: exprlang.evaluate(expr, x), axes, label or exprlang.to_string(expr))

    @classmethod
    def constant(cls, value: float) -> "ScalarField":
        value = float(value)
        return cls(lambda x: np.full(np.shape(x)[:-1], value), (), repr(value))

    @classmethod
    def coerce(cls, value) -> "ScalarField":
        if isinstance(value, ScalarField):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, (int, float)):
            return cls.constant(value)
        if callable(value):
            return cls(value)
        raise TypeError(f"cannot make a scalar field from {type(value).__name__}")

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        return np.broadcast_to(np.asarray(self.func(points), dtype=float), points.shape[:-1])

    def _combine(self, other, op, symbol):
        other = ScalarField.coerce(other)
        axes = None if self.axes is None or other.axes is None else self.axes | other.axes
        return ScalarField(lambda x: op(self(x), other(x)), axes, f"({self.label}) {symbol} ({other.label})")

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __rsub__(self, other):
        return ScalarField.coerce(other) - self

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, np.divide, "/")

    def __neg__(self):
        return ScalarField(lambda x: -self(x), self.axes, f"-({self.label})")

    def __pow__(self, exponent: float):
        def func(x):
            base = self(x)
            if np.any(base <= 0) and exponent != int(exponent):
                raise exprlang.EvaluationError("fractional power of a non-positive field")
            return base ** exponent
        return ScalarField(func, self.axes, f"({self.label})^{exponent}")

    def exp(self) -> "ScalarField":
        return ScalarField(lambda x: np.exp(self(x)), self.axes, f"exp({self.label})")

    def log(self) -> "ScalarField":
        def func(x):
            value = self(x)
            if np.any(value <= 0):
                raise exprlang.EvaluationError("log of a non-positive field")
            return np.log(value)
        return ScalarField(func, self.axes, f"log({self.label})")

    def __repr__(self):
        return f"ScalarField({self.label!r})"


@dataclass(frozen=True)
class ChartMetric:
    """A metric field g(x) on an axis-aligned coordinate box.

    ``func`` maps points ``(N, n)`` to matrices ``(N, n, n)``.  ``axes``
    lists the coordinates g actually depends on (None: all); derivatives
    along other axes are skipped as exactly zero.
    """

    n: int
    func: Callable
    lows: tuple
    highs: tuple
    periodic: tuple
    fd_order: int = 4
    fd_step: object = None
    axes: frozenset | None = None
    label: str = ""

    def __post_init__(self):
        if self.fd_order not in (2, 4):
            raise ChartError("fd_order must be 2 or 4")
        if not (len(self.lows) == len(self.highs) == len(self.periodic) == self.n):
            raise ChartError("domain box does not match the dimension")

    @classmethod
    def from_expressions(cls, matrix, lows, highs, periodic, **kwargs) -> "ChartMetric":
        n = len(matrix)
        if any(len(row) != n for row in matrix):
            raise ChartError("metric must be an n x n matrix of expressions")
        exprs = [[exprlang.parse(str(entry)) for entry in row] for row in matrix]
        for i in range(n):
            for j in range(i):
                if exprs[i][j] != exprs[j][i]:
                    raise ChartError(f"metric entries ({i + 1},{j + 1}) and ({j + 1},{i + 1}) differ")
        if max(exprlang.max_coordinate(e) for row in exprs for e in row) > n:
            raise ChartError("metric uses a coordinate beyond the chart dimension")
        axes = set()
        for row in exprs:
            for e in row:
                axes |= {i - 1 for i in exprlang.coordinates(e)}

        def func(x):
            out = np.empty(x.shape[:-1] + (n, n))
            for i in range(n):
                for j in range(i, n):
                    out[..., i, j] = out[..., j, i] = exprlang.evaluate(exprs[i][j], x)
            return out

        return cls(n, func, tuple(lows), tuple(highs), tuple(bool(p) for p in periodic),
                   axes=frozenset(axes), label="expressions", **kwargs)

    @classmethod
    def euclidean(cls, n, lows, highs, periodic, **kwargs) -> "ChartMetric":
        return cls(n, lambda x: np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy(),
                   tuple(lows), tuple(highs), tuple(periodic), axes=frozenset(), label="flat", **kwargs)

    def __call__(self, points):
        return self.func(np.asarray(points, dtype=float))

    @property
    def depends_on(self):
        return frozenset(range(self.n)) if self.axes is None else self.axes

    def steps(self) -> np.ndarray:
        if self.fd_step is not None:
            steps = np.broadcast_to(np.asarray(self.fd_step, dtype=float), (self.n,)).copy()
        else:
            # balances truncation (h^order) against rounding (eps/h^2) for second derivatives
            steps = np.full(self.n, np.finfo(float).eps ** (1.0 / (self.fd_order + 2)))
        if np.any(steps <= 0) or np.any(~np.isfinite(steps)):
            raise ChartError("finite-difference step must be positive")
        return steps

    def with_fd(self, order=None, step=None) -> "ChartMetric":
        return replace(self, fd_order=order or self.fd_order, fd_step=step if step is not None else self.fd_step)

    def conformal(self, factor) -> "ChartMetric":
        """The metric factor(x) * g(x), as a fresh chart metric."""
        factor = ScalarField.coerce(factor)
        base = self.func
        axes = None if self.axes is None or factor.axes is None else self.axes | factor.axes
        return replace(self, func=lambda x: factor(x)[..., None, None] * base(x), axes=axes,
                       label=f"({factor.label}) * {self.label}")

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic)


# --- finite-difference stencils ------------------------------------------------

_FIRST = {2: {-1: -0.5, 1: 0.5}, 4: {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}}
_SECOND = {2: {-1: 1.0, 0: -2.0, 1: 1.0}, 4: {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}}


@lru_cache(maxsize=None)
def _stencil(n, order, axes, second=True):
    """Shifts (in step units) and weights for all first and second partials along ``axes``."""
    shifts = {}

    def slot(vec):
        return shifts.setdefault(tuple(vec), len(shifts))

    slot([0] * n)
    first, hess = [], []
    for i in axes:
        for a, w in _FIRST[order].items():
            vec = [0] * n
            vec[i] = a
            first.append((i, slot(vec), w))
    if second:
        for i in axes:
            for a, w in _SECOND[order].items():
                vec = [0] * n
                vec[i] = a
                hess.append((i, i, slot(vec), w))
            for j in axes:
                if j <= i:
                    continue
                for a, wa in _FIRST[order].items():
                    for b, wb in _FIRST[order].items():
                        vec = [0] * n
                        vec[i], vec[j] = a, b
                        hess.append((i, j, slot(vec), wa * wb))
    S = len(shifts)
    shift_arr = np.array(list(shifts), dtype=float).reshape(S, n)
    w1 = np.zeros((n, S))
    for i, s, w in first:
        w1[i, s] += w
    w2 = np.zeros((n, n, S))
    for i, j, s, w in hess:
        w2[i, j, s] += w
        if i != j:
            w2[j, i, s] += w
    return shift_arr, w1, w2


def _jet(func, points, steps, order, axes, second=True):
    """Value, gradient ``(N, n, ...)`` and Hessian ``(N, n, n, ...)`` of ``func`` at ``points``."""
    n = points.shape[-1]
    shifts, w1, w2 = _stencil(n, order, tuple(sorted(axes)), second)
    shifted = points[None, :, :] + shifts[:, None, :] * steps
    if np.any(steps * steps == 0) or not np.all(np.any(shifted[1:] != points[None], axis=-1)):
        raise ChartError("finite-difference step underflows at this point")
    stacked = shifted.reshape(-1, n)
    values = np.asarray(func(stacked), dtype=float)
    values = values.reshape((shifts.shape[0], points.shape[0]) + values.shape[1:])
    value = values[0]
    grad = np.tensordot(w1, values, axes=(1, 0)) / steps.reshape((n,) + (1,) * (values.ndim - 1))
    grad = np.moveaxis(grad, 0, 1)
    hess = None
    if second:
        scale = np.outer(steps, steps).reshape((n, n) + (1,) * (values.ndim - 1))
        hess = np.tensordot(w2, values, axes=(2, 0)) / scale
        hess = np.moveaxis(np.moveaxis(hess, 0, 2), 0, 2)  # (N, n, n, ...)
    return value, grad, hess


# --- frames ------------------------------------------------------------------


@dataclass
class PointFrame:
    """Geometry of a chart metric at one point or a batch of points.

    ``E`` holds the orthonormal frame vectors as columns (E^T g E = I),
    ``christoffel[..., m, i, j]`` is Gamma^m_ij, ``R`` the curvature as a
    (2,2) double form in the frame.
    """

    points: np.ndarray
    g: np.ndarray
    E: np.ndarray
    christoffel: np.ndarray
    R: DoubleForm
    bianchi: object
    sqrt_det: object
    _ctx: CurvatureContext | None = None

    @property
    def n(self):
        return self.g.shape[-1]

    @property
    def ctx(self) -> CurvatureContext:
        if self._ctx is None:
            self._ctx = CurvatureContext(self.R, check=False)
        return self._ctx

    def orthonormality_error(self) -> float:
        eye = np.einsum("...ia,...ij,...jb->...ab", self.E, self.g, self.E)
        return float(np.max(np.abs(eye - np.eye(self.n))))


def _flatten(metric, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != metric.n:
        raise ChartError(f"points must have {metric.n} coordinates")
    return x.reshape(-1, metric.n), x.shape[:-1]


def _unflatten(value, batch):
    if isinstance(value, DoubleForm):
        return DoubleForm(value.n, value.p, value.q, value.entries.reshape(batch + value.entries.shape[-2:]))
    value = np.asarray(value)
    out = value.reshape(batch + value.shape[1:])
    return float(out) if out.ndim == 0 else out


def _frames(metric: ChartMetric, pts: np.ndarray) -> PointFrame:
    steps = metric.steps()
    g, dg, ddg = _jet(metric.func, pts, steps, metric.fd_order, metric.depends_on)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ChartError("metric is not positive definite at a sampled point") from None
    ginv = np.linalg.inv(g)
    E = np.swapaxes(np.linalg.inv(L), -1, -2)
    # lower[N, l, i, j] = Gamma_{l,ij}
    lower = 0.5 * (np.einsum("Nijl->Nlij", dg) + np.einsum("Njil->Nlij", dg) - dg)
    gamma = np.einsum("Nml,Nlij->Nmij", ginv, lower)
    # ddg[N, a, b, i, j] = d_a d_b g_ij
    second = 0.5 * (np.einsum("Nklim->Niklm", ddg) + np.einsum("Nimkl->Niklm", ddg)
                    - np.einsum("Nkmil->Niklm", ddg) - np.einsum("Nilkm->Niklm", ddg))
    quad = np.einsum("Npkl,Npim->Niklm", lower, gamma) - np.einsum("Npkm,Npil->Niklm", lower, gamma)
    Rc = second + quad
    Rf = np.einsum("Nijkl,Nia,Njb,Nkc,Nld->Nabcd", Rc, E, E, E, E, optimize=True)
    R = from_tensor(Rf, 2, 2).symmetrized()
    sqrt_det = np.prod(np.diagonal(L, axis1=-2, axis2=-1), axis=-1)
    return PointFrame(pts, g, E, gamma, R, first_bianchi_residual(R), sqrt_det)


def curvature_at(metric: ChartMetric, x) -> PointFrame:
    """Frame, Christoffel symbols and frame curvature at ``x``."""
    pts, batch = _flatten(metric, x)
    fr = _frames(metric, pts)
    return PointFrame(np.asarray(x, dtype=float), fr.g.reshape(batch + (metric.n,) * 2),
                      fr.E.reshape(batch + (metric.n,) * 2), fr.christoffel.reshape(batch + (metric.n,) * 3),
                      _unflatten(fr.R, batch), _unflatten(fr.bianchi, batch), _unflatten(fr.sqrt_det, batch))


@dataclass
class FieldJet:
    """Frame-side first and second derivatives of a scalar field."""

    value: np.ndarray
    grad: np.ndarray          # frame components of the gradient, (N, n)
    hess: DoubleForm          # covariant Hessian in the frame, batched (1,1)
    grad_coord: np.ndarray    # coordinate differential, (N, n)

    @property
    def norm2(self):
        return np.sum(self.grad ** 2, axis=-1)

    def hess_on_grad(self):
        return np.einsum("...ij,...i,...j->...", self.hess.matrix(), self.grad, self.grad)

    @property
    def trace(self):
        return np.trace(self.hess.matrix(), axis1=-2, axis2=-1)

    @property
    def laplacian(self):
        """Delta f = -trace(Hess f)."""
        return -self.trace


def field_jet(metric: ChartMetric, frame: PointFrame, f) -> FieldJet:
    f = ScalarField.coerce(f)
    axes = frozenset(range(metric.n)) if f.axes is None else f.axes
    value, df, ddf = _jet(f, frame.points, metric.steps(), metric.fd_order, axes)
    hess_c = ddf - np.einsum("Nkij,Nk->Nij", frame.christoffel, df)
    hess_c = 0.5 * (hess_c + np.swapaxes(hess_c, -1, -2))
    hess_f = np.einsum("Nia,Nij,Njb->Nab", frame.E, hess_c, frame.E)
    grad = np.einsum("Nia,Ni->Na", frame.E, df)
    return FieldJet(value, grad, from_bilinear(hess_f), df)


def _bilinear(form: DoubleForm, u):
    return np.einsum("...ij,...i,...j->...", form.matrix(), u, u)


def covariant_hessian(metric: ChartMetric, f, x) -> DoubleForm:
    """Hess f = d^2 f - Gamma df, in the orthonormal frame."""
    pts, batch = _flatten(metric, x)
    fr = _frames(metric, pts)
    return _unflatten(field_jet(metric, fr, f).hess, batch)


def ell_2k(metric: ChartMetric, f, x, k: int):
    """l_2k(f) = -<T_2k, Hess f>; k = 0 gives Delta f = -trace Hess f."""
    if not 0 <= 2 * k < metric.n:
        raise ChartError("l_2k needs 0 <= 2k < n")
    pts, batch = _flatten(metric, x)
    fr = _frames(metric, pts)
    jet = field_jet(metric, fr, f)
    T = lovelock(fr.ctx, k, check=False)
    return _unflatten(-np.sum(T.entries * jet.hess.entries, axis=(-2, -1)), batch)


def hessian_sigma_k(metric: ChartMetric, f, x, k: int):
    pts, batch = _flatten(metric, x)
    fr = _frames(metric, pts)
    return _unflatten(sigma_k(field_jet(metric, fr, f).hess, k), batch)


# --- conformal operators ----------------------------------------------------


def _h4(frame):
    return gauss_bonnet(frame.ctx, 2, check=False) if frame.n >= 4 else np.zeros(frame.points.shape[0])


def conformal_operator(frame: PointFrame, jet: FieldJet):
    """L_g(f) assembled term by term, for e^(4f) h4(e^(2f) g) = h_4 + L_g(f)."""
    n = frame.n
    ctx = frame.ctx
    T2 = lovelock(ctx, 1, check=False)
    h2 = 0.5 * ctx.scal
    q = jet.norm2
    ell2 = -np.sum(T2.entries * jet.hess.entries, axis=(-2, -1))
    return (2 * (n - 2) * (n - 3) * sigma_k(jet.hess, 2, check=False)
            + 2 * (n - 3) * ell2
            - (n - 2) * (n - 3) ** 2 * jet.laplacian * q
            + 2 * (n - 2) * (n - 3) * jet.hess_on_grad()
            + 2 * (n - 3) * _bilinear(T2, jet.grad)
            - (n - 2) * (n - 3) * h2 * q
            + (n - 1) * (n - 2) * (n - 3) * (n - 4) / 4 * q ** 2)


def power_operator(frame: PointFrame, jet: FieldJet):
    """L_g(v) for the metric v^(8/(n-4)) g, n > 4."""
    n = frame.n
    if n <= 4:
        raise ChartError("L_g(v) needs n > 4")
    v = jet.value
    if np.any(v <= 0):
        bad = frame.points[np.argmax(v <= 0)]
        raise ChartError(f"v must be positive; v <= 0 at {bad.tolist()}")
    ctx = frame.ctx
    T2 = lovelock(ctx, 1, check=False)
    h2 = 0.5 * ctx.scal
    q = jet.norm2
    B = jet.hess
    c2B2 = 2 * (jet.trace ** 2 - np.sum(B.entries ** 2, axis=(-2, -1)))
    return (-np.sum(T2.entries * B.entries, axis=(-2, -1))
            + n / ((n - 4) * v) * _bilinear(T2, jet.grad)
            - 2 * (n - 2) * q / ((n - 4) * v) * h2
            + (n - 2) / ((n - 4) * v) * c2B2
            + 4 * (n - 2) ** 2 * q / ((n - 4) ** 2 * v ** 2) * jet.trace
            + 4 * n * (n - 2) / ((n - 4) ** 2 * v ** 2) * jet.hess_on_grad())


def k_operator(frame: PointFrame, jet: FieldJet):
    """K_g(v) = L_g(v) + (n-4)/(8(n-3)) h_4 v."""
    n = frame.n
    return power_operator(frame, jet) + (n - 4) / (8 * (n - 3)) * _h4(frame) * jet.value


def _L(metric, f, pts):
    fr = _frames(metric, pts)
    return conformal_operator(fr, field_jet(metric, fr, f))


def _K(metric, v, pts):
    fr = _frames(metric, pts)
    return k_operator(fr, field_jet(metric, fr, v))


@dataclass
class ConformalH4Check:
    lhs: object
    rhs: object
    operator: object
    residual: object
    weyl_residual: object
    riemann_residual: object
    volume_residual: object


def _rel(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def conformal_h4_check(metric: ChartMetric, f, x) -> ConformalH4Check:
    """Compare e^(4f) h4 of e^(2f) g, computed from the conformal chart, with h_4 + L_g(f).

    Also compares the conformal Weyl and Riemann tensors with their
    transformation laws, and the volume densities.
    """
    if metric.n < 4:
        raise ChartError("needs n >= 4")
    f = ScalarField.coerce(f)
    pts, batch = _flatten(metric, x)
    n = metric.n
    fr = _frames(metric, pts)
    jet = field_jet(metric, fr, f)
    bar = _frames(metric.conformal((2 * f).exp()), pts)
    ef = np.exp(jet.value)
    lhs = ef ** 4 * _h4(bar)
    L = conformal_operator(fr, jet)
    rhs = _h4(fr) + L
    # frames of e^(2f) g are e^(-f) E, so frame components pick up e^(-4f)
    g = metric_form(n, 1)
    H = jet.hess - from_bilinear(np.einsum("Ni,Nj->Nij", jet.grad, jet.grad)) + g.scaled(0.5 * jet.norm2)
    weyl_expected = fr.ctx.W.scaled(ef ** -2)
    riem_expected = (fr.R - g * H).scaled(ef ** -2)

    def form_rel(a, b):
        scale = np.maximum(1.0, np.max(np.abs(b.entries), axis=(-2, -1)))
        return np.max(np.abs(a.entries - b.entries), axis=(-2, -1)) / scale

    return ConformalH4Check(
        lhs=_unflatten(lhs, batch), rhs=_unflatten(rhs, batch), operator=_unflatten(L, batch),
        residual=_unflatten(_rel(lhs, rhs), batch),
        weyl_residual=_unflatten(form_rel(bar.ctx.W, weyl_expected), batch),
        riemann_residual=_unflatten(form_rel(bar.R, riem_expected), batch),
        volume_residual=_unflatten(_rel(bar.sqrt_det / fr.sqrt_det, ef ** n), batch),
    )


def cocycle_check(metric: ChartMetric, f, phi, x):
    """|L_g(f+phi) - L_g(f) - e^(4f) L_(e^(2f) g)(phi)|, relative."""
    f, phi = ScalarField.coerce(f), ScalarField.coerce(phi)
    pts, batch = _flatten(metric, x)
    lhs = _L(metric, f + phi, pts) - _L(metric, f, pts)
    rhs = np.exp(4 * f(pts)) * _L(metric.conformal((2 * f).exp()), phi, pts)
    return _unflatten(_rel(lhs, rhs), batch)


@dataclass
class PowerOps:
    L: object
    K: object
    lhs: object
    rhs: object
    residual: object


def conformal_power_ops(metric: ChartMetric, v, x) -> PowerOps:
    """L_g(v), K_g(v) and the h_4 law for v^(8/(n-4)) g, with h4 of the new metric from its own chart."""
    n = metric.n
    if n <= 4:
        raise ChartError("needs n > 4")
    v = ScalarField.coerce(v)
    pts, batch = _flatten(metric, x)
    fr = _frames(metric, pts)
    jet = field_jet(metric, fr, v)
    L = power_operator(fr, jet)
    K = L + (n - 4) / (8 * (n - 3)) * _h4(fr) * jet.value
    bar = _frames(metric.conformal(v ** (8.0 / (n - 4))), pts)
    lhs = jet.value ** ((n + 12) / (n - 4)) * _h4(bar)
    rhs = _h4(fr) * jet.value + 8 * (n - 3) / (n - 4) * L
    return PowerOps(*(_unflatten(a, batch) for a in (L, K, lhs, rhs, _rel(lhs, rhs))))


def bidegree_covariance_check(metric: ChartMetric, a, phi, x):
    """|K_(a^2 g)(phi) - a^(-(n+12)/4) K_g(a^((n-4)/4) phi)|, relative."""
    n = metric.n
    if n <= 4:
        raise ChartError("needs n > 4")
    a, phi = ScalarField.coerce(a), ScalarField.coerce(phi)
    pts, batch = _flatten(metric, x)
    if np.any(a(pts) <= 0) or np.any(phi(pts) <= 0):
        raise ChartError("a and phi must be positive")
    lhs = _K(metric.conformal(a ** 2), phi, pts)
    rhs = a(pts) ** (-(n + 12) / 4) * _K(metric, a ** ((n - 4) / 4) * phi, pts)
    return _unflatten(_rel(lhs, rhs), batch)


# --- quadrature -----------------------------------------------------------------


def _grid(metric, resolution, axes):
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (metric.n,))
    lows, highs = np.asarray(metric.lows, float), np.asarray(metric.highs, float)
    coords, weights = [], []
    for i in range(metric.n):
        width = highs[i] - lows[i]
        count = int(res[i]) if i in axes else 1
        if count < 1:
            raise ChartError("resolution must be positive")
        coords.append(lows[i] + width * np.arange(count) / count)
        weights.append(width / count)
    mesh = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, metric.n)
    return mesh, float(np.prod(weights))


def integrate(metric: ChartMetric, field, resolution, axes=None, chunk: int = 2048):
    """Periodic rectangle rule for the integral of ``field`` against sqrt(det g).

    ``field`` maps points ``(N, n)`` to values ``(N,)`` or to columns
    ``(N, m)``; the result is a float or an array of m integrals.  Axes on
    which neither the metric nor the field depends get a single sample.
    Chunk partial sums are combined with ``math.fsum`` so the result does
    not depend on the evaluation order.
    """
    if not metric.fully_periodic:
        raise ChartError("integration is supported on fully periodic (torus) charts only")
    if axes is None:
        axes = _union_axes(metric, field)
    axes = frozenset(range(metric.n)) if axes is None else frozenset(axes)
    mesh, cell = _grid(metric, resolution, axes)
    partial = []
    for start in range(0, mesh.shape[0], chunk):
        pts = mesh[start:start + chunk]
        values = np.asarray(field(pts), dtype=float)
        density = np.sqrt(np.linalg.det(metric(pts)))
        partial.append(np.sum(values * density.reshape((-1,) + (1,) * (values.ndim - 1)), axis=0))
    partial = np.array(partial)
    if partial.ndim == 1:
        return math.fsum(partial) * cell
    return np.array([math.fsum(col) for col in partial.T]) * cell


def _union_axes(*items):
    out = frozenset()
    for item in items:
        axes = getattr(item, "axes", None)
        if axes is None:
            return None
        out |= axes
    return out


def integral_identity_suite(metric: ChartMetric, field, resolution, tolerances=None, params=None,
                            as_stated: bool = False) -> list[Row]:
    """Integrated identities on a torus chart.

    For n = 4, ``field`` is the conformal exponent f (metric e^(2f) g); for
    n > 4 it is the positive function v (metric v^(8/(n-4)) g).

    With ``as_stated`` the Ricci-change identity is also reported in its
    alternative form (coefficient -2 and the v-weighted A); that row is
    expected to fail.
    """
    if not metric.fully_periodic:
        raise ChartError("integral identities need a periodic chart")
    n = metric.n
    if n < 4:
        raise ChartError("integral identities need n >= 4")
    u = ScalarField.coerce(field)
    axes = _union_axes(metric, u)
    base = dict(params or {}, n=n, field=u.label, resolution=resolution)
    bar = metric.conformal((2 * u).exp() if n == 4 else u ** (8.0 / (n - 4)))

    def columns(pts):
        fr = _frames(metric, pts)
        jet = field_jet(metric, fr, u)
        T2 = lovelock(fr.ctx, 1, check=False)
        q = jet.norm2
        cols = [2 * sigma_k(jet.hess, 2, check=False), _bilinear(fr.ctx.ric, jet.grad),
                2 * jet.hess_on_grad(), q * jet.laplacian, _h4(fr)]
        if n == 4:
            cols.append(conformal_operator(fr, jet))
        else:
            fb = _frames(bar, pts)
            # (Ricbar - Ric)(grad v, grad v): Ricbar is pulled back to the g-frame
            M = np.einsum("Nia,Nij,Njb->Nab", fb.E, fb.g, fr.E)
            ric_bar = np.einsum("Nca,Ncd,Ndb->Nab", M, fb.ctx.ric.matrix(), M)
            change = np.einsum("Nab,Na,Nb->N", ric_bar - fr.ctx.ric.matrix(), jet.grad, jet.grad)
            cols += [jet.value ** 4 * _h4(fr), jet.value ** 2 * _bilinear(T2, jet.grad),
                     _a_integrand(fr, jet), (n - 4) * jet.value ** 2 * change, q ** 2,
                     _a_integrand(fr, jet, weighted=True)]
        return np.stack(cols, axis=-1)

    ints = integrate(metric, columns, resolution, axes=axes)
    total_bar = integrate(bar, lambda pts: _h4(_frames(bar, pts)), resolution, axes=axes)
    rows = [make_row("int.bochner", base, ints[0], ints[1], tolerances=tolerances),
            make_row("int.hess_identity", base, ints[2], ints[3], tolerances=tolerances)]
    if n == 4:
        rows.append(make_row("int.L_mean", base, ints[5], 0.0, tolerances=tolerances))
        rows.append(make_row("int.h4_invariance", base, total_bar, ints[4], tolerances=tolerances))
        return rows
    v4h4, v2T2, A, ricci, quartic, A_weighted = ints[5:]
    rhs = v4h4 + 16 * (n - 3) / (n - 4) * v2T2 + 16 * (n - 2) * (n - 3) / (n - 4) ** 3 * A
    rows.append(make_row("int.h4_total", base, total_bar, rhs, tolerances=tolerances))
    rows.append(make_row("int.ricci_remark", dict(base, A=float(A)), ricci, -A + 4 * (n - 1) * quartic,
                         tolerances=tolerances))
    if as_stated:
        rows.append(make_row("int.ricci_remark_as_stated", dict(base, A_weighted=float(A_weighted)), ricci,
                             -2 * A_weighted + 4 * (n - 1) * quartic, tolerances=tolerances))
    return rows


def _a_integrand(fr, jet, weighted=False):
    """(n-4)|dv|^2 Delta(v^2) - 4|dv|^4 with Delta(v^2) = 2 v Delta v - 2|dv|^2.

    ``weighted`` multiplies the first term by v.
    """
    n = fr.n
    q = jet.norm2
    lap_v2 = 2 * jet.value * jet.laplacian - 2 * q
    first = (n - 4) * q * lap_v2
    if weighted:
        first = first * jet.value
    return first - 4 * q ** 2
