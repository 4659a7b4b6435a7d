"""Curvature invariants of an algebraic curvature tensor and their identities.

Everything here operates on :class:`~doubleforms.dfalg.DoubleForm` values
in an orthonormal frame and broadcasts over batch axes.  Functions named
``*_sides`` return the two sides of an identity; the matching
``*_residual`` returns ``|lhs - rhs| / max(1, |lhs|, |rhs|)`` (entrywise max
for form-valued identities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dfalg import (
    MAX_DIM, DegreeError, DoubleForm, contract, first_bianchi_residual, from_bilinear,
    from_tensor, hodge_star, inner_product, metric_form, scalar_form, to_tensor,
)

__all__ = [
    "CurvatureContext", "ConsistencyError", "NotApplicable", "QuadraticInvariants", "SignReport",
    "random_curvature", "space_form_curvature", "conformally_flat_curvature", "schouten",
    "gauss_bonnet", "lovelock", "sigma_k", "classic_newton", "newton_transform",
    "newton_transform_explicit", "newton_formula_residual", "gb_newton_residual",
    "avez_type_residual", "classical_avez_residual", "pq_einstein_h_residual",
    "trace_relations_residual", "gnf_residual", "sigma_weyl_split_residual",
    "quadratic_invariants", "product_curvature", "s3r_times_sp_signs", "residual",
    "gauss_bonnet_sides", "lovelock_sides", "sigma_k_sides", "classic_newton_sides", "newton_explicit_sides",
    "newton_formula_sides", "gb_newton_sides", "avez_type_sides", "classical_avez_sides", "pq_einstein_h_sides",
    "trace_relations_sides", "gnf_sides", "sigma_weyl_split_sides", "min_sectional_curvature", "curvature_signs",
    "CROSS_TOL",
]

CROSS_TOL = 1e-9
fact = math.factorial


class ConsistencyError(ArithmeticError):
    """Two independent expressions of the same quantity disagree."""


class NotApplicable(Exception):
    """An identity's hypothesis does not hold for the given input."""


def residual(lhs, rhs):
    """Relative residual |lhs - rhs| / max(1, |lhs|, |rhs|); max over batch and entries."""
    if isinstance(lhs, DoubleForm):
        a, b = lhs.entries, rhs.entries
    else:
        a, b = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    if isinstance(lhs, DoubleForm):
        scale = np.max(scale)
    return float(np.max(np.abs(a - b) / scale, initial=0.0))


def _cross_check(name, lhs, rhs, tol=CROSS_TOL):
    err = residual(lhs, rhs)
    if not err <= tol:
        raise ConsistencyError(f"{name}: two expressions differ (relative residual {err:.3e})")


class CurvatureContext:
    """An algebraic curvature tensor R with its contractions, split and powers.

    ``R`` must be a symmetric (2,2) form satisfying the first Bianchi
    identity; with ``check=True`` both are verified at ``tol`` relative to
    the size of R.  For n = 2 the Schouten and Weyl parts are ``None``.
    """

    def __init__(self, R: DoubleForm, check: bool = True, tol: float = 1e-10):
        if R.bidegree != (2, 2):
            raise DegreeError("curvature must be a (2,2) form")
        n = R.n
        if n < 2:
            raise DegreeError("curvature contexts need n >= 2")
        self.n = n
        self.R = R
        scale = max(1.0, float(np.max(R.max_abs())))
        self.bianchi = first_bianchi_residual(R)
        if check:
            if not R.is_symmetric(tol):
                raise ValueError("curvature tensor is not symmetric")
            if np.max(self.bianchi) > tol * scale:
                raise ValueError(f"first Bianchi residual {np.max(self.bianchi):.2e} too large")
        self.g = metric_form(n, 1)
        self.ric = contract(R)
        self.scal = contract(R, 2).scalar
        # no Schouten/Weyl split on surfaces
        self.A = schouten(self) if n >= 3 else None
        self.W = R - self.g * self.A if n >= 3 else None
        self.powers = [scalar_form(n, np.ones(R.batch_shape)), R]
        for _ in range(2, n // 2 + 1):
            self.powers.append(self.powers[-1] * R)

    @property
    def batch_shape(self):
        return self.R.batch_shape

    def R_power(self, k: int) -> DoubleForm:
        if not 0 <= 2 * k <= self.n:
            raise DegreeError(f"R^{k} does not exist in dimension {self.n}")
        return self.powers[k]

    def ricci_eigenvalues(self):
        return np.linalg.eigvalsh(self.ric.matrix())


def schouten(ctx: CurvatureContext) -> DoubleForm:
    """A = (Ric - Scal g / (2(n-1))) / (n-2), so that R - gA is trace free."""
    n = ctx.n
    if n <= 2:
        raise DegreeError("Schouten tensor needs n >= 3")
    return (ctx.ric - ctx.g.scaled(ctx.scal / (2 * (n - 1)))) / (n - 2)


def space_form_curvature(n: int, kappa: float) -> CurvatureContext:
    """Constant sectional curvature kappa: R = (kappa/2) g^2."""
    return CurvatureContext(metric_form(n, 2) * (kappa / 2.0))


def conformally_flat_curvature(A) -> CurvatureContext:
    """R = gA for a symmetric (1,1) form or matrix A (Weyl part zero)."""
    if not isinstance(A, DoubleForm):
        A = from_bilinear(A)
    return CurvatureContext(metric_form(A.n, 1) * A)


def random_curvature(n: int, m: int = 3, seed=None, h=None) -> CurvatureContext:
    """R = sum_i eps_i h_i^2 with random symmetric h_i and signs eps_i.

    Pass ``h`` (a matrix, or a list of matrices) to use fixed summands with
    positive signs instead of random ones.
    """
    if n < 3 or m < 1:
        raise ValueError("need n >= 3 and m >= 1")
    if h is not None:
        mats = [np.asarray(h, dtype=float)] if np.ndim(h) == 2 else [np.asarray(x, dtype=float) for x in h]
        signs = [1.0] * len(mats)
    else:
        rng = np.random.default_rng(seed)
        mats, signs = [], []
        for _ in range(m):
            upper = np.triu(rng.standard_normal((n, n)))
            mats.append(upper + np.triu(upper, 1).T)
            signs.append(float(rng.choice([-1.0, 1.0])))
    R = None
    for eps, mat in zip(signs, mats):
        H = from_bilinear(mat)
        term = (H * H) * eps
        R = term if R is None else R + term
    return CurvatureContext(R)


def gauss_bonnet(ctx: CurvatureContext, k: int, check: bool = True):
    """h_2k = c^(2k) R^k / (2k)!, cross-checked against *(g^(n-2k) R^k)/(n-2k)!."""
    n = ctx.n
    if not 0 <= 2 * k <= n:
        raise DegreeError(f"h_{2 * k} needs 0 <= 2k <= n={n}")
    Rk = ctx.R_power(k)
    value = contract(Rk, 2 * k).scalar / fact(2 * k)
    if check:
        star = hodge_star(metric_form(n, n - 2 * k) * Rk).scalar / fact(n - 2 * k)
        _cross_check(f"h_{2 * k}", value, star)
    return value


def lovelock(ctx: CurvatureContext, k: int, check: bool = True) -> DoubleForm:
    """Einstein-Lovelock tensor T_2k = h_2k g - c^(2k-1) R^k / (2k-1)!."""
    n = ctx.n
    if not 0 <= 2 * k <= n:
        raise DegreeError(f"T_{2 * k} needs 0 <= 2k <= n={n}")
    if k == 0:
        return ctx.g.scaled(np.ones(ctx.batch_shape))
    Rk = ctx.R_power(k)
    T = ctx.g.scaled(gauss_bonnet(ctx, k, check)) - contract(Rk, 2 * k - 1) / fact(2 * k - 1)
    if check and 2 * k < n:
        star = hodge_star(metric_form(n, n - 2 * k - 1) * Rk) / fact(n - 2 * k - 1)
        _cross_check(f"T_{2 * k}", T, star)
    return T


def sigma_k(h: DoubleForm, k: int, check: bool = True):
    """k-th elementary symmetric function of the eigenvalues of a symmetric (1,1) form."""
    n = h.n
    if h.bidegree != (1, 1):
        raise DegreeError("sigma_k takes a (1,1) form")
    if not 0 <= k <= n:
        raise DegreeError(f"sigma_{k} needs 0 <= k <= n={n}")
    hk = h ** k
    value = contract(hk, k).scalar / fact(k) ** 2
    if check:
        star = hodge_star(metric_form(n, n - k) * hk).scalar / (fact(n - k) * fact(k))
        _cross_check(f"sigma_{k}", value, star)
    return value


def classic_newton(h: DoubleForm, k: int, check: bool = True) -> DoubleForm:
    """t_k(h) = sigma_k g - c^(k-1) h^k / ((k-1)! k!)."""
    n = h.n
    if not 1 <= k <= n - 1:
        raise DegreeError(f"t_{k} needs 1 <= k <= n-1")
    hk = h ** k
    g = metric_form(n, 1)
    t = g.scaled(sigma_k(h, k, check)) - contract(hk, k - 1) / (fact(k - 1) * fact(k))
    if check:
        star = hodge_star(metric_form(n, n - k - 1) * hk) / (fact(n - k - 1) * fact(k))
        _cross_check(f"t_{k}", t, star)
    return t


def gauss_bonnet_sides(ctx: CurvatureContext, k: int):
    """(c^(2k) R^k/(2k)!, *(g^(n-2k) R^k)/(n-2k)!)."""
    n = ctx.n
    Rk = ctx.R_power(k)
    return (gauss_bonnet(ctx, k, check=False),
            hodge_star(metric_form(n, n - 2 * k) * Rk).scalar / fact(n - 2 * k))


def lovelock_sides(ctx: CurvatureContext, k: int):
    """Contraction and star expressions of T_2k; needs 2k < n."""
    n = ctx.n
    if not 1 <= k or 2 * k >= n:
        raise DegreeError("star expression of T_2k needs 1 <= k and 2k < n")
    star = hodge_star(metric_form(n, n - 2 * k - 1) * ctx.R_power(k)) / fact(n - 2 * k - 1)
    return lovelock(ctx, k, check=False), star


def sigma_k_sides(h: DoubleForm, k: int):
    """(c^k h^k/(k!)^2, *(g^(n-k) h^k)/((n-k)! k!))."""
    n = h.n
    value = sigma_k(h, k, check=False)
    return value, hodge_star(metric_form(n, n - k) * h ** k).scalar / (fact(n - k) * fact(k))


def classic_newton_sides(h: DoubleForm, k: int):
    n = h.n
    t = classic_newton(h, k, check=False)
    return hodge_star(metric_form(n, n - k - 1) * h ** k) / (fact(n - k - 1) * fact(k)), t


def newton_explicit_sides(omega: DoubleForm, k: int):
    """(N_k from the star definition, N_k from the explicit contraction sum)."""
    return newton_transform(omega, k, check=False), newton_transform_explicit(omega, k)


def _newton_degree_check(omega, k):
    p, n = omega.p, omega.n
    if omega.p != omega.q:
        raise DegreeError("Newton transformations act on (p,p) forms")
    if k < 0 or p * k > n - p:
        raise DegreeError(f"N_{k} of a ({p},{p}) form needs 0 <= pk <= n-p (n={n})")


def newton_transform_explicit(omega: DoubleForm, k: int) -> DoubleForm:
    """sum_{r=pk-p}^{pk} (-1)^(r+pk) g^(p-pk+r) c^r omega^k / ((p-pk+r)! r!).

    Valid for symmetric omega satisfying the first Bianchi identity.
    """
    _newton_degree_check(omega, k)
    n, p = omega.n, omega.p
    wk = omega ** k
    total = None
    for r in range(max(0, p * k - p), p * k + 1):
        m = p - p * k + r
        term = (metric_form(n, m) * contract(wk, r)) * ((-1) ** (r + p * k) / (fact(m) * fact(r)))
        total = term if total is None else total + term
    return total


def _is_bianchi_symmetric(omega, tol=1e-10):
    if not omega.is_symmetric(tol):
        return False
    if omega.p == 1:
        return True
    if omega.p == 2:
        scale = max(1.0, float(np.max(omega.max_abs())))
        return bool(np.max(first_bianchi_residual(omega)) <= tol * scale)
    return False


def newton_transform(omega: DoubleForm, k: int, check=None) -> DoubleForm:
    """N_k(omega) = *(g^(n-pk-p) omega^k) / (n-pk-p)!.

    With ``check`` left as None the explicit contraction formula is also
    evaluated and compared whenever omega is a symmetric (1,1) form or a
    symmetric Bianchi (2,2) form.
    """
    _newton_degree_check(omega, k)
    n, p = omega.n, omega.p
    m = n - p * k - p
    N = hodge_star(metric_form(n, m) * omega ** k) / fact(m)
    if check is None:
        check = _is_bianchi_symmetric(omega)
    if check:
        _cross_check(f"N_{k}", N, newton_transform_explicit(omega, k))
    return N


def newton_formula_sides(omega: DoubleForm, k: int):
    p = omega.p
    if (k + 1) * p > omega.n:
        raise DegreeError("Newton formula needs (k+1)p <= n")
    lhs = inner_product(newton_transform(omega, k, check=False), omega)
    rhs = contract(omega ** (k + 1), p * k + p).scalar / fact(p * k + p)
    return lhs, rhs


def newton_formula_residual(omega: DoubleForm, k: int) -> float:
    """<N_k(w), w> against c^(pk+p) w^(k+1) / (pk+p)!."""
    return residual(*newton_formula_sides(omega, k))


def gb_newton_sides(ctx: CurvatureContext, k: int):
    return inner_product(newton_transform(ctx.R, k, check=False), ctx.R), gauss_bonnet(ctx, k + 1)


def gb_newton_residual(ctx: CurvatureContext, k: int) -> float:
    """h_(2k+2) against <N_k(R), R>."""
    return residual(*gb_newton_sides(ctx, k))


def avez_type_sides(ctx: CurvatureContext, k: int):
    n = ctx.n
    if not (k >= 1 and 4 <= 2 * k + 2 <= n):
        raise DegreeError("Avez-type formula needs 4 <= 2k+2 <= n")
    Rk = ctx.R_power(k)
    rhs = (inner_product(contract(Rk, 2 * k - 2) / fact(2 * k - 2), ctx.R)
           - inner_product(contract(Rk, 2 * k - 1) / fact(2 * k - 1), ctx.ric)
           + gauss_bonnet(ctx, k) * gauss_bonnet(ctx, 1))
    return gauss_bonnet(ctx, k + 1), rhs


def avez_type_residual(ctx: CurvatureContext, k: int) -> float:
    return residual(*avez_type_sides(ctx, k))


def classical_avez_sides(ctx: CurvatureContext):
    rhs = inner_product(ctx.R, ctx.R) - inner_product(ctx.ric, ctx.ric) + 0.25 * ctx.scal ** 2
    return gauss_bonnet(ctx, 2), rhs


def classical_avez_residual(ctx: CurvatureContext) -> float:
    """h_4 against |R|^2 - |cR|^2 + |c^2 R|^2 / 4."""
    return residual(*classical_avez_sides(ctx))


def pq_einstein_h_sides(ctx: CurvatureContext, k: int, tol: float = 1e-10):
    n = ctx.n
    if not (k >= 1 and 4 <= 2 * k + 2 <= n):
        raise DegreeError("needs 4 <= 2k+2 <= n")
    X = contract(ctx.R_power(k), 2 * k - 2)
    g2 = metric_form(n, 2)
    lam = inner_product(X, g2) / inner_product(g2, g2)
    deviation = X - g2.scaled(lam)
    scale = max(1.0, float(np.max(X.max_abs())))
    if np.max(deviation.max_abs()) > tol * scale:
        raise NotApplicable(f"c^{2 * k - 2} R^{k} is not proportional to g^2")
    factor = 2 * k * (2 * k - 1) / (n * (n - 1)) + (n - 4 * k) / n
    return gauss_bonnet(ctx, k + 1), factor * gauss_bonnet(ctx, k) * gauss_bonnet(ctx, 1)


def pq_einstein_h_residual(ctx: CurvatureContext, k: int) -> float:
    """h_(2k+2) = {2k(2k-1)/(n(n-1)) + (n-4k)/n} h_2k h_2 for (2k-2,k)-Einstein curvature.

    Raises :class:`NotApplicable` when c^(2k-2) R^k is not proportional to g^2.
    """
    return residual(*pq_einstein_h_sides(ctx, k))


def trace_relations_sides(ctx: CurvatureContext, k: int):
    n = ctx.n
    if not 0 <= 2 * k <= n - 2:
        raise DegreeError("trace relations need 0 <= 2k <= n-2")
    N = newton_transform(ctx.R, k, check=False)
    first = (contract(N, 1), lovelock(ctx, k) * (n - 2 * k - 1))
    second = (contract(N, 2).scalar, (n - 2 * k) * (n - 2 * k - 1) * gauss_bonnet(ctx, k))
    return first, second


def trace_relations_residual(ctx: CurvatureContext, k: int):
    """(cN_k(R) vs (n-2k-1) T_2k,  c^2 N_k(R) vs (n-2k)(n-2k-1) h_2k)."""
    first, second = trace_relations_sides(ctx, k)
    return residual(*first), residual(*second)


def gnf_sides(omega: DoubleForm, h: DoubleForm, k: int):
    n, p = omega.n, omega.p
    if omega.p != omega.q or h.bidegree != (1, 1):
        raise DegreeError("needs a (p,p) form and a (1,1) form")
    if not 0 <= k <= n - p:
        raise DegreeError("needs 0 <= k <= n-p")
    hk = h ** k
    lhs = contract(omega * hk, p + k).scalar / fact(p + k)
    rhs = inner_product(hodge_star(metric_form(n, n - p - k) * omega) / fact(n - p - k), hk)
    return lhs, rhs


def gnf_residual(omega: DoubleForm, h: DoubleForm, k: int) -> float:
    """c^(p+k)(w h^k)/(p+k)! against <*(g^(n-p-k) w)/(n-p-k)!, h^k>."""
    return residual(*gnf_sides(omega, h, k))


def sigma_weyl_split_sides(ctx: CurvatureContext, k: int):
    n = ctx.n
    if not 0 <= 2 * k <= n:
        raise DegreeError("needs 0 <= 2k <= n")
    rhs = fact(n - k) * fact(k) / fact(n - 2 * k) * sigma_k(ctx.A, k)
    for i in range(k):
        coeff = fact(k) / (fact(i) * fact(k - i) * fact(n - 2 * k))
        left = hodge_star(metric_form(n, n - 2 * k + i) * ctx.A ** i)
        rhs = rhs + coeff * inner_product(left, ctx.W ** (k - i))
    return gauss_bonnet(ctx, k), rhs


def sigma_weyl_split_residual(ctx: CurvatureContext, k: int) -> float:
    """h_2k = (n-k)!k!/(n-2k)! sigma_k(A) + Weyl terms."""
    return residual(*sigma_weyl_split_sides(ctx, k))


@dataclass(frozen=True)
class QuadraticInvariants:
    einstein_def: float
    confflat_def: float
    spaceform_def: float
    spaceform_def_printed: float
    sigma2: float
    h4: float
    weyl_norm2: float
    split_residual: float
    einstein_sigma2_residual: float | None


def quadratic_invariants(ctx: CurvatureContext, tol: float = CROSS_TOL) -> QuadraticInvariants:
    """Quadratic curvature deficiencies, sigma_2 and h_4.

    ``spaceform_def`` is |R|^2 - Scal^2/(2n(n-1)) = |R - Scal g^2/(2n(n-1))|^2;
    ``spaceform_def_printed`` is the |Ric|^2 variant, kept for reference only
    (it does not vanish on space forms).
    """
    n = ctx.n
    if n < 4:
        raise DegreeError("quadratic invariants need n >= 4")
    R2 = inner_product(ctx.R, ctx.R)
    ric2 = inner_product(ctx.ric, ctx.ric)
    scal = ctx.scal
    einstein_def = ric2 - scal ** 2 / n
    confflat_def = R2 - ric2 / (n - 2) + scal ** 2 / (2 * (n - 1) * (n - 2))
    spaceform_def = R2 - scal ** 2 / (2 * n * (n - 1))
    printed = ric2 - scal ** 2 / (2 * n * (n - 1))
    sigma2 = (n / (4 * (n - 1)) * scal ** 2 - ric2) / (2 * (n - 2) ** 2)
    _cross_check("sigma_2 display", sigma2, sigma_k(ctx.A, 2), tol)
    h4 = gauss_bonnet(ctx, 2)
    weyl2 = inner_product(ctx.W, ctx.W)
    split = residual(h4, weyl2 + 2 * (n - 2) * (n - 3) * sigma2)
    if split > tol:
        raise ConsistencyError(f"h_4 = |W|^2 + 2(n-2)(n-3) sigma_2 fails ({split:.2e})")
    einstein_res = None
    if np.max(np.abs(einstein_def)) <= 1e-10 * max(1.0, float(np.max(np.abs(ric2)))):
        einstein_res = residual(sigma2, scal ** 2 / (8 * n * (n - 1)))
        if einstein_res > tol:
            raise ConsistencyError(f"Einstein sigma_2 formula fails ({einstein_res:.2e})")
    return QuadraticInvariants(einstein_def, confflat_def, spaceform_def, printed,
                               sigma2, h4, weyl2, split, einstein_res)


def _h4_or_zero(ctx):
    return gauss_bonnet(ctx, 2) if ctx.n >= 4 else 0.0


def product_curvature(ctx1: CurvatureContext, ctx2: CurvatureContext, check: bool = True) -> CurvatureContext:
    """Curvature of a Riemannian product: R1 and R2 embedded block-wise, cross terms zero."""
    n1, n2 = ctx1.n, ctx2.n
    n = n1 + n2
    if n > MAX_DIM:
        raise DegreeError(f"product dimension {n} exceeds {MAX_DIM}")
    t1, t2 = to_tensor(ctx1.R), to_tensor(ctx2.R)
    t = np.zeros((n,) * 4)
    t[:n1, :n1, :n1, :n1] = t1
    t[n1:, n1:, n1:, n1:] = t2
    ctx = CurvatureContext(from_tensor(t, 2, 2))
    if check and n >= 4:
        law = _h4_or_zero(ctx1) + 0.5 * ctx1.scal * ctx2.scal + _h4_or_zero(ctx2)
        _cross_check("product h_4 law", gauss_bonnet(ctx, 2), law)
    return ctx


def min_sectional_curvature(ctx: CurvatureContext, samples: int = 2000, seed: int = 0) -> float:
    """Smallest sectional curvature found over coordinate planes and random 2-planes."""
    n = ctx.n
    t = to_tensor(ctx.R)
    best = min(t[i, j, i, j] for i in range(n) for j in range(i + 1, n))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
        x, y = q[:, 0], q[:, 1]
        best = min(best, float(np.einsum("abcd,a,b,c,d->", t, x, y, x, y)))
    return float(best)


@dataclass(frozen=True)
class SignReport:
    min_sectional: float
    min_curvature_operator_eig: float
    min_ricci_eig: float
    min_einstein_eig: float
    h4: float
    sigma2: float


def s3r_times_sp_signs(r: float, p: int) -> SignReport:
    """Curvature signs of S^3(r) x S^p(1)."""
    if r <= 0 or p < 2:
        raise ValueError("needs r > 0 and p >= 2")
    ctx = product_curvature(space_form_curvature(3, 1.0 / r ** 2), space_form_curvature(p, 1.0))
    return curvature_signs(ctx)


def curvature_signs(ctx: CurvatureContext) -> SignReport:
    op_eig = np.linalg.eigvalsh(ctx.R.entries)
    return SignReport(
        min_sectional=min_sectional_curvature(ctx),
        min_curvature_operator_eig=float(op_eig.min()),
        min_ricci_eig=float(np.linalg.eigvalsh(ctx.ric.matrix()).min()),
        min_einstein_eig=float(np.linalg.eigvalsh(lovelock(ctx, 1).matrix()).min()),
        h4=gauss_bonnet(ctx, 2) if ctx.n >= 4 else 0.0,
        sigma2=sigma_k(ctx.A, 2),
    )
