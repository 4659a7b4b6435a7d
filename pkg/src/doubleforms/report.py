"""Verification rows, the identity registry and report assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

SCHEMA_VERSION = "1.0"

PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not-applicable"

# identity id -> (anchor, default tolerance)
IDENTITIES = {
    # double-form algebra
    "alg.adjoint": ("<g^r w, e> = <w, c^r e>", 1e-12),
    "alg.star_involution": ("** = id on (p,p) forms", 1e-12),
    "alg.star_conj_g": ("g^r w = * c^r * w", 1e-12),
    "alg.star_conj_c": ("c^r w = * g^r * w", 1e-12),
    "alg.determinant": ("h^k(x;y) = k! det[h(x_i,y_j)]", 1e-12),
    "alg.metric_contraction": ("c^r g^m = m!/(m-r)! (n-m+r)!/(n-m)! g^(m-r)", 1e-12),
    "alg.associativity": ("(ab)c = a(bc)", 1e-12),
    "alg.bianchi_h2": ("h^2 satisfies the first Bianchi identity", 1e-12),
    # curvature identities
    "curv.gauss_bonnet": ("h_2k = *(g^(n-2k) R^k)/(n-2k)! = c^(2k) R^k/(2k)!", 1e-9),
    "curv.lovelock": ("T_2k = h_2k g - c^(2k-1) R^k/(2k-1)! = *(g^(n-2k-1) R^k)/(n-2k-1)!", 1e-9),
    "curv.lovelock_top": ("T_n = 0 (Gauss-Bonnet theorem)", 1e-8),
    "curv.sigma_eigen": ("sigma_k(h) = e_k(eigenvalues of h)", 1e-9),
    "curv.sigma_forms": ("sigma_k = c^k h^k/(k!)^2 = *(g^(n-k) h^k)/((n-k)! k!)", 1e-9),
    "curv.sigma_weyl_split": ("h_2k = (n-k)!k!/(n-2k)! sigma_k + sum_i k!/(i!(k-i)!(n-2k)!) <*g^(n-2k+i)A^i, W^(k-i)>", 1e-8),
    "curv.confflat_split": ("conformally flat: h_2k = (n-k)!k!/(n-2k)! sigma_k", 1e-10),
    "curv.h4_weyl": ("h_4 = |W|^2 + 2(n-2)(n-3) sigma_2", 1e-9),
    "curv.sigma2_display": ("2(n-2)^2 sigma_2 = n/(4(n-1)) |c^2 R|^2 - |cR|^2", 1e-9),
    "curv.einstein_sigma2": ("Einstein: sigma_2 = Scal^2/(8n(n-1))", 1e-10),
    "curv.avez": ("h_4 = |R|^2 - |cR|^2 + |c^2 R|^2/4", 1e-9),
    "curv.product_h4": ("product: h_4 = (h_4)_1 + Scal_1 Scal_2/2 + (h_4)_2", 1e-10),
    "curv.deficiency_einstein": ("Einstein iff |Ric|^2 - Scal^2/n = 0", 1e-10),
    "curv.deficiency_confflat": ("conformally flat iff |R|^2 - |Ric|^2/(n-2) + Scal^2/(2(n-1)(n-2)) = 0", 1e-10),
    "curv.deficiency_spaceform": ("space form iff |R|^2 - Scal^2/(2n(n-1)) = 0", 1e-10),
    # Newton transformations
    "newton.explicit": ("N_k(w) = sum_r (-1)^(r+pk) g^(p-pk+r) c^r w^k/((p-pk+r)! r!)", 1e-9),
    "newton.classic": ("t_k(h) = *(g^(n-k-1) h^k)/((n-k-1)! k!) = sigma_k g - c^(k-1)h^k/((k-1)!k!)", 1e-9),
    "newton.formula": ("<N_k(w), w> = c^(pk+p) w^(k+1)/(pk+p)!", 1e-9),
    "newton.gauss_bonnet": ("h_(2k+2) = <N_k(R), R>", 1e-9),
    "newton.avez_type": ("h_(2k+2) = <c^(2k-2)R^k/(2k-2)!, R> - <c^(2k-1)R^k/(2k-1)!, cR> + h_2k h_2", 1e-9),
    "newton.pq_einstein": ("(2k-2,k)-Einstein: h_(2k+2) = {2k(2k-1)/(n(n-1)) + (n-4k)/n} h_2k h_2", 1e-9),
    "newton.trace1": ("c N_k(R) = (n-2k-1) T_2k", 1e-9),
    "newton.trace2": ("c^2 N_k(R) = (n-2k)(n-2k-1) h_2k", 1e-9),
    "newton.gnf": ("c^(p+k)(w h^k)/(p+k)! = <*(g^(n-p-k) w)/(n-p-k)!, h^k>", 1e-10),
    "newton.n1_tracefree": ("trace-free Bianchi w: N_1(w) = (-1)^p w", 1e-10),
    "newton.n1_selfadjoint": ("<N_1 w, e> = <w, N_1 e>", 1e-10),
    # conformal, pointwise
    "conf.h4_law": ("e^(4f) h4(e^(2f) g) = h_4 + L_g(f)", 1e-4),
    "conf.weyl": ("W(e^(2f) g) = e^(2f) W", 1e-4),
    "conf.riemann": ("R(e^(2f) g) = e^(2f)(R - gH), H = Hess f - df df + |df|^2 g/2", 1e-4),
    "conf.volume": ("mu(e^(2f) g) = e^(nf) mu(g)", 1e-10),
    "conf.cocycle": ("L_g(f+phi) - L_g(f) = e^(4f) L_(e^(2f) g)(phi)", 1e-3),
    "conf.k_law": ("v^((n+12)/(n-4)) h4(v^(8/(n-4)) g) = h_4 v + 8(n-3)/(n-4) L_g(v)", 1e-4),
    "conf.bidegree": ("K_(a^2 g)(phi) = a^(-(n+12)/4) K_g(a^((n-4)/4) phi)", 1e-3),
    # conformal, integrated
    "int.bochner": ("int 2 sigma_2(Hess f) mu = int Ric(grad f, grad f) mu", 1e-6),
    "int.hess_identity": ("int 2 Hess f(grad f, grad f) mu = int |df|^2 Delta f mu", 1e-6),
    "int.L_mean": ("n=4: int L_g(f) mu = 0", 1e-6),
    "int.h4_invariance": ("n=4: int h4(e^(2f) g) mu(e^(2f) g) = int h_4 mu", 1e-6),
    "int.h4_total": ("n>4: int h4bar mubar = int v^4 h_4 + 16(n-3)/(n-4) int v^2 T_2(grad v, grad v) + 16(n-2)(n-3)/(n-4)^3 A(v)", 1e-5),
    "int.ricci_remark": ("(n-4) int v^2 (Ricbar - Ric)(grad v, grad v) mu = -A(v) + 4(n-1) int |dv|^4 mu, "
                         "A(v) = int (n-4)|dv|^2 Delta(v^2) - 4|dv|^4", 1e-5),
    "int.ricci_remark_as_stated": ("(n-4) int v^2 (Ricbar - Ric)(grad v, grad v) mu = -2A'(v) + 4(n-1) int |dv|^4 mu, "
                                   "A'(v) = int (n-4) v|dv|^2 Delta(v^2) - 4|dv|^4", 1e-5),
    # model catalogue
    "model.oracle": ("closed-form invariant of a model manifold", 1e-10),
    "model.chart": ("chart curvature (finite differences) = algebraic model curvature", 1e-5),
}


def anchor(identity: str) -> str:
    return IDENTITIES[identity][0]


def default_tolerance(identity: str) -> float:
    return IDENTITIES[identity][1]


def _clean(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else repr(value)


@dataclass
class Row:
    identity: str
    params: dict
    residual: float | None
    tolerance: float
    lhs: float | None = None
    rhs: float | None = None
    status: str = ""
    note: str = ""

    def __post_init__(self):
        if not self.status:
            if self.residual is None:
                self.status = NOT_APPLICABLE
            else:
                self.status = PASS if self.residual <= self.tolerance else FAIL

    def to_dict(self) -> dict:
        out = {
            "identity": self.identity,
            "anchor": anchor(self.identity),
            "params": self.params,
            "lhs": _clean(self.lhs),
            "rhs": _clean(self.rhs),
            "residual": _clean(self.residual),
            "tolerance": self.tolerance,
            "status": self.status,
        }
        if self.note:
            out["note"] = self.note
        return out


def make_row(identity, params, lhs=None, rhs=None, residual=None, tolerances=None, note=""):
    """Build a row; the residual defaults to |lhs - rhs| / max(1, |lhs|, |rhs|)."""
    tol = (tolerances or {}).get(identity, default_tolerance(identity))
    if residual is None and lhs is not None and rhs is not None:
        lhs, rhs = float(lhs), float(rhs)
        residual = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
    return Row(identity, params, None if residual is None else float(residual), tol,
               lhs, rhs, note=note)


def summarize(rows) -> dict:
    counts = {PASS: 0, FAIL: 0, NOT_APPLICABLE: 0}
    worst = {}
    for row in rows:
        counts[row.status] += 1
        if row.residual is not None:
            worst[row.identity] = max(worst.get(row.identity, 0.0), row.residual)
    return {"counts": counts, "max_residual": dict(sorted(worst.items()))}
