"""Verification suites: tasks, per-task row generation and deterministic aggregation.

A suite expands into a list of :class:`Task` values.  Each task is pure
given its parameters (its random stream comes from its own seed), so tasks
can run in any process and in any order; :func:`aggregate` then folds the
rows in task order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chart, curvinv as ci
from .dfalg import (DoubleForm, contract, debug_corrupt_star, first_bianchi_residual,
                    from_bilinear, hodge_star, inner_product, metric_form, tuple_value)
from .models import build_model, flat_torus
from .report import Row, make_row

SUITES = ("algebra", "curvature-identities", "newton", "conformal-pointwise", "conformal-integral")
SUITE_CHOICES = SUITES + ("all",)

# parameters that identify a single trial rather than a row group
_TRIAL_KEYS = ("trial", "seed", "point")

DEFAULT_FIELDS = {
    "f": "0.1*sin(x1)*cos(x2)",
    "phi": "0.05*cos(x1 + x2)",
    "v": "1 + 0.1*sin(x1)",
    "a": "1 + 0.1*cos(x2)",
}


@dataclass(frozen=True)
class Task:
    suite: str
    n: int
    trial: int
    seed: int
    options: dict = field(default_factory=dict, hash=False)


def task_seed(seed: int, suite: str, n: int, trial: int) -> int:
    key = [seed, SUITES.index(suite), n, trial]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def _form_rows(identity, params, lhs, rhs, tolerances, absolute=False):
    """Row for a form-valued identity; lhs/rhs are reported as max |entry|."""
    if absolute:
        res = float(np.max(np.abs(lhs.entries - rhs.entries)))
    else:
        res = float(ci.residual(lhs, rhs))
    return make_row(identity, params, float(np.max(np.abs(lhs.entries))), float(np.max(np.abs(rhs.entries))),
                    residual=res, tolerances=tolerances, note="lhs/rhs: max |entry|")


def _k_allowed(options, k):
    ks = options.get("k")
    return ks is None or k in ks


def _random_form(rng, n, p, q):
    return DoubleForm(n, p, q, rng.standard_normal((math.comb(n, p), math.comb(n, q))))


def _random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return from_bilinear(a + a.T)


# --- algebra ------------------------------------------------------------------


def algebra_rows(task: Task, tol):
    n, rng = task.n, np.random.default_rng(task.seed)
    base = {"n": n, "trial": task.trial, "seed": task.seed}
    rows = []
    for p, q, r in ((1, 1, 1), (1, 2, 1), (2, 2, 1), (1, 1, 2), (0, 0, 2)):
        if max(p, q) + r > n or not _k_allowed(task.options, r):
            continue
        w, e = _random_form(rng, n, p, q), _random_form(rng, n, p + r, q + r)
        lhs = inner_product(metric_form(n, r) * w, e)
        rhs = inner_product(w, contract(e, r))
        rows.append(make_row("alg.adjoint", dict(base, p=p, q=q, k=r), lhs, rhs, tolerances=tol))
    for p in range(0, min(n, 3) + 1):
        w = _random_form(rng, n, p, p)
        rows.append(_form_rows("alg.star_involution", dict(base, p=p), hodge_star(hodge_star(w)), w, tol))
    for p, r in ((1, 1), (2, 1), (1, 2), (2, 2)):
        if p + r > n or not _k_allowed(task.options, r):
            continue
        w = _random_form(rng, n, p, p)
        g_r = metric_form(n, r)
        rows.append(_form_rows("alg.star_conj_g", dict(base, p=p, k=r), g_r * w,
                               hodge_star(contract(hodge_star(w), r)), tol))
        e = _random_form(rng, n, p + r, p + r)
        rows.append(_form_rows("alg.star_conj_c", dict(base, p=p + r, k=r), contract(e, r),
                               hodge_star(g_r * hodge_star(e)), tol))
    h = _random_symmetric(rng, n)
    for k in range(1, min(n, 4) + 1):
        if not _k_allowed(task.options, k):
            continue
        xs = tuple(int(i) for i in rng.choice(n, k, replace=False))
        ys = tuple(int(i) for i in rng.choice(n, k, replace=False))
        lhs = tuple_value(h ** k, xs, ys)
        rhs = math.factorial(k) * np.linalg.det(h.matrix()[np.ix_(xs, ys)])
        rows.append(make_row("alg.determinant", dict(base, k=k), lhs, rhs, tolerances=tol))
    for m in range(1, n + 1):
        for r in range(1, m + 1):
            if not _k_allowed(task.options, r):
                continue
            coeff = math.factorial(m) / math.factorial(m - r) * math.factorial(n - m + r) / math.factorial(n - m)
            rows.append(_form_rows("alg.metric_contraction", dict(base, m=m, k=r),
                                   contract(metric_form(n, m), r), metric_form(n, m - r) * coeff, tol))
    a, b, c = _random_form(rng, n, 1, 1), _random_form(rng, n, 1, 0), _random_form(rng, n, 0, 1)
    rows.append(_form_rows("alg.associativity", dict(base), (a * b) * c, a * (b * c), tol))
    bianchi = first_bianchi_residual(h * h)
    rows.append(make_row("alg.bianchi_h2", dict(base), bianchi, 0.0,
                         residual=bianchi / max(1.0, float(np.max(np.abs((h * h).entries)))), tolerances=tol))
    return rows


# --- curvature identities ---------------------------------------------------------


def _elementary_symmetric(eigs, k):
    return float(np.poly(eigs)[k] * (-1) ** k)


def _product_factor(rng, n):
    if n >= 3:
        return ci.random_curvature(n, seed=int(rng.integers(2 ** 32)))
    return ci.space_form_curvature(n, float(rng.uniform(-2, 2)))


def curvature_rows(task: Task, tol):
    n, rng = task.n, np.random.default_rng(task.seed)
    base = {"n": n, "trial": task.trial, "seed": task.seed}
    ks = [k for k in range(1, n // 2 + 1) if _k_allowed(task.options, k)]
    ctx = ci.random_curvature(n, seed=int(rng.integers(2 ** 32)))
    rows = []
    for k in ks:
        rows.append(make_row("curv.gauss_bonnet", dict(base, k=k), *ci.gauss_bonnet_sides(ctx, k), tolerances=tol))
        if 2 * k < n:
            rows.append(_form_rows("curv.lovelock", dict(base, k=k), *ci.lovelock_sides(ctx, k), tol))
    if n % 2 == 0 and _k_allowed(task.options, n // 2):
        T = ci.lovelock(ctx, n // 2, check=False)
        rows.append(_form_rows("curv.lovelock_top", dict(base, k=n // 2), T, metric_form(n, 1) * 0.0, tol,
                               absolute=True))
    A = ctx.A
    eigs = np.linalg.eigvalsh(A.matrix())
    for k in range(0, n + 1):
        if k and not _k_allowed(task.options, k):
            continue
        rows.append(make_row("curv.sigma_eigen", dict(base, k=k), ci.sigma_k(A, k, check=False),
                             _elementary_symmetric(eigs, k), tolerances=tol))
        rows.append(make_row("curv.sigma_forms", dict(base, k=k), *ci.sigma_k_sides(A, k), tolerances=tol))
    for k in ks:
        if k <= 3:
            rows.append(make_row("curv.sigma_weyl_split", dict(base, k=k), *ci.sigma_weyl_split_sides(ctx, k),
                                 tolerances=tol))
    flat = ci.conformally_flat_curvature(_random_symmetric(rng, n))
    for k in ks:
        coeff = math.factorial(n - k) * math.factorial(k) / math.factorial(n - 2 * k)
        rows.append(make_row("curv.confflat_split", dict(base, k=k), ci.gauss_bonnet(flat, k, check=False),
                             coeff * ci.sigma_k(flat.A, k, check=False), tolerances=tol))
    if n >= 4:
        q = ci.quadratic_invariants(ctx, tol=math.inf)
        rows.append(make_row("curv.h4_weyl", dict(base), q.h4, q.weyl_norm2 + 2 * (n - 2) * (n - 3) * q.sigma2,
                             tolerances=tol))
        rows.append(make_row("curv.sigma2_display", dict(base), q.sigma2, ci.sigma_k(A, 2, check=False),
                             tolerances=tol))
        rows.append(make_row("curv.avez", dict(base), *ci.classical_avez_sides(ctx), tolerances=tol))
        kappa = float(rng.uniform(-2, 2))
        space = ci.space_form_curvature(n, kappa)
        qs = ci.quadratic_invariants(space, tol=math.inf)
        rows.append(make_row("curv.einstein_sigma2", dict(base, kappa=kappa), qs.sigma2,
                             space.scal ** 2 / (8 * n * (n - 1)), tolerances=tol))
        rows.append(make_row("curv.deficiency_einstein", dict(base, case="space form"), qs.einstein_def, 0.0,
                             tolerances=tol))
        rows.append(make_row("curv.deficiency_spaceform", dict(base, case="space form"), qs.spaceform_def, 0.0,
                             tolerances=tol))
        qf = ci.quadratic_invariants(flat, tol=math.inf)
        rows.append(make_row("curv.deficiency_confflat", dict(base, case="conformally flat"), qf.confflat_def, 0.0,
                             residual=abs(qf.confflat_def) / max(1.0, float(inner_product(flat.R, flat.R))),
                             tolerances=tol))
        n1 = n // 2
        c1, c2 = _product_factor(rng, n1), _product_factor(rng, n - n1)
        prod = ci.product_curvature(c1, c2, check=False)
        law = ci._h4_or_zero(c1) + 0.5 * c1.scal * c2.scal + ci._h4_or_zero(c2)
        rows.append(make_row("curv.product_h4", dict(base, split=[n1, n - n1]), ci.gauss_bonnet(prod, 2, check=False),
                             law, tolerances=tol))
    return rows


# --- Newton transformations ---------------------------------------------------------


def newton_rows(task: Task, tol):
    n, rng = task.n, np.random.default_rng(task.seed)
    base = {"n": n, "trial": task.trial, "seed": task.seed}
    ctx = ci.random_curvature(n, seed=int(rng.integers(2 ** 32)))
    h = _random_symmetric(rng, n)
    R = ctx.R
    rows = []
    for k in range(0, 4):
        if 2 * k <= n - 2 and _k_allowed(task.options, k):
            rows.append(_form_rows("newton.explicit", dict(base, p=2, k=k), *ci.newton_explicit_sides(R, k), tol))
        if 2 * (k + 1) <= n and _k_allowed(task.options, k):
            rows.append(make_row("newton.formula", dict(base, p=2, k=k), *ci.newton_formula_sides(R, k),
                                 tolerances=tol))
    for k in range(0, n):
        if not _k_allowed(task.options, k):
            continue
        rows.append(_form_rows("newton.explicit", dict(base, p=1, k=k), *ci.newton_explicit_sides(h, k), tol))
        rows.append(make_row("newton.formula", dict(base, p=1, k=k), *ci.newton_formula_sides(h, k), tolerances=tol))
        if k >= 1:
            rows.append(_form_rows("newton.classic", dict(base, k=k), *ci.classic_newton_sides(h, k), tol))
    kappa = float(rng.uniform(0.5, 2.0))
    space = ci.space_form_curvature(n, kappa)
    for k in range(0, n // 2):
        if not _k_allowed(task.options, k):
            continue
        rows.append(make_row("newton.gauss_bonnet", dict(base, k=k), *ci.gb_newton_sides(ctx, k), tolerances=tol))
        first, second = ci.trace_relations_sides(ctx, k)
        rows.append(_form_rows("newton.trace1", dict(base, k=k), *first, tol))
        rows.append(make_row("newton.trace2", dict(base, k=k), *second, tolerances=tol))
        if k >= 1:
            rows.append(make_row("newton.avez_type", dict(base, k=k), *ci.avez_type_sides(ctx, k), tolerances=tol))
            rows.append(make_row("newton.pq_einstein", dict(base, k=k, case="space form", kappa=kappa),
                                 *ci.pq_einstein_h_sides(space, k), tolerances=tol))
            try:
                sides = ci.pq_einstein_h_sides(ctx, k)
                rows.append(make_row("newton.pq_einstein", dict(base, k=k, case="generic"), *sides, tolerances=tol))
            except ci.NotApplicable as exc:
                rows.append(make_row("newton.pq_einstein", dict(base, k=k, case="generic"), tolerances=tol,
                                     note=str(exc)))
    for k in range(0, n - 1):
        if _k_allowed(task.options, k):
            rows.append(make_row("newton.gnf", dict(base, p=2, k=k), *ci.gnf_sides(R, h, k), tolerances=tol))
    if n >= 4 and _k_allowed(task.options, 1):
        W = ctx.W
        rows.append(_form_rows("newton.n1_tracefree", dict(base, p=2, k=1), ci.newton_transform(W, 1, check=False),
                               W, tol))
        t = h - metric_form(n, 1).scaled(np.trace(h.matrix()) / n)
        rows.append(_form_rows("newton.n1_tracefree", dict(base, p=1, k=1), ci.newton_transform(t, 1, check=False),
                               -t, tol))
        other = ci.random_curvature(n, seed=int(rng.integers(2 ** 32))).R
        rows.append(make_row("newton.n1_selfadjoint", dict(base, p=2, k=1),
                             inner_product(ci.newton_transform(R, 1, check=False), other),
                             inner_product(R, ci.newton_transform(other, 1, check=False)), tolerances=tol))
    return rows


# --- conformal suites -------------------------------------------------------------------


def _manifold(options, n):
    desc = options.get("manifold")
    fd = {"fd_order": options.get("fd_order", 4)}
    if options.get("fd_step") is not None:
        fd["fd_step"] = options["fd_step"]
    if desc is None:
        return flat_torus(n).chart(**fd)
    if "metric" in desc:
        return chart.ChartMetric.from_expressions(desc["metric"], desc["lows"], desc["highs"], desc["periodic"], **fd)
    return build_model(desc).chart(**fd)


def _fields(options):
    fields = dict(DEFAULT_FIELDS)
    fields.update(options.get("fields") or {})
    return fields


def sample_points(metric, count, seed):
    lows, highs = np.asarray(metric.lows, float), np.asarray(metric.highs, float)
    margin = np.where(metric.periodic, 0.0, 0.1 * (highs - lows))
    rng = np.random.default_rng(seed)
    return rng.uniform(lows + margin, highs - margin, size=(count, metric.n))


def conformal_pointwise_rows(task: Task, tol):
    opts = task.options
    metric = _manifold(opts, task.n)
    n = metric.n
    fields = _fields(opts)
    point = sample_points(metric, 1, task.seed)[0]
    base = {"n": n, "trial": task.trial, "seed": task.seed, "point": [float(c) for c in point]}
    rows = []
    check = chart.conformal_h4_check(metric, fields["f"], point)
    rows.append(make_row("conf.h4_law", dict(base, f=fields["f"]), check.lhs, check.rhs, tolerances=tol))
    rows.append(make_row("conf.weyl", dict(base, f=fields["f"]), residual=check.weyl_residual, tolerances=tol))
    rows.append(make_row("conf.riemann", dict(base, f=fields["f"]), residual=check.riemann_residual, tolerances=tol))
    rows.append(make_row("conf.volume", dict(base, f=fields["f"]), residual=check.volume_residual, tolerances=tol))
    rows.append(make_row("conf.cocycle", dict(base, f=fields["f"], phi=fields["phi"]),
                         residual=chart.cocycle_check(metric, fields["f"], fields["phi"], point), tolerances=tol))
    if n > 4:
        ops = chart.conformal_power_ops(metric, fields["v"], point)
        rows.append(make_row("conf.k_law", dict(base, v=fields["v"]), ops.lhs, ops.rhs, tolerances=tol))
        rows.append(make_row("conf.bidegree", dict(base, a=fields["a"], phi=fields["v"]),
                             residual=chart.bidegree_covariance_check(metric, fields["a"], fields["v"], point),
                             tolerances=tol))
    return rows


def conformal_integral_rows(task: Task, tol):
    opts = task.options
    metric = _manifold(opts, task.n)
    fields = _fields(opts)
    name = "f" if metric.n == 4 else "v"
    return chart.integral_identity_suite(metric, fields[name], opts.get("resolution", 16), tolerances=tol,
                                         params={"field_name": name}, as_stated=opts.get("as_stated", False))


_RUNNERS = {
    "algebra": algebra_rows,
    "curvature-identities": curvature_rows,
    "newton": newton_rows,
    "conformal-pointwise": conformal_pointwise_rows,
    "conformal-integral": conformal_integral_rows,
}


def run_task(task: Task) -> list[Row]:
    tol = task.options.get("tolerances") or {}
    runner = _RUNNERS[task.suite]
    if task.options.get("debug_corrupt_star"):
        with debug_corrupt_star():
            return runner(task, tol)
    return runner(task, tol)


def build_tasks(suite: str, ns, trials: int, seed: int, options: dict) -> list[Task]:
    """Expand a suite over dimensions and trials.

    Conformal suites run on an explicit manifold when ``options`` holds one
    (its dimension comes from ``options["manifold_n"]``), otherwise on flat
    tori of every requested n >= 4.
    """
    suites = SUITES if suite == "all" else (suite,)
    tasks = []
    for name in suites:
        if name.startswith("conformal"):
            dims = [options["manifold_n"]] if options.get("manifold") else [n for n in ns if n >= 4]
        else:
            dims = [n for n in ns if n >= 3]
        count = 1 if name == "conformal-integral" else trials
        for n in dims:
            for trial in range(count):
                tasks.append(Task(name, n, trial, task_seed(seed, name, n, trial), options))
    return tasks


def aggregate(rows_per_task) -> list[Row]:
    """Fold per-trial rows into one row per (identity, parameters), keeping the worst trial."""
    groups: dict = {}
    counts: dict = {}
    for rows in rows_per_task:
        for row in rows:
            key_params = {k: v for k, v in row.params.items() if k not in _TRIAL_KEYS}
            key = (row.identity, repr(sorted(key_params.items())))
            counts[key] = counts.get(key, 0) + 1
            best = groups.get(key)
            if best is None or _worse(row, best):
                groups[key] = row
    out = []
    for key, row in groups.items():
        row.params = dict(row.params, trials=counts[key])
        out.append(row)
    return out


def _worse(row, best):
    if best.residual is None:
        return row.residual is not None
    if row.residual is None:
        return False
    if math.isnan(row.residual):
        return not math.isnan(best.residual)
    return row.residual > best.residual


__all__ = ["SUITES", "SUITE_CHOICES", "Task", "task_seed", "build_tasks", "run_task", "aggregate",
           "sample_points", "DEFAULT_FIELDS"]
