import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from doubleforms import chart as C
from doubleforms import curvinv as cv
from doubleforms import models
from doubleforms.dfalg import inner_product, metric_form

TWO_PI = 2 * math.pi
field = C.ScalarField.parse


def torus(n, **kw):
    return C.ChartMetric.euclidean(n, [0.0] * n, [TWO_PI] * n, [True] * n, **kw)


def box(n):
    return C.ChartMetric.euclidean(n, [-1.0] * n, [1.0] * n, [False] * n)


def sphere_chart(n, **fd):
    return models.sphere(n).chart(**fd)


def ambient_coordinate(n):
    """First coordinate of the unit sphere in R^(n+1), pulled back by the stereographic chart."""
    r2 = " + ".join(f"x{i}^2" for i in range(1, n + 1))
    return field(f"2*x1/(1 + {r2})")


# --- curvature ------------------------------------------------------------

def test_flat_curvature_vanishes():
    fr = C.curvature_at(box(4), [[0.1, 0.2, -0.3, 0.4], [0.0, 0.0, 0.0, 0.0]])
    assert np.max(np.abs(fr.R.entries)) < 1e-12


def test_round_sphere_at_origin():
    fr = C.curvature_at(sphere_chart(4), np.zeros(4))
    np.testing.assert_allclose(fr.R.entries, 0.5 * metric_form(4, 2).entries, atol=1e-6)
    assert fr.orthonormality_error() < 1e-10


def test_product_chart_block_pattern():
    m = models.product(models.sphere(2), models.sphere(2))
    fr = C.curvature_at(m.chart(), np.array([0.2, -0.1, 0.3, 0.05]))
    t = oracles.full_tensor(fr.R)
    planes = {(0, 1): 1.0, (2, 3): 1.0, (0, 2): 0.0, (0, 3): 0.0, (1, 2): 0.0, (1, 3): 0.0}
    for (i, j), expected in planes.items():
        assert t[i, j, i, j] == pytest.approx(expected, abs=1e-6)


@settings(max_examples=15)
@given(st.integers(2, 5), st.integers(0, 1000))
def test_frames_are_orthonormal_and_satisfy_bianchi(n, seed):
    m = models.space_form(n, 0.7)
    fr = C.curvature_at(m.chart(), m.sample_points(4, seed))
    assert fr.orthonormality_error() < 1e-10
    assert np.max(fr.bianchi) < 1e-6


def fd_error(step, order, point):
    fr = C.curvature_at(sphere_chart(4, fd_order=order, fd_step=step), point)
    return np.max(np.abs(fr.R.entries - 0.5 * metric_form(4, 2).entries))


@pytest.mark.parametrize("order,steps,bounds", [(2, (0.02, 0.01), (3, 5)), (4, (0.1, 0.05), (12, 20))])
def test_finite_difference_convergence_rate(order, steps, bounds):
    point = np.array([0.3, -0.2, 0.1, 0.25])
    ratio = fd_error(steps[0], order, point) / fd_error(steps[1], order, point)
    assert bounds[0] <= ratio <= bounds[1]


def test_non_positive_metric_is_rejected():
    bad = C.ChartMetric.from_expressions([["1", "0"], ["0", "-1"]], [-1, -1], [1, 1], [False, False])
    with pytest.raises(C.ChartError):
        C.curvature_at(bad, [0.0, 0.0])


def test_metric_construction_errors():
    with pytest.raises(C.ChartError):
        C.ChartMetric.from_expressions([["1", "x1"], ["x2", "1"]], [0, 0], [1, 1], [False, False])
    with pytest.raises(C.ChartError):
        C.ChartMetric.from_expressions([["1", "0"], ["0", "1 + x3^2"]], [0, 0], [1, 1], [False, False])
    with pytest.raises(C.ChartError):
        torus(3, fd_order=3)
    with pytest.raises(C.ChartError):
        C.curvature_at(torus(3, fd_step=1e-300), np.ones(3))


def test_expression_metric_matches_closed_form_chart():
    r2 = "x1^2 + x2^2 + x3^2"
    entry = f"4/(1 + {r2})^2"
    m = C.ChartMetric.from_expressions([[entry if i == j else "0" for j in range(3)] for i in range(3)],
                                       [-1] * 3, [1] * 3, [False] * 3)
    x = np.array([0.2, 0.1, -0.3])
    a, b = C.curvature_at(m, x), C.curvature_at(sphere_chart(3), x)
    np.testing.assert_allclose(a.R.entries, b.R.entries, atol=1e-8)


# --- Hessians and Laplace-type operators ----------------------------------

def test_hessian_examples():
    x = np.array([0.3, -0.4, 0.2])
    half_norm = field("0.5*(x1^2 + x2^2 + x3^2)")
    np.testing.assert_allclose(C.covariant_hessian(box(3), half_norm, x).entries, np.eye(3), atol=1e-9)
    linear = field("2*x1 - x2 + 0.5*x3")
    assert np.max(np.abs(C.covariant_hessian(box(3), linear, x).entries)) < 1e-9


def test_sphere_eigenfunction_hessian():
    n = 4
    f = ambient_coordinate(n)
    pts = models.sphere(n).sample_points(5, seed=3)
    hess = C.covariant_hessian(sphere_chart(n), f, pts)
    for i, p in enumerate(pts):
        np.testing.assert_allclose(hess.entries[i], -f(p[None])[0] * np.eye(n), atol=1e-7)


def test_laplacian_sign_and_trace():
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert C.ell_2k(box(4), field("0.5*(x1^2 + x2^2 + x3^2 + x4^2)"), x, 0) == pytest.approx(-4.0, abs=1e-9)
    f = field("sin(x1)*cos(x2) + x3*x4^2")
    pts = models.sphere(4).sample_points(6, seed=1)
    lap = C.ell_2k(sphere_chart(4), f, pts, 0)
    tr = np.trace(C.covariant_hessian(sphere_chart(4), f, pts).entries, axis1=-2, axis2=-1)
    np.testing.assert_allclose(lap, -tr, atol=1e-10)


def test_ell_2_on_space_form_uses_lovelock_tensor():
    n = 5
    f = field("x1*x2 + sin(x3)")
    pts = models.sphere(n).sample_points(4, seed=2)
    tr = np.trace(C.covariant_hessian(sphere_chart(n), f, pts).entries, axis1=-2, axis2=-1)
    t2 = (n - 1) * (n - 2) / 2
    np.testing.assert_allclose(C.ell_2k(sphere_chart(n), f, pts, 1), -t2 * tr, rtol=1e-6, atol=1e-7)
    with pytest.raises(C.ChartError):
        C.ell_2k(sphere_chart(4), f, pts[:, :4], 2)


def test_hessian_sigma_k():
    x = np.array([0.1, 0.2, 0.3, 0.4])
    half_norm = field("0.5*(x1^2 + x2^2 + x3^2 + x4^2)")
    for k in range(5):
        assert C.hessian_sigma_k(box(4), half_norm, x, k) == pytest.approx(math.comb(4, k), rel=1e-8)
    f = field("exp(0.3*x1)*cos(x2) + x3^3*x4")
    pts = models.sphere(4).sample_points(5, seed=4)
    chart = sphere_chart(4)
    np.testing.assert_allclose(C.hessian_sigma_k(chart, f, pts, 1), -C.ell_2k(chart, f, pts, 0), atol=1e-10)
    hess = C.covariant_hessian(chart, f, pts).entries
    for k in range(5):
        expected = [oracles.elementary_symmetric(np.linalg.eigvalsh(h), k) for h in hess]
        np.testing.assert_allclose(C.hessian_sigma_k(chart, f, pts, k), expected, rtol=1e-9, atol=1e-9)


# --- conformal h4 operator ------------------------------------------------

def test_constant_conformal_factor():
    chart = sphere_chart(4)
    pts = models.sphere(4).sample_points(3, seed=0)
    check = C.conformal_h4_check(chart, C.ScalarField.constant(0.3), pts)
    np.testing.assert_allclose(check.operator, 0.0, atol=1e-12)
    np.testing.assert_allclose(check.lhs, 6.0, rtol=1e-6)


def test_conformal_h4_law_on_flat_torus():
    pts = np.random.default_rng(0).uniform(0, TWO_PI, (10, 4))
    check = C.conformal_h4_check(torus(4), field("0.1*sin(x1)*cos(x2)"), pts)
    assert np.max(check.residual) < 1e-4
    assert np.max(check.volume_residual) < 1e-10
    assert np.max(check.riemann_residual) < 1e-6


def test_conformal_h4_law_on_sphere_chart():
    m = models.sphere(5)
    check = C.conformal_h4_check(m.chart(), field("0.2*x1^2 - 0.1*x2*x3 + 0.05*x4"), m.sample_points(6, seed=5))
    assert np.max(check.residual) < 1e-4
    assert np.max(check.weyl_residual) < 1e-6


def test_weyl_tensor_rescales_on_non_conformally_flat_base():
    m = models.product(models.sphere(2), models.sphere(2))
    f = field("0.1*x1 + 0.2*x3*x4")
    pts = m.sample_points(4, seed=6)
    check = C.conformal_h4_check(m.chart(), f, pts)
    assert np.max(check.weyl_residual) < 1e-6
    assert np.max(check.residual) < 1e-4
    # |W|^2 in frames of e^(2f) g equals e^(-4f) |W|^2
    bar = C.curvature_at(m.chart().conformal((2 * f).exp()), pts)
    base = C.curvature_at(m.chart(), pts)
    ratio = inner_product(bar.ctx.W, bar.ctx.W) / inner_product(base.ctx.W, base.ctx.W)
    np.testing.assert_allclose(ratio, np.exp(-4 * f(pts)), rtol=1e-6)


def test_conformal_check_converges_under_refinement():
    f = field("0.3*x1*x2 + 0.2*x3")
    x = np.array([[0.2, 0.1, -0.15, 0.3]])
    residuals = [float(C.conformal_h4_check(sphere_chart(4, fd_step=h), f, x).residual[0]) for h in (0.2, 0.1, 0.05)]
    assert residuals[0] > residuals[1] > residuals[2]


def test_cocycle():
    chart = torus(4)
    pts = np.random.default_rng(1).uniform(0, TWO_PI, (8, 4))
    f, phi = field("0.1*sin(x1)*cos(x2)"), field("0.05*cos(x1 + x2)")
    assert np.max(C.cocycle_check(chart, f, C.ScalarField.constant(0.0), pts)) == 0.0
    assert np.max(C.cocycle_check(chart, C.ScalarField.constant(0.0), phi, pts)) == 0.0
    assert np.max(C.cocycle_check(chart, f, phi, pts)) < 1e-4


# --- power operators -------------------------------------------------------

def test_power_ops_with_unit_factor():
    m = models.sphere(5)
    ops = C.conformal_power_ops(m.chart(), C.ScalarField.constant(1.0), m.sample_points(3, seed=2))
    np.testing.assert_allclose(ops.L, 0.0, atol=1e-12)
    np.testing.assert_allclose(ops.K, 1 / 16 * 30, rtol=1e-6)
    np.testing.assert_allclose(ops.lhs, ops.rhs, rtol=1e-6)


def test_power_ops_on_torus_and_sphere():
    pts = np.random.default_rng(2).uniform(0, TWO_PI, (8, 5))
    assert np.max(C.conformal_power_ops(torus(5), field("1 + 0.1*sin(x1)"), pts).residual) < 1e-4
    m = models.sphere(5)
    ops = C.conformal_power_ops(m.chart(), field("1 + 0.1*x1^2 - 0.05*x2*x3"), m.sample_points(6, seed=8))
    assert np.max(ops.residual) < 1e-4


def test_power_ops_errors():
    with pytest.raises(C.ChartError, match="positive|> 0|<= 0"):
        C.conformal_power_ops(torus(5), field("sin(x1)"), np.array([[4.0, 0, 0, 0, 0]]))
    with pytest.raises(C.ChartError):
        C.conformal_power_ops(torus(4), field("1 + 0.1*sin(x1)"), np.zeros((1, 4)))


def test_bidegree_covariance():
    pts = np.random.default_rng(3).uniform(0, TWO_PI, (6, 5))
    chart = torus(5)
    phi = field("1 + 0.1*cos(x2)")
    assert np.max(C.bidegree_covariance_check(chart, C.ScalarField.constant(1.0), phi, pts)) < 1e-12
    m = models.sphere(5)
    sp = m.sample_points(4, seed=1)
    assert np.max(C.bidegree_covariance_check(m.chart(), C.ScalarField.constant(1.7), phi, sp)) < 1e-6
    assert np.max(C.bidegree_covariance_check(chart, field("1 + 0.1*sin(x1)"), phi, pts)) < 1e-3


# --- quadrature -----------------------------------------------------------

def test_integrate_examples():
    assert C.integrate(torus(4), C.ScalarField.constant(1.0), 4) == pytest.approx(TWO_PI ** 4, rel=1e-14)
    assert C.integrate(torus(1), field("sin(x1)^2"), 8) == pytest.approx(math.pi, rel=1e-14)
    f = field("sin(x1)*cos(x2) + 0.3*cos(2*x3)")
    chart = torus(3)

    def lap(pts):
        return C.ell_2k(chart, f, pts, 0)

    assert abs(C.integrate(chart, lap, 12, axes={0, 1, 2})) < 1e-8


@given(st.integers(1, 4), st.integers(0, 3))
def test_trig_polynomials_integrate_exactly(bandwidth, offset):
    expr = f"(1 + cos({bandwidth}*x1))*sin(x2)^2"
    res = 2 * bandwidth + 1 + offset
    value = C.integrate(torus(2), field(expr), res)
    assert value == pytest.approx(TWO_PI * math.pi, rel=1e-12)


def test_integrate_vector_valued_and_rejects_non_periodic():
    cols = C.integrate(torus(2), lambda p: np.stack([np.ones(len(p)), np.cos(p[:, 0]) ** 2], axis=-1), 8, axes={0, 1})
    np.testing.assert_allclose(cols, [TWO_PI ** 2, 2 * math.pi ** 2], rtol=1e-14)
    with pytest.raises(C.ChartError):
        C.integrate(sphere_chart(3), C.ScalarField.constant(1.0), 4)


def test_integrate_on_conformal_torus_density():
    chart = torus(2).conformal(field("exp(0.4*sin(x1))"))
    value = C.integrate(chart, C.ScalarField.constant(1.0), 32)
    # sqrt(det) = exp(0.4 sin x1); its mean is I0(0.4)
    i0 = sum((0.2 ** 2) ** k / math.factorial(k) ** 2 for k in range(20))
    assert value == pytest.approx(TWO_PI ** 2 * i0, rel=1e-12)


def statuses(rows):
    return {r.identity: r for r in rows}


def test_integral_suite_constant_field_is_exact():
    rows = C.integral_identity_suite(torus(4), C.ScalarField.constant(0.2), 4)
    assert all(abs(r.residual) < 1e-12 for r in rows)


def test_integral_suite_on_four_torus():
    rows = statuses(C.integral_identity_suite(torus(4), field("sin(x1)*sin(x2)"), 16))
    assert set(rows) == {"int.bochner", "int.hess_identity", "int.L_mean", "int.h4_invariance"}
    for r in rows.values():
        assert r.status == "pass" and r.residual < 1e-6


def test_integral_suite_on_five_torus():
    rows = statuses(C.integral_identity_suite(torus(5), field("1.5 + 0.3*cos(x1)"), 16))
    assert {"int.h4_total", "int.ricci_remark"} <= set(rows)
    for r in rows.values():
        assert r.status == "pass" and r.residual < 1e-5


def test_integral_suite_as_stated_remark_fails_honestly():
    rows = statuses(C.integral_identity_suite(torus(5), field("1 + 0.1*sin(x1)"), 16, as_stated=True))
    assert rows["int.ricci_remark"].status == "pass"
    assert rows["int.ricci_remark_as_stated"].status == "fail"


def test_integral_suite_preconditions():
    with pytest.raises(C.ChartError):
        C.integral_identity_suite(sphere_chart(4), field("x1"), 4)
    with pytest.raises(C.ChartError):
        C.integral_identity_suite(torus(3), field("sin(x1)"), 4)


# --- scalar fields ----------------------------------------------------------

def test_scalar_field_algebra():
    p = np.array([[0.5, 2.0]])
    f, g = field("x1"), field("x2")
    assert ((f + g) * 2 - f / g)(p)[0] == pytest.approx(5.0 - 0.25)
    assert (g ** 0.5)(p)[0] == pytest.approx(math.sqrt(2))
    assert (f.exp().log())(p)[0] == pytest.approx(0.5)
    assert (-f)(p)[0] == -0.5
    with pytest.raises((C.ChartError, ArithmeticError, ValueError)):
        (field("x1 - 1") ** 0.5)(p)


def test_curvature_context_of_frame_matches_models():
    m = models.space_form(4, -0.5)
    fr = C.curvature_at(m.chart(), m.sample_points(3, seed=9))
    for i in range(3):
        got = cv.gauss_bonnet(cv.CurvatureContext(type(fr.R)(4, 2, 2, fr.R.entries[i]), check=False), 2)
        assert got == pytest.approx(m.oracles["h4"], rel=1e-6)
