import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from doubleforms import curvinv as cv
from doubleforms.dfalg import (
    DegreeError, contract, from_bilinear, inner_product, metric_form,
)

seeds = st.integers(0, 2**32 - 1)


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return from_bilinear(a + a.T)


def space_form_h(n, k, kappa=1.0):
    return kappa ** k * math.factorial(n) / (2 ** k * math.factorial(n - 2 * k))


def recursive_newton(H, k):
    """t_k = sigma_k I - H t_{k-1}, t_0 = I, from eigenvalues only."""
    eig = np.linalg.eigvalsh(H)
    t = np.eye(len(H))
    for j in range(1, k + 1):
        t = oracles.elementary_symmetric(eig, j) * np.eye(len(H)) - H @ t
    return t


# --- curvature context ---------------------------------------------------

def test_context_invariants_and_generator_examples():
    assert np.allclose(cv.random_curvature(4, h=np.eye(4)).R.entries, metric_form(4, 2).entries)
    ctx = cv.random_curvature(5, 3, seed=7)
    assert ctx.bianchi < 1e-12
    assert np.max(np.abs((ctx.g * ctx.A + ctx.W - ctx.R).entries)) < 1e-10
    assert np.max(np.abs(contract(ctx.W).entries)) < 1e-10
    assert inner_product(cv.random_curvature(4, 6, seed=1).W, cv.random_curvature(4, 6, seed=1).W) > 1e-3


def test_generator_is_deterministic_per_seed():
    a, b = cv.random_curvature(6, 3, seed=11), cv.random_curvature(6, 3, seed=11)
    np.testing.assert_array_equal(a.R.entries, b.R.entries)
    assert not np.array_equal(a.R.entries, cv.random_curvature(6, 3, seed=12).R.entries)


def test_context_rejects_non_curvature():
    ctx = cv.random_curvature(4, 2, seed=3)
    bad = ctx.R.entries.copy()
    bad[0, 5] += 1.0
    bad[5, 0] += 1.0
    with pytest.raises(ValueError):
        cv.CurvatureContext(type(ctx.R)(4, 2, 2, bad))


def test_schouten_examples():
    sf = cv.space_form_curvature(5, 1.0)
    np.testing.assert_allclose(sf.A.entries, 0.5 * np.eye(5), atol=1e-15)
    assert np.max(np.abs(sf.W.entries)) < 1e-14
    flat = cv.space_form_curvature(4, 0.0)
    assert np.max(np.abs(flat.A.entries)) == 0
    with pytest.raises(DegreeError):
        cv.schouten(cv.space_form_curvature(2, 1.0))


# --- Gauss-Bonnet curvatures and Lovelock tensors ------------------------

def test_gauss_bonnet_examples():
    ctx = cv.random_curvature(6, 3, seed=2)
    assert cv.gauss_bonnet(ctx, 0) == 1.0
    assert cv.gauss_bonnet(ctx, 1) == pytest.approx(ctx.scal / 2, rel=1e-12)
    assert cv.gauss_bonnet(cv.space_form_curvature(4, 1.0), 2) == pytest.approx(6.0, rel=1e-12)
    with pytest.raises(DegreeError):
        cv.gauss_bonnet(ctx, 4)


@pytest.mark.parametrize("n", range(2, 9))
def test_gauss_bonnet_on_space_forms(n):
    for kappa in (1.0, -0.5, 2.0):
        ctx = cv.space_form_curvature(n, kappa)
        for k in range(n // 2 + 1):
            assert cv.gauss_bonnet(ctx, k) == pytest.approx(space_form_h(n, k, kappa), rel=1e-12)


@settings(max_examples=100)
@given(st.integers(3, 8), seeds)
def test_gauss_bonnet_expressions_agree(n, seed):
    ctx = cv.random_curvature(n, 3, seed=seed)
    for k in range(n // 2 + 1):
        star, cform = cv.gauss_bonnet_sides(ctx, k)
        assert cv.residual(star, cform) < 1e-9


def test_lovelock_examples():
    ctx = cv.random_curvature(4, 3, seed=5)
    np.testing.assert_array_equal(cv.lovelock(ctx, 0).entries, np.eye(4))
    assert np.max(np.abs(cv.lovelock(ctx, 2).entries)) < 1e-9
    np.testing.assert_allclose(cv.lovelock(cv.space_form_curvature(5, 1.0), 1).entries, 6 * np.eye(5), atol=1e-12)


@given(st.integers(3, 8), seeds)
def test_lovelock_expressions_agree(n, seed):
    ctx = cv.random_curvature(n, 3, seed=seed)
    for k in range(1, (n - 1) // 2 + 1):
        assert cv.residual(*cv.lovelock_sides(ctx, k)) < 1e-9


@pytest.mark.parametrize("n", [4, 6])
def test_top_lovelock_tensor_vanishes(n):
    for seed in range(5):
        ctx = cv.random_curvature(n, 3, seed=seed)
        assert np.max(np.abs(cv.lovelock(ctx, n // 2).entries)) < 1e-9 * max(1.0, abs(cv.gauss_bonnet(ctx, n // 2)))


# --- sigma_k and Newton transformations ----------------------------------

def test_sigma_k_examples():
    h = from_bilinear(np.diag([1.0, 2.0, 3.0]))
    assert cv.sigma_k(h, 0) == 1.0
    assert cv.sigma_k(h, 2) == pytest.approx(11.0, rel=1e-14)
    ctx = cv.random_curvature(5, 3, seed=4)
    assert cv.sigma_k(ctx.A, 1) == pytest.approx(ctx.scal / 8, rel=1e-12)


@given(st.integers(1, 8), seeds)
def test_sigma_k_matches_eigenvalue_oracle(n, seed):
    h = random_symmetric(np.random.default_rng(seed), n)
    eig = np.linalg.eigvalsh(h.matrix())
    for k in range(n + 1):
        expected = oracles.elementary_symmetric(eig, k)
        assert abs(cv.sigma_k(h, k) - expected) < 1e-9 * max(1.0, abs(expected))
        assert cv.residual(*cv.sigma_k_sides(h, k)) < 1e-9


def test_classic_newton_examples():
    h = from_bilinear(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(cv.classic_newton(h, 1).entries, np.diag([2.0, 1.0]), atol=1e-15)
    rng = np.random.default_rng(6)
    h = random_symmetric(rng, 5)
    t1 = cv.classic_newton(h, 1)
    np.testing.assert_allclose(t1.entries, (cv.sigma_k(h, 1) * metric_form(5) - h).entries, atol=1e-12)
    t3 = cv.classic_newton(h, 3)
    assert np.trace(t3.entries) == pytest.approx(2 * cv.sigma_k(h, 3), rel=1e-10)


@given(st.integers(2, 7), seeds)
def test_classic_newton_follows_recursion(n, seed):
    h = random_symmetric(np.random.default_rng(seed), n)
    for k in range(1, n):
        expected = recursive_newton(h.matrix(), k)
        got = cv.classic_newton(h, k).entries
        assert np.max(np.abs(got - expected)) < 1e-9 * max(1.0, np.max(np.abs(expected)))


@given(st.integers(2, 7), seeds)
def test_newton_of_a_bilinear_form_is_scaled_classic_newton(n, seed):
    h = random_symmetric(np.random.default_rng(seed), n)
    for k in range(n):
        N = cv.newton_transform(h, k)
        t = cv.classic_newton(h, k) if k else metric_form(n)
        assert cv.residual(N, t * math.factorial(k)) < 1e-9


def test_newton_examples():
    ctx = cv.random_curvature(6, 3, seed=8)
    W = ctx.W
    np.testing.assert_allclose(cv.newton_transform(W, 1).entries, W.entries, atol=1e-10)
    assert cv.residual(*cv.newton_explicit_sides(ctx.R, 2)) < 1e-9
    assert cv.newton_formula_sides(metric_form(4), 1)[0] == pytest.approx(12.0)
    assert cv.gb_newton_residual(ctx, 1) < 1e-9
    assert cv.gb_newton_residual(cv.random_curvature(8, 3, seed=8), 2) < 1e-9
    with pytest.raises(DegreeError):
        cv.newton_transform(ctx.R, 3)


@given(st.integers(4, 8), seeds)
def test_explicit_newton_formula_matches_definition(n, seed):
    rng = np.random.default_rng(seed)
    ctx = cv.random_curvature(n, 3, seed=seed)
    for k in range(0, min(3, (n - 2) // 2) + 1):
        assert cv.residual(*cv.newton_explicit_sides(ctx.R, k)) < 1e-9
    h = random_symmetric(rng, n)
    for k in range(n):
        assert cv.residual(*cv.newton_explicit_sides(h, k)) < 1e-9


@given(st.integers(4, 7), seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_first_newton_transform_is_linear_and_self_adjoint(n, seed, a, b):
    w = cv.random_curvature(n, 2, seed=seed).R
    e = cv.random_curvature(n, 2, seed=seed + 1).R
    lhs = cv.newton_transform(w * a + e * b, 1)
    rhs = cv.newton_transform(w, 1) * a + cv.newton_transform(e, 1) * b
    assert cv.residual(lhs, rhs) < 1e-9
    x = inner_product(cv.newton_transform(w, 1), e)
    y = inner_product(w, cv.newton_transform(e, 1))
    assert abs(x - y) < 1e-9 * max(1.0, abs(x))


@given(st.integers(3, 8), seeds)
def test_first_newton_transform_on_trace_free_forms(n, seed):
    rng = np.random.default_rng(seed)
    h = random_symmetric(rng, n)
    h0 = h - metric_form(n) * (cv.sigma_k(h, 1) / n)
    np.testing.assert_allclose(cv.newton_transform(h0, 1).entries, -h0.entries, atol=1e-10)
    if n >= 4:
        W = cv.random_curvature(n, 3, seed=seed).W
        np.testing.assert_allclose(cv.newton_transform(W, 1).entries, W.entries, atol=1e-9)


@given(st.integers(3, 8), seeds)
def test_newton_formula_on_curvature_and_gauss_type_forms(n, seed):
    rng = np.random.default_rng(seed)
    ctx = cv.random_curvature(n, 3, seed=seed)
    h2 = random_symmetric(rng, n) ** 2
    for w in (ctx.R, h2):
        for k in range(n // 2):
            assert cv.newton_formula_residual(w, k) < 1e-9
    for k in range(n // 2):
        assert cv.gb_newton_residual(ctx, k) < 1e-9


# --- Avez, pq-Einstein, trace relations ----------------------------------

def test_avez_examples():
    sf = cv.space_form_curvature(4, 1.0)
    assert inner_product(sf.R, sf.R) == pytest.approx(6)
    assert inner_product(sf.ric, sf.ric) == pytest.approx(36)
    assert sf.scal ** 2 == pytest.approx(144)
    lhs, rhs = cv.classical_avez_sides(sf)
    assert lhs == pytest.approx(6) and rhs == pytest.approx(6)
    assert cv.avez_type_residual(sf, 1) < 1e-12


@pytest.mark.parametrize("n,k", [(6, 1), (6, 2), (8, 1), (8, 2), (8, 3)])
def test_avez_type_identity(n, k):
    for seed in range(4):
        ctx = cv.random_curvature(n, 3, seed=seed)
        assert cv.avez_type_residual(ctx, k) < 1e-9
        assert cv.classical_avez_residual(ctx) < 1e-9


def test_pq_einstein_examples():
    sf = cv.space_form_curvature(6, 1.0)
    lhs, rhs = cv.pq_einstein_h_sides(sf, 1)
    assert lhs == pytest.approx(90) and rhs == pytest.approx(90)
    assert cv.pq_einstein_h_residual(cv.space_form_curvature(8, 1.0), 2) < 1e-9
    with pytest.raises(cv.NotApplicable):
        cv.pq_einstein_h_residual(cv.random_curvature(6, 3, seed=0), 1)


def test_trace_relation_examples():
    ctx = cv.random_curvature(5, 3, seed=1)
    N0 = cv.newton_transform(ctx.R, 0)
    np.testing.assert_allclose(contract(N0).entries, 4 * np.eye(5), atol=1e-12)


@given(st.integers(3, 8), seeds)
def test_trace_relations(n, seed):
    ctx = cv.random_curvature(n, 3, seed=seed)
    for k in range((n - 2) // 2 + 1):
        first, second = cv.trace_relations_residual(ctx, k)
        assert first < 1e-9 and second < 1e-9


def test_gnf_examples():
    rng = np.random.default_rng(2)
    w = random_symmetric(rng, 4) ** 2
    h = random_symmetric(rng, 4)
    lhs, rhs = cv.gnf_sides(w, h, 0)
    assert lhs == pytest.approx(contract(w, 2).scalar / 2) and rhs == pytest.approx(lhs)
    assert cv.gnf_residual(metric_form(4), h, 1) < 1e-12
    R = cv.random_curvature(6, 3, seed=3).R
    assert cv.gnf_residual(R, random_symmetric(rng, 6), 2) < 1e-10


# --- Weyl split and quadratic invariants ---------------------------------

def test_sigma_weyl_split_examples():
    rng = np.random.default_rng(5)
    A = random_symmetric(rng, 6)
    cf = cv.conformally_flat_curvature(A)
    for k in range(4):
        expected = math.factorial(6 - k) * math.factorial(k) / math.factorial(6 - 2 * k) * cv.sigma_k(A, k)
        assert cv.residual(cv.gauss_bonnet(cf, k), expected) < 1e-9
    sf = cv.space_form_curvature(5, 1.0)
    assert cv.sigma_k(sf.A, 2) == pytest.approx(2.5)
    assert cv.gauss_bonnet(sf, 2) == pytest.approx(30)


@given(st.integers(3, 8), seeds)
def test_sigma_weyl_split(n, seed):
    ctx = cv.random_curvature(n, 3, seed=seed)
    for k in range(min(3, n // 2) + 1):
        assert cv.sigma_weyl_split_residual(ctx, k) < 1e-8


def test_quadratic_invariants_on_witnesses():
    for n in (4, 5, 7):
        q = cv.quadratic_invariants(cv.space_form_curvature(n, 1.3))
        assert abs(q.einstein_def) < 1e-10 and abs(q.spaceform_def) < 1e-10 and abs(q.confflat_def) < 1e-10
    einstein = cv.product_curvature(cv.space_form_curvature(2, 1.0), cv.space_form_curvature(2, 1.0))
    q = cv.quadratic_invariants(einstein)
    assert abs(q.einstein_def) < 1e-10
    assert q.sigma2 == pytest.approx(einstein.scal ** 2 / (8 * 4 * 3), rel=1e-12)
    assert q.einstein_sigma2_residual is not None and q.einstein_sigma2_residual < 1e-12
    cf = cv.conformally_flat_curvature(random_symmetric(np.random.default_rng(0), 5))
    assert abs(cv.quadratic_invariants(cf).confflat_def) < 1e-10


@given(st.integers(4, 8), seeds)
def test_quadratic_invariants_on_generic_curvature(n, seed):
    ctx = cv.random_curvature(n, 4, seed=seed)
    q = cv.quadratic_invariants(ctx)
    assert q.einstein_def > 1e-3 and q.spaceform_def > 1e-3 and q.confflat_def > 1e-3
    assert abs(q.confflat_def - q.weyl_norm2) < 1e-9 * max(1.0, q.weyl_norm2)
    assert abs(q.h4 - q.weyl_norm2 - 2 * (n - 2) * (n - 3) * q.sigma2) < 1e-9 * max(1.0, abs(q.h4), q.weyl_norm2)
    eig = np.linalg.eigvalsh(ctx.A.matrix())
    assert abs(q.sigma2 - oracles.elementary_symmetric(eig, 2)) < 1e-9 * max(1.0, abs(q.sigma2))


def test_printed_space_form_deficiency_does_not_vanish_on_space_forms():
    q = cv.quadratic_invariants(cv.space_form_curvature(4, 1.0))
    assert q.spaceform_def_printed == pytest.approx(36 - 144 / 24)


# --- products and sign patterns ------------------------------------------

def test_product_examples():
    s2 = cv.space_form_curvature(2, 1.0)
    assert cv.gauss_bonnet(cv.product_curvature(s2, s2), 2) == pytest.approx(2.0)
    a, b = cv.random_curvature(3, 2, seed=1), cv.random_curvature(3, 2, seed=2)
    assert cv.gauss_bonnet(cv.product_curvature(a, b), 2) == pytest.approx(0.5 * a.scal * b.scal, rel=1e-10)
    other = cv.random_curvature(5, 3, seed=3)
    flat = cv.space_form_curvature(3, 0.0)
    assert cv.gauss_bonnet(cv.product_curvature(other, flat), 2) == pytest.approx(cv.gauss_bonnet(other, 2), rel=1e-10)
    with pytest.raises(DegreeError):
        cv.product_curvature(cv.space_form_curvature(7, 1.0), cv.space_form_curvature(6, 1.0))


@given(st.integers(3, 5), st.integers(3, 5), seeds)
def test_product_law_for_h4(n1, n2, seed):
    a, b = cv.random_curvature(n1, 2, seed=seed), cv.random_curvature(n2, 2, seed=seed + 1)
    prod = cv.product_curvature(a, b, check=False)
    ha = cv.gauss_bonnet(a, 2) if n1 >= 4 else 0.0
    hb = cv.gauss_bonnet(b, 2) if n2 >= 4 else 0.0
    expected = ha + 0.5 * a.scal * b.scal + hb
    assert abs(cv.gauss_bonnet(prod, 2) - expected) < 1e-9 * max(1.0, abs(expected))


def closed_form_sigma2(r, p):
    n = 3 + p
    scal = 6 / r ** 2 + p * (p - 1)
    ric2 = 3 * (2 / r ** 2) ** 2 + p * (p - 1) ** 2
    return (n / (4 * (n - 1)) * scal ** 2 - ric2) / (2 * (n - 2) ** 2)


def test_small_sphere_product_sign_pattern():
    rep = cv.s3r_times_sp_signs(0.1, 2)
    assert rep.min_sectional >= -1e-12
    assert rep.min_ricci_eig > 0 and rep.min_einstein_eig > 0
    assert rep.h4 > 0 and rep.sigma2 < 0
    assert rep.sigma2 == pytest.approx(closed_form_sigma2(0.1, 2), rel=1e-10)


def test_unit_sphere_product_sigma2():
    rep = cv.s3r_times_sp_signs(1.0, 2)
    assert rep.sigma2 == pytest.approx(1 / 3, rel=1e-12)
    assert closed_form_sigma2(1.0, 2) == pytest.approx(1 / 3)


def test_large_radius_limit():
    rep = cv.s3r_times_sp_signs(10.0, 2)
    assert rep.sigma2 == pytest.approx(-0.0375, rel=1e-3)
    assert rep.sigma2 == pytest.approx(closed_form_sigma2(10.0, 2), rel=1e-10)


def test_sectional_curvature_oracle_agrees():
    ctx = cv.random_curvature(4, 2, seed=9)
    t = oracles.full_tensor(ctx.R)
    found = cv.min_sectional_curvature(ctx, samples=500)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        assert oracles.sectional_from_tensor(t, x, y) >= found - 0.5
