import numpy as np
import pytest
from hypothesis import given, strategies as st

from advest.basis import BrokenPoly, project_l2
from advest.mesh import build_uniform, hat_function, patches
from advest.problem import AdvectionProblem, Arctan, PiecewisePolynomial, Polynomial, piecewise_quadratic
from advest.residual import (apply_residual, check_hat_orthogonality, dual_norm_global, dual_norms_local,
                             hat_residuals, patch_dual_norm)
from advest.estimators import exact_error
from advest.solvers import MIN_DEGREE, solve

from conftest import meshes, velocities


def exact_poly(mesh, beta=1.0):
    """f = 1 + 2x has u = (x + x^2) / beta, exactly representable at degree 2."""
    pr = AdvectionProblem(beta, Polynomial([1.0, 2.0]))
    a = mesh.vertices[0]
    u = project_l2(lambda x: (x + x * x - a - a * a) / beta, mesh, 2, q=4)
    return pr, u


def test_residual_vanishes_at_exact(unit4):
    pr, u = exact_poly(unit4)
    v = lambda x: np.sin(3 * x) * (1 - x)
    dv = lambda x: 3 * np.cos(3 * x) * (1 - x) - np.sin(3 * x)
    assert abs(apply_residual(u, pr, v, dv, q=20)) < 1e-14


def test_residual_zero_test(unit4):
    pr = AdvectionProblem(1.0, Arctan())
    u = solve("pg2", pr, unit4, 1)
    z = lambda x: np.zeros_like(x)
    assert apply_residual(u, pr, z, z) == 0.0


def test_residual_closed_form():
    m = build_uniform((0, 1), 3)
    pr = AdvectionProblem(1.0, Polynomial([1.0]))
    u = BrokenPoly.zeros(m, 1)
    assert apply_residual(u, pr, lambda x: 1 - x, lambda x: -np.ones_like(x)) == pytest.approx(0.5)


@given(meshes(max_elements=6), st.floats(-3, 3), st.floats(-3, 3))
def test_residual_linear(mesh, a, b):
    pr = AdvectionProblem(1.3, Arctan())
    rng = np.random.default_rng(0)
    u = BrokenPoly(mesh, rng.normal(size=(mesh.n_elements, 3)))
    v1, v2 = (BrokenPoly(mesh, rng.normal(size=(mesh.n_elements, 2))) for _ in range(2))
    lhs = apply_residual(u, pr, a * v1 + b * v2)
    rhs = a * apply_residual(u, pr, v1) + b * apply_residual(u, pr, v2)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


@given(meshes(max_elements=10), velocities, st.integers(0, 4))
def test_pg2_hat_orthogonal(mesh, beta, k):
    pr = AdvectionProblem(beta, PiecewisePolynomial(np.random.default_rng(k).normal(size=(mesh.n_elements, 3))))
    orth = check_hat_orthogonality(solve("pg2", pr, mesh, k), pr)
    assert orth.passed, orth.max_ratio


def test_dg_piecewise_quadratic_orthogonal():
    m = build_uniform((0, 1), 8)
    pr = AdvectionProblem(1.0, piecewise_quadratic())
    orth = check_hat_orthogonality(solve("dg", pr, m, 1), pr)
    assert orth.passed and orth.max_ratio <= 1e-11
    # interior and inflow vertices only
    assert list(orth.vertices) == list(range(8))


def test_random_poly_not_orthogonal_matches_quadrature():
    m = build_uniform((0, 1), 5)
    pr = AdvectionProblem(-2.0, Arctan())
    u = BrokenPoly(m, np.random.default_rng(4).normal(size=(5, 3)))
    r = hat_residuals(u, pr)
    for i, a in enumerate(m.vertices):
        psi = hat_function(m, a)
        lo, hi = m.vertices[max(i - 1, 0)], m.vertices[min(i + 1, 5)]
        up = 1 / (a - lo) if i > 0 else 0.0
        down = -1 / (hi - a) if i < 5 else 0.0
        slope = lambda x, a=a, lo=lo, hi=hi, up=up, down=down: np.where(
            (x > lo) & (x < a), up, np.where((x > a) & (x < hi), down, 0.0))
        ref = apply_residual(u, pr, psi, slope, q=25)
        assert r[i] == pytest.approx(ref, abs=1e-13)
    assert not check_hat_orthogonality(u, pr).passed


def test_dual_norm_of_exact_is_zero(unit4):
    pr, u = exact_poly(unit4)
    assert dual_norm_global(u, pr) < 1e-14
    rep = dual_norms_local(u, pr)
    assert np.all(rep.local_norms < 1e-14)


def test_dual_norm_closed_form():
    m = build_uniform((0, 1), 1)
    pr = AdvectionProblem(1.0, Polynomial([1.0]))
    d = dual_norm_global(BrokenPoly.zeros(m, 0), pr, 8, 2)
    assert d == pytest.approx(1 / np.sqrt(3), rel=0.01)


def test_dual_norm_pg2_error():
    m = build_uniform((0, 1), 16)
    pr = AdvectionProblem(1.0, Arctan())
    u = solve("pg2", pr, m, 1)
    assert dual_norm_global(u, pr, 8, 2) == pytest.approx(1.167e-4, rel=0.02)


def test_dual_norm_monotone():
    m = build_uniform((0, 1), 3)
    pr = AdvectionProblem(1.0, Arctan())
    u = solve("dg", pr, m, 1)
    err = exact_error(u, pr)
    seq = [dual_norm_global(u, pr, mm, 1) for mm in (1, 2, 4, 8)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(seq, seq[1:]))
    assert seq[-1] <= err * (1 + 1e-10)
    assert dual_norm_global(u, pr, 2, 2) >= seq[1] * (1 - 1e-12)


def test_dual_norm_arguments():
    m = build_uniform((0, 1), 2)
    with pytest.raises(ValueError):
        dual_norm_global(BrokenPoly.zeros(m, 0), AdvectionProblem(1.0, Arctan()), 0, 2)


def test_localization_dg_piecewise_quadratic():
    m = build_uniform((0, 1), 8)
    pr = AdvectionProblem(1.0, piecewise_quadratic())
    rep = dual_norms_local(solve("dg", pr, m, 1), pr)
    assert rep.orthogonal and rep.c_cont_pf == pytest.approx(3.0)
    assert rep.upper_holds() and rep.lower_holds()


def test_localization_single_element():
    m = build_uniform((0, 1), 1)
    pr = AdvectionProblem(-1.0, Arctan())
    rep = dual_norms_local(solve("pg2", pr, m, 0), pr)
    assert rep.local_norms.size == 2
    assert rep.lower_holds()


@given(meshes(max_elements=6), velocities, st.sampled_from(sorted(MIN_DEGREE)))
def test_localization_property(mesh, beta, method):
    k = MIN_DEGREE[method]
    pr = AdvectionProblem(beta, Arctan())
    rep = dual_norms_local(solve(method, pr, mesh, k), pr, m=4, q=2)
    assert rep.orthogonal
    assert rep.upper_holds(1e-8) and rep.lower_holds(1e-8)


def test_inflow_patch_norm_sees_local_error():
    # the inflow patch space has no zero condition at the inflow end
    m = build_uniform((0, 1), 2)
    pr = AdvectionProblem(1.0, Polynomial([1.0]))
    u = BrokenPoly.zeros(m, 0)
    ps = patches(m, 1.0)
    inflow = patch_dual_norm(u, pr, ps[0])
    interior = patch_dual_norm(u, pr, ps[1])
    # error x on (0, 1/2): norm sqrt(1/24); interior space removes the mean on (0, 1)
    assert inflow == pytest.approx(np.sqrt(1 / 24), rel=1e-3)
    assert interior == pytest.approx(np.sqrt(1 / 3 - 1 / 4), rel=1e-3)
