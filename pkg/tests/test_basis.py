import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import polynomial as P

from advest.basis import (BrokenPoly, continuous_space, gauss_rule, is_continuous, legendre_table,
                          project_l2)
from advest.mesh import build_uniform

from conftest import meshes


def test_midpoint_rule():
    r = gauss_rule(1)
    np.testing.assert_allclose(r.nodes, [0.0])
    np.testing.assert_allclose(r.weights, [2.0])


def test_two_point_rule():
    r = gauss_rule(2)
    np.testing.assert_allclose(r.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)])
    np.testing.assert_allclose(r.weights, [1, 1])


def test_five_points_x8():
    r = gauss_rule(5)
    assert np.sum(r.weights * r.nodes ** 8) == pytest.approx(2 / 9, rel=1e-14)


@pytest.mark.parametrize("q", [0, 31, 2.5])
def test_rule_range(q):
    with pytest.raises(ValueError):
        gauss_rule(q)


@pytest.mark.parametrize("q", range(1, 31))
def test_rule_exactness(q):
    r = gauss_rule(q)
    assert np.all(r.weights > 0)
    assert r.weights.sum() == pytest.approx(2.0, rel=1e-14)
    np.testing.assert_array_equal(r.nodes, -r.nodes[::-1])
    for d in range(0, 2 * q):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert abs(np.sum(r.weights * r.nodes ** d) - exact) <= 5e-14


def test_legendre_orthonormal():
    r = gauss_rule(10)
    v, _ = legendre_table(r.nodes, 6)
    np.testing.assert_allclose((v * r.weights[:, None]).T @ v, np.eye(7), atol=1e-13)


def test_project_reproduces_linear():
    m = build_uniform((0, 1), 3)
    p = project_l2(lambda x: x, m, 1)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(p(x), x, atol=1e-14)


def test_project_mean_value():
    p = project_l2(lambda x: x * x, build_uniform((0, 1), 1), 0)
    assert p(0.3) == pytest.approx(1 / 3)


def test_project_arctan_quadrature_converged():
    m = build_uniform((0, 1), 4)
    a = project_l2(np.arctan, m, 2, q=15)
    b = project_l2(np.arctan, m, 2, q=20)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-15)


@given(meshes(), st.integers(0, 4))
def test_projection_idempotent_and_orthogonal(mesh, k):
    f = lambda x: np.sin(3 * x) + x ** 5
    p = project_l2(f, mesh, k, q=20)
    again = project_l2(lambda x: p.eval_in(x, np.broadcast_to(np.arange(mesh.n_elements)[:, None], x.shape)),
                       mesh, k, q=20)
    np.testing.assert_allclose(again.coeffs, p.coeffs, atol=1e-13)
    rng = np.random.default_rng(0)
    r = gauss_rule(20)
    x = mesh.to_physical(r.nodes)
    resid = f(x) - p.values(r.nodes)
    scale = np.sqrt(np.sum(0.5 * mesh.h * ((f(x) ** 2) @ r.weights)))
    for _ in range(20):
        v = BrokenPoly(mesh, rng.normal(size=(mesh.n_elements, k + 1)))
        ip = np.sum(0.5 * mesh.h * ((resid * v.values(r.nodes)) @ r.weights))
        assert abs(ip) <= 1e-12 * scale * v.norm()


def test_eval_sides():
    m = build_uniform((0, 1), 2)
    step = BrokenPoly(m, np.array([[0.0], [np.sqrt(0.5)]]))
    assert step(0.5, "left") == pytest.approx(0.0)
    assert step(0.5, "right") == pytest.approx(1.0)


def test_eval_linear_oracle():
    m = build_uniform((1, 3), 1)  # h = 2
    c = np.array([[0.7, -0.4]])
    p = BrokenPoly(m, c)
    # phi_0 = 1/sqrt(2), phi_1 = sqrt(3/2) xi with xi = x - 2
    x = 2.5
    assert p(x) == pytest.approx(0.7 / np.sqrt(2) - 0.4 * np.sqrt(1.5) * 0.5)


def test_eval_outside():
    with pytest.raises(ValueError):
        BrokenPoly.zeros(build_uniform((0, 1), 2), 1)(1.5)


@given(meshes(), st.integers(1, 4))
def test_continuous_eval_sides_agree(mesh, p):
    rng = np.random.default_rng(1)
    T = continuous_space(mesh, p)
    u = BrokenPoly(mesh, (T @ rng.normal(size=T.shape[1])).reshape(mesh.n_elements, p + 1))
    assert is_continuous(u, 1e-12)
    for v in mesh.vertices[1:-1]:
        assert u(v, "left") == pytest.approx(u(v, "right"), abs=1e-12 * (1 + abs(u(v, "left"))))


def test_norms():
    m = build_uniform((0, 1), 1)
    assert BrokenPoly.zeros(m, 3).norm() == 0.0
    assert project_l2(lambda x: np.ones_like(x), m, 0).norm() == pytest.approx(1.0)
    assert BrokenPoly(m, np.array([[3.0, 4.0]])).norm() == pytest.approx(5.0)


@given(meshes(), st.integers(0, 5))
def test_parseval_matches_quadrature(mesh, k):
    rng = np.random.default_rng(k)
    u = BrokenPoly(mesh, rng.normal(size=(mesh.n_elements, k + 1)))
    r = gauss_rule(k + 2)
    quad = np.sqrt(np.sum(0.5 * mesh.h * ((u.values(r.nodes) ** 2) @ r.weights)))
    assert u.norm() == pytest.approx(quad, rel=1e-12)
    np.testing.assert_allclose(u.norm(0), np.sqrt(np.sum(u.coeffs[0] ** 2)))


def test_derivative_monomials():
    m = build_uniform((0, 1), 3)
    x = np.linspace(0, 1, 13)
    d1 = project_l2(lambda t: t, m, 1).derivative()
    np.testing.assert_allclose(d1(x), 1.0, atol=1e-13)
    d2 = project_l2(lambda t: t * t, m, 2).derivative()
    np.testing.assert_allclose(d2(x, "right"), 2 * x, atol=1e-12)
    assert BrokenPoly(m, np.ones((3, 1))).derivative().norm() == 0.0


@given(meshes(max_elements=6))
def test_derivative_finite_difference(mesh):
    rng = np.random.default_rng(3)
    u = BrokenPoly(mesh, rng.normal(size=(mesh.n_elements, 4)))
    du = u.derivative()
    xi = np.array([-0.5, 0.1, 0.6])
    x = mesh.to_physical(xi)
    e = np.broadcast_to(np.arange(mesh.n_elements)[:, None], x.shape)
    step = 1e-7 * mesh.h[:, None]
    fd = (u.eval_in(x + step, e) - u.eval_in(x - step, e)) / (2 * step)
    np.testing.assert_allclose(fd, du.eval_in(x, e), rtol=1e-5, atol=1e-5 * np.abs(du.coeffs).max())


def test_arithmetic():
    m = build_uniform((0, 1), 2)
    a = BrokenPoly(m, np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = BrokenPoly(m, np.array([[1.0], [1.0]]))
    np.testing.assert_allclose((a - b).coeffs, [[0, 2], [2, 4]])
    np.testing.assert_allclose((2 * a).coeffs, 2 * a.coeffs)
    assert a.inner(a) == pytest.approx(a.norm() ** 2)


def test_with_degree_refuses_truncation():
    a = BrokenPoly(build_uniform((0, 1), 1), np.array([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        a.with_degree(0)
