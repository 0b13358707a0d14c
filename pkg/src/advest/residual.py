"""Residual functional <R(u_h), v> = (f, v) + (u_h, beta v') and its dual norms.

Dual norms are evaluated from below on enriched conforming test spaces
(refined mesh, raised degree) through the Riesz representer in the inner
product (beta z', beta v').
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import (BrokenPoly, continuous_space, gauss_rule, legendre_table,
                    project_values, quad_order_for, reference_shape_coeffs)
from .errors import SolverError
from .mesh import Mesh1D, Patch, VertexClass, c_cont_pf, patches
from .problem import AdvectionProblem

ORTHOGONALITY_RTOL = 1e-11
DEFAULT_REFINE = 8
DEFAULT_BOOST = 2


def coarse_elements(coarse: Mesh1D, fine: Mesh1D) -> np.ndarray:
    """Index of the coarse element containing each fine element; fine must be nested."""
    mid = 0.5 * (fine.left + fine.right)
    elem = coarse.locate(mid)
    tol = 1e-12 * (coarse.vertices[-1] - coarse.vertices[0])
    if np.any(fine.left < coarse.left[elem] - tol) or np.any(fine.right > coarse.right[elem] + tol):
        raise ValueError("test mesh is not nested in the mesh of u_h")
    return elem


def residual_load(u_h: BrokenPoly, problem: AdvectionProblem, fine: Mesh1D, p: int) -> np.ndarray:
    """<R(u_h), phi_j^e> for every modal basis function of degree ``p`` on ``fine``.

    Returns an array of shape (fine.n_elements, p + 1).
    """
    coarse = u_h.mesh
    elem = coarse_elements(coarse, fine)
    rule = gauss_rule(max(problem.source.quad_points(p), quad_order_for(u_h.k, p)))
    x = fine.to_physical(rule.nodes)
    ce = np.broadcast_to(elem[:, None], x.shape)
    f = problem.f(coarse, x, ce)
    uh = u_h.eval_in(x, ce)
    _, ders = legendre_table(rule.nodes, p)
    # (u_h, phi_j')_e = sum_q w_q u_h(x_q) sqrt(2/h) (2/h) Pn_j'(xi_q) h/2
    h = fine.h[:, None]
    adv = (uh * rule.weights) @ ders * (np.sqrt(2.0 / h))
    return project_values(fine, f, p, rule) + problem.beta * adv


def apply_residual(u_h: BrokenPoly, problem: AdvectionProblem, v, dv=None, q: int | None = None) -> float:
    """Evaluate <R(u_h), v>.

    ``v`` is either a BrokenPoly on the mesh of ``u_h`` or a nested
    refinement of it, or a callable, in which case ``dv`` must be its
    derivative and integration uses ``q`` Gauss points per element.
    """
    if isinstance(v, BrokenPoly):
        return float(np.sum(v.coeffs * residual_load(u_h, problem, v.mesh, v.k)))
    if dv is None:
        raise ValueError("a callable test function needs its derivative")
    mesh = u_h.mesh
    rule = gauss_rule(q if q is not None else max(problem.source.quad_points(u_h.k + 2), u_h.k + 2))
    x = mesh.to_physical(rule.nodes)
    elem = np.broadcast_to(np.arange(mesh.n_elements)[:, None], x.shape)
    integrand = problem.f(mesh, x, elem) * v(x) + problem.beta * u_h.values(rule.nodes) * dv(x)
    return float(np.sum(0.5 * mesh.h * (integrand @ rule.weights)))


@dataclass
class HatOrthogonality:
    """<R(u_h), psi_a> for interior and inflow vertices, with per-vertex scales."""

    vertices: np.ndarray
    residuals: np.ndarray
    scales: np.ndarray
    rtol: float = ORTHOGONALITY_RTOL

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.abs(self.residuals) / self.scales
        return np.where(self.residuals == 0, 0.0, r)

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.ratios.size else 0.0

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.residuals) <= self.rtol * self.scales))

    def as_dict(self) -> dict[int, float]:
        return {int(a): float(r) for a, r in zip(self.vertices, self.residuals)}


def hat_residuals(u_h: BrokenPoly, problem: AdvectionProblem) -> np.ndarray:
    """<R(u_h), psi_a> for every vertex a of the mesh of u_h."""
    mesh = u_h.mesh
    load = residual_load(u_h, problem, mesh, 1)
    ref = reference_shape_coeffs(1)
    scale = np.sqrt(mesh.h / 2.0)[:, None]
    left_hat = load @ ref[0] * scale[:, 0]
    right_hat = load @ ref[1] * scale[:, 0]
    r = np.zeros(mesh.n_vertices)
    r[:-1] += left_hat
    r[1:] += right_hat
    return r


def check_hat_orthogonality(u_h: BrokenPoly, problem: AdvectionProblem,
                            rtol: float = ORTHOGONALITY_RTOL) -> HatOrthogonality:
    """Residual against the hat functions of interior and inflow vertices.

    The scale of vertex a is ||f||_{omega_a} h_{omega_a} + |beta| ||u_h||_{omega_a}.
    """
    mesh = u_h.mesh
    r = hat_residuals(u_h, problem)
    rule = gauss_rule(problem.source.quad_points_total(2 * (problem.source.degree or 0)))
    f = problem.f_at_quad(mesh, rule.nodes)
    f_el = np.sqrt(0.5 * mesh.h * ((f * f) @ rule.weights))
    u_el = u_h.element_norms()
    keep, scales = [], []
    for p in patches(mesh, problem.beta):
        if p.kind is VertexClass.OUTFLOW:
            continue
        e = list(p.elements)
        keep.append(p.vertex)
        scales.append(np.sqrt(np.sum(f_el[e] ** 2)) * p.diameter
                      + abs(problem.beta) * np.sqrt(np.sum(u_el[e] ** 2)))
    keep = np.array(keep, dtype=int)
    return HatOrthogonality(keep, r[keep], np.array(scales), rtol)


def _riesz_norm(fine: Mesh1D, p: int, load: np.ndarray, beta: float,
                zero_left: bool, zero_right: bool) -> float:
    """max over v of <R, v> / ||beta v'|| on continuous P_p(fine) with the given end conditions."""
    T = continuous_space(fine, p, zero_left=zero_left, zero_right=zero_right)
    if T.shape[1] == 0:
        return 0.0
    rule = gauss_rule(quad_order_for(p, p))
    _, ders = legendre_table(rule.nodes, p)
    s_ref = (ders * rule.weights[:, None]).T @ ders
    S_b = sp.block_diag([(beta * beta * 4.0 / (h * h)) * s_ref for h in fine.h], format="csr")
    S = (T.T @ S_b @ T).tocsc()
    b = T.T @ load.ravel()
    z = spla.spsolve(S, b)
    if not np.all(np.isfinite(z)):
        raise SolverError("Riesz system could not be solved")
    return float(np.sqrt(max(z @ (S @ z), 0.0)))


def dual_norm_global(u_h: BrokenPoly, problem: AdvectionProblem, m: int = DEFAULT_REFINE,
                     q: int = DEFAULT_BOOST) -> float:
    """Discrete lower approximation of the velocity-scaled dual norm of R(u_h).

    Test space: continuous P_{k+q} on the mesh refined ``m`` times, zero at
    the outflow end.
    """
    if m < 1 or q < 1:
        raise ValueError("refine factor and degree boost must be >= 1")
    fine = u_h.mesh.refine(m)
    p = u_h.k + q
    load = residual_load(u_h, problem, fine, p)
    beta = problem.beta
    return _riesz_norm(fine, p, load, beta, zero_left=beta < 0, zero_right=beta > 0)


def patch_dual_norm(u_h: BrokenPoly, problem: AdvectionProblem, patch: Patch,
                    m: int = DEFAULT_REFINE, q: int = DEFAULT_BOOST) -> float:
    """Dual norm of R(u_h) restricted to the patch space V_a.

    V_a is H^1_0(omega_a), except at the inflow vertex where only the
    outflow end of omega_a carries a zero condition.
    """
    fine = patch.submesh().refine(m)
    p = u_h.k + q
    load = residual_load(u_h, problem, fine, p)
    beta = problem.beta
    if patch.kind is VertexClass.INFLOW:
        zl, zr = beta < 0, beta > 0
    else:
        zl = zr = True
    return _riesz_norm(fine, p, load, beta, zero_left=zl, zero_right=zr)


@dataclass
class DualNormReport:
    global_norm: float
    local_norms: np.ndarray
    c_cont_pf: float
    orthogonal: bool

    @property
    def local_sum_sq(self) -> float:
        return float(np.sum(self.local_norms ** 2))

    @property
    def upper_ratio(self) -> float:
        """||R||^2 / (2 C^2 sum_a ||R||_a^2); the localization upper bound says <= 1."""
        denom = 2.0 * self.c_cont_pf ** 2 * self.local_sum_sq
        return 0.0 if self.global_norm == 0 else (np.inf if denom == 0 else self.global_norm ** 2 / denom)

    @property
    def lower_ratio(self) -> float:
        """sum_a ||R||_a^2 / (2 ||R||^2); always <= 1."""
        denom = 2.0 * self.global_norm ** 2
        return 0.0 if self.local_sum_sq == 0 else (np.inf if denom == 0 else self.local_sum_sq / denom)

    def upper_holds(self, slack: float = 1e-10) -> bool:
        return self.upper_ratio <= 1.0 + slack

    def lower_holds(self, slack: float = 1e-10) -> bool:
        return self.lower_ratio <= 1.0 + slack


def dual_norms_local(u_h: BrokenPoly, problem: AdvectionProblem, m: int = DEFAULT_REFINE,
                     q: int = DEFAULT_BOOST) -> DualNormReport:
    mesh = u_h.mesh
    local = np.array([patch_dual_norm(u_h, problem, p, m, q) for p in patches(mesh, problem.beta)])
    return DualNormReport(
        global_norm=dual_norm_global(u_h, problem, m, q),
        local_norms=local,
        c_cont_pf=c_cont_pf(mesh),
        orthogonal=check_hat_orthogonality(u_h, problem).passed,
    )
