"""Patchwise conforming reconstruction s_h = sum_a psi_a s_h^a.

On every vertex patch the local problem reads: find s_a, continuous and of
degree k' on the patch elements, with

    (beta (psi_a s_a)', v)_{omega_a} = (f psi_a + beta psi_a' u_h, v)_{omega_a}

for all broken v of degree k'.  On two-element patches the test space is one
function larger than the trial space; the global-constant test function is
redundant under hat orthogonality and is dropped from the solved system.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (BrokenPoly, continuous_space_dense, gauss_rule, legendre_table,
                    project_values, quad_order_for)
from .errors import OrthogonalityError
from .mesh import Patch, VertexClass, patches
from .problem import AdvectionProblem
from .residual import ORTHOGONALITY_RTOL, check_hat_orthogonality
from .solvers import LinearSystem


@dataclass
class PatchReconstruction:
    patch: Patch
    kprime: int
    #: continuous trial DOFs
    solution: np.ndarray
    #: modal coefficients of s_a on the patch elements, shape (len(elements), k' + 1)
    coeffs: np.ndarray
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    #: index of the test row left out of the solve, or None
    dropped: int | None = None

    @property
    def residual(self) -> np.ndarray:
        """Residual of the full rectangular system."""
        return self.matrix @ self.solution - self.rhs

    @property
    def dropped_residual(self) -> float:
        """Residual of the global-constant test equation (0 when nothing was dropped)."""
        if self.dropped is None:
            return 0.0
        h = self.patch.mesh.h[list(self.patch.elements)]
        w = np.zeros(self.matrix.shape[0])
        p1 = self.kprime + 1
        w[0], w[p1] = np.sqrt(h[0]), np.sqrt(h[1])
        return float(w @ self.residual)

    def as_brokenpoly(self) -> BrokenPoly:
        return BrokenPoly(self.patch.submesh(), self.coeffs)


def _patch_hats(patch: Patch, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """psi_a and psi_a' at reference points on each patch element."""
    h = patch.mesh.h[list(patch.elements)]
    vals, ders = [], []
    for e, he in zip(patch.elements, h):
        if e == patch.vertex - 1:  # a is the right end of e
            vals.append(0.5 * (1.0 + xi))
            ders.append(np.full_like(xi, 1.0 / he))
        else:
            vals.append(0.5 * (1.0 - xi))
            ders.append(np.full_like(xi, -1.0 / he))
    return np.array(vals), np.array(ders)


def patch_system(patch: Patch, u_h: BrokenPoly, problem: AdvectionProblem, kprime: int):
    """Full rectangular local system and the trial map.

    Returns ``(A, b, T)``: ``A`` has one row per modal test function of the
    patch elements and one column per continuous trial DOF, ``T`` maps trial
    DOFs to modal coefficients of s_a.
    """
    mesh = patch.mesh
    sub = patch.submesh()
    elems = list(patch.elements)
    p = kprime
    if p > 0:
        T = continuous_space_dense(sub.h, p)
    else:
        # continuous P_0 on the patch is the constants
        T = np.zeros((len(elems), 1))
        T[:, 0] = np.sqrt(sub.h)
    rule = gauss_rule(max(problem.source.quad_points(p + 1), quad_order_for(p + 1, p, u_h.k)))
    xi = rule.nodes
    psi, dpsi = _patch_hats(patch, xi)
    h = sub.h[:, None]
    vt, dvt = legendre_table(xi, max(p, 1))
    vt, dvt = vt[:, : p + 1], dvt[:, : p + 1]
    v_test, _ = legendre_table(xi, p)
    phys_v = vt[None] * np.sqrt(2.0 / h)[..., None]  # (e, q, j)
    phys_d = dvt[None] * (np.sqrt(2.0 / h) * 2.0 / h)[..., None]
    test = v_test[None] * np.sqrt(2.0 / h)[..., None]
    w = rule.weights[None, :, None] * 0.5 * h[..., None]
    # (beta (psi phi_j)', v_i) on each element
    deriv = dpsi[..., None] * phys_v + psi[..., None] * phys_d
    blocks = problem.beta * np.einsum("eqi,eqj->eij", test * w, deriv)
    n_el, p1 = len(elems), p + 1
    A_modal = np.zeros((n_el * p1, n_el * (T.shape[0] // n_el)))
    for e in range(n_el):
        A_modal[e * p1:(e + 1) * p1, e * p1:(e + 1) * p1] = blocks[e]
    A = A_modal @ T
    # right-hand side
    x = sub.to_physical(xi)
    ce = np.broadcast_to(np.array(elems)[:, None], x.shape)
    f = problem.f(mesh, x, ce)
    uh = u_h.eval_in(x, ce)
    g = f * psi + problem.beta * dpsi * uh
    b = project_values(sub, g, p, rule).ravel()
    return A, b, T


def solve_patch(patch: Patch, u_h: BrokenPoly, problem: AdvectionProblem, kprime: int,
                strict: bool = True, rtol: float = ORTHOGONALITY_RTOL,
                orthogonality=None) -> PatchReconstruction:
    """Solve the local problem on one patch.

    With ``strict`` the hat orthogonality of the residual at the patch vertex
    is checked first (interior and inflow vertices) and
    :class:`OrthogonalityError` is raised when it fails.
    """
    if kprime < 0:
        raise ValueError("k' must be >= 0")
    if strict and patch.kind is not VertexClass.OUTFLOW:
        orth = orthogonality or check_hat_orthogonality(u_h, problem, rtol)
        i = np.flatnonzero(orth.vertices == patch.vertex)
        if i.size and abs(orth.residuals[i[0]]) > rtol * orth.scales[i[0]]:
            r = float(orth.residuals[i[0]])
            raise OrthogonalityError(
                f"residual against the hat of vertex {patch.vertex} is {r:.3e}",
                {patch.vertex: r})
    A, b, T = patch_system(patch, u_h, problem, kprime)
    p1 = kprime + 1
    dropped = None
    if len(patch.elements) == 2:
        # keep every mode of the upwind element and the non-constant modes of the downwind one
        dropped = p1 if problem.beta > 0 else 0
    rows = np.array([i for i in range(A.shape[0]) if i != dropped])
    x = LinearSystem(A[rows], b[rows]).solve()
    coeffs = (T @ x).reshape(len(patch.elements), p1)
    return PatchReconstruction(patch, kprime, x, coeffs, A, b, dropped)


@dataclass
class Reconstruction:
    s_h: BrokenPoly
    pieces: list[PatchReconstruction]
    kprime: int
    orthogonal: bool = True


def combine(pieces: list[PatchReconstruction], mesh, kprime: int) -> BrokenPoly:
    """s_h = sum_a psi_a s_a, degree k' + 1 on every element."""
    rule = gauss_rule(quad_order_for(kprime + 1, kprime + 1))
    xi = rule.nodes
    vals = np.zeros((mesh.n_elements, xi.size))
    for piece in pieces:
        psi, _ = _patch_hats(piece.patch, xi)
        s = piece.as_brokenpoly().values(xi)
        for local, e in enumerate(piece.patch.elements):
            vals[e] += psi[local] * s[local]
    return BrokenPoly(mesh, project_values(mesh, vals, kprime + 1, rule))


def assemble_global(u_h: BrokenPoly, problem: AdvectionProblem, kprime: int,
                    strict: bool = True) -> Reconstruction:
    """Solve all patch problems and sum them into the conforming s_h."""
    mesh = u_h.mesh
    orth = check_hat_orthogonality(u_h, problem)
    if strict and not orth.passed:
        bad = {int(a): float(r) for a, r, s in zip(orth.vertices, orth.residuals, orth.scales)
               if abs(r) > orth.rtol * s}
        raise OrthogonalityError(f"hat orthogonality fails at {len(bad)} vertices", bad)
    pieces = [solve_patch(p, u_h, problem, kprime, strict=False)
              for p in patches(mesh, problem.beta)]
    return Reconstruction(combine(pieces, mesh, kprime), pieces, kprime, orth.passed)


@dataclass
class StructureCheck:
    """Defects of s_h: vertex jumps, inflow value and ||beta s_h' - Pi_{k'} f||, each relative."""

    jump: float
    inflow: float
    projection: float
    conservation: float

    def passed(self, tol: float = 1e-10) -> bool:
        return max(self.jump, self.inflow, self.projection, self.conservation) <= tol


def check_structure(recon: Reconstruction, problem: AdvectionProblem) -> StructureCheck:
    s = recon.s_h
    mesh = s.mesh
    kp = recon.kprime
    # point defects are relative to the largest trace of s_h
    length = mesh.vertices[-1] - mesh.vertices[0]
    left, right = s.traces()
    v_scale = max(float(np.max(np.abs(np.concatenate([left, right])))), 1e-300)
    jump = float(np.max(np.abs(s.jumps()), initial=0.0)) / v_scale
    inflow = float(abs(left[0] if problem.beta > 0 else right[-1])) / v_scale
    rule = gauss_rule(max(problem.source.quad_points(kp), quad_order_for(kp, kp + 1)))
    f = problem.f_at_quad(mesh, rule.nodes)
    pf = project_values(mesh, f, kp, rule)
    ds = problem.beta * s.derivative().with_degree(kp).coeffs
    f_scale = max(float(np.sqrt(np.sum(pf ** 2))), abs(problem.beta) * s.norm() / length, 1e-300)
    projection = float(np.sqrt(np.sum((ds - pf) ** 2))) / f_scale
    # (f - beta s_h', 1)_K is sqrt(h_K) times the mean-mode defect
    conservation = float(np.max(np.abs(ds[:, 0] - pf[:, 0]) * np.sqrt(mesh.h))) / (f_scale * np.sqrt(length))
    return StructureCheck(jump, inflow, projection, conservation)
