"""Petrov-Galerkin (PG1, PG2) and upwind discontinuous Galerkin solvers.

All discrete systems are assembled dense in the modal Legendre basis and
solved by LU with partial pivoting.  Continuous spaces are represented by a
sparse map from hierarchical DOFs to broken modal coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import (BrokenPoly, continuous_space, gauss_rule, legendre_table,
                    project_values, quad_order_for)
from .errors import SolverError, UnsupportedDegreeError
from .mesh import Mesh1D
from .problem import AdvectionProblem

MIN_DEGREE = {"pg1": 2, "pg2": 0, "dg": 1}


@dataclass
class LinearSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    #: (element, mode) of each column for broken trial spaces, None otherwise
    dof_map: np.ndarray | None = None

    def __post_init__(self):
        m, n = self.matrix.shape
        if m != n or self.rhs.shape != (n,):
            raise ValueError(f"inconsistent system: matrix {self.matrix.shape}, rhs {self.rhs.shape}")

    def solve(self, rtol: float = 1e-10) -> np.ndarray:
        A, b = self.matrix, self.rhs
        if A.shape[0] == 0:
            return np.zeros(0)
        try:
            lu, piv = sla.lu_factor(A, check_finite=True)
        except (ValueError, sla.LinAlgError) as exc:
            raise SolverError(f"LU factorisation failed: {exc}") from exc
        if np.any(np.diag(lu) == 0.0):
            raise SolverError("singular system (zero pivot)")
        x = sla.lu_solve((lu, piv), b)
        res = np.linalg.norm(A @ x - b)
        bound = rtol * (np.linalg.norm(A, 2 if A.shape[0] < 200 else "fro") * np.linalg.norm(x)
                        + np.linalg.norm(b))
        if not np.isfinite(res) or res > bound:
            raise SolverError(f"solve residual {res:.3e} exceeds {bound:.3e}")
        return x


def broken_dof_map(n_elements: int, k: int) -> np.ndarray:
    e, j = np.divmod(np.arange(n_elements * (k + 1)), k + 1)
    return np.column_stack([e, j])


def _grad_pairing_ref(p_test: int, p_trial: int) -> np.ndarray:
    """G[i, j] = int_{-1}^{1} Pn_i Pn_j' on the reference element."""
    rule = gauss_rule(quad_order_for(p_test, p_trial))
    v_test, _ = legendre_table(rule.nodes, p_test)
    _, d_trial = legendre_table(rule.nodes, p_trial)
    return (v_test * rule.weights[:, None]).T @ d_trial


def grad_pairing(mesh: Mesh1D, p_test: int, p_trial: int) -> sp.csr_matrix:
    """Block diagonal matrix of (phi_i^{p_test}, (phi_j^{p_trial})')_K."""
    G = _grad_pairing_ref(p_test, p_trial)
    return sp.block_diag([(2.0 / h) * G for h in mesh.h], format="csr")


def load_vector(problem: AdvectionProblem, mesh: Mesh1D, p: int) -> np.ndarray:
    """(f, phi_j)_K for the modal basis of degree p, shape (n_elements, p + 1)."""
    rule = gauss_rule(problem.source.quad_points(p))
    f = problem.f_at_quad(mesh, rule.nodes)
    return project_values(mesh, f, p, rule)


def _check_degree(method: str, k: int):
    if int(k) != k or k < MIN_DEGREE[method]:
        raise UnsupportedDegreeError(f"{method} needs k >= {MIN_DEGREE[method]}, got {k}")


def assemble_pg1(problem: AdvectionProblem, mesh: Mesh1D, k: int) -> tuple[LinearSystem, sp.csr_matrix]:
    beta = problem.beta
    T = continuous_space(mesh, k, zero_left=beta > 0, zero_right=beta < 0)
    A = beta * (grad_pairing(mesh, k - 1, k) @ T)
    b = load_vector(problem, mesh, k - 1).ravel()
    return LinearSystem(A.toarray(), b), T


def solve_pg1(problem: AdvectionProblem, mesh: Mesh1D, k: int) -> BrokenPoly:
    """Continuous trial / broken P_{k-1} test Petrov-Galerkin, k >= 2.

    The inflow value is imposed strongly by dropping the inflow vertex DOF.
    """
    _check_degree("pg1", k)
    system, T = assemble_pg1(problem, mesh, k)
    x = system.solve()
    return BrokenPoly(mesh, (T @ x).reshape(mesh.n_elements, k + 1))


def assemble_pg2(problem: AdvectionProblem, mesh: Mesh1D, k: int) -> LinearSystem:
    beta = problem.beta
    T = continuous_space(mesh, k + 1, zero_left=beta < 0, zero_right=beta > 0)
    # rows: test functions v_i, columns: modal trial DOFs; entry -(phi_j, beta v_i')
    E = grad_pairing(mesh, k, k + 1).T
    A = -beta * (T.T @ E)
    b = T.T @ load_vector(problem, mesh, k + 1).ravel()
    return LinearSystem(A.toarray(), b, broken_dof_map(mesh.n_elements, k))


def solve_pg2(problem: AdvectionProblem, mesh: Mesh1D, k: int) -> BrokenPoly:
    """Ultra-weak Petrov-Galerkin: broken P_k trial, continuous P_{k+1} test vanishing at outflow."""
    _check_degree("pg2", k)
    x = assemble_pg2(problem, mesh, k).solve()
    return BrokenPoly(mesh, x.reshape(mesh.n_elements, k + 1))


def dg_matrix(beta: float, mesh: Mesh1D, k: int) -> np.ndarray:
    """Matrix of the upwind dG form, rows = test modes, columns = trial modes."""
    n, p1 = mesh.n_elements, k + 1
    N = n * p1
    A = -beta * grad_pairing(mesh, k, k).T.toarray()
    j = np.arange(p1)
    sgn = (-1.0) ** j
    tl = np.sqrt((2 * j + 1)[None, :] / mesh.h[:, None]) * sgn  # values at left ends
    tr = np.sqrt((2 * j + 1)[None, :] / mesh.h[:, None])  # values at right ends
    # interior faces, normal pointing from the left element to the right one:
    # -beta {u}[v] + |beta|/2 [u][v] = (a_minus u^- + a_plus u^+)(v^+ - v^-)
    a_minus = -0.5 * (beta + abs(beta))
    a_plus = 0.5 * (abs(beta) - beta)
    for i in range(1, n):
        L = slice((i - 1) * p1, i * p1)
        R = slice(i * p1, (i + 1) * p1)
        um, up = tr[i - 1], tl[i]  # u^- from the left element, u^+ from the right
        A[R, L] += np.outer(up, a_minus * um)
        A[R, R] += np.outer(up, a_plus * up)
        A[L, L] -= np.outer(um, a_minus * um)
        A[L, R] -= np.outer(um, a_plus * up)
    # boundary faces: (beta n)^+ u v
    left_out = max(-beta, 0.0)
    right_out = max(beta, 0.0)
    A[:p1, :p1] += left_out * np.outer(tl[0], tl[0])
    A[N - p1:, N - p1:] += right_out * np.outer(tr[-1], tr[-1])
    return A


def assemble_dg(problem: AdvectionProblem, mesh: Mesh1D, k: int) -> LinearSystem:
    A = dg_matrix(problem.beta, mesh, k)
    b = load_vector(problem, mesh, k).ravel()
    return LinearSystem(A, b, broken_dof_map(mesh.n_elements, k))


def solve_dg(problem: AdvectionProblem, mesh: Mesh1D, k: int) -> BrokenPoly:
    """Upwind discontinuous Galerkin with broken P_k trial and test spaces, k >= 1."""
    _check_degree("dg", k)
    x = assemble_dg(problem, mesh, k).solve()
    return BrokenPoly(mesh, x.reshape(mesh.n_elements, k + 1))


SOLVERS = {"pg1": solve_pg1, "pg2": solve_pg2, "dg": solve_dg}


def solve(method: str, problem: AdvectionProblem, mesh: Mesh1D, k: int) -> BrokenPoly:
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(SOLVERS)}") from None
    return fn(problem, mesh, k)
