"""Modal Legendre bases, Gauss-Legendre quadrature and broken polynomials.

On an element K of length h the basis is

    phi_j^K(x) = sqrt((2j + 1) / h) P_j(xi(x)),   j = 0..k,

with P_j the Legendre polynomials and xi the affine map K -> [-1, 1].  The
basis is L2(K)-orthonormal, so coefficient vectors carry L2 norms directly.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre as npleg

from .mesh import Mesh1D

MAX_GAUSS_POINTS = 30
DEFAULT_ANALYTIC_QUAD = 15


def analytic_quad_order() -> int:
    """Gauss point count used for non-polynomial data (``ADVEST_QUAD_ORDER``)."""
    raw = os.environ.get("ADVEST_QUAD_ORDER")
    if raw is None or raw.strip() == "":
        return DEFAULT_ANALYTIC_QUAD
    q = int(raw)
    if not 1 <= q <= MAX_GAUSS_POINTS:
        raise ValueError(f"ADVEST_QUAD_ORDER must lie in [1, {MAX_GAUSS_POINTS}], got {q}")
    return q


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def exactness(self) -> int:
        return 2 * self.size - 1


@lru_cache(maxsize=None)
def gauss_rule(q: int) -> QuadRule:
    """q-point Gauss-Legendre rule on [-1, 1]."""
    if not isinstance(q, (int, np.integer)) or not 1 <= q <= MAX_GAUSS_POINTS:
        raise ValueError(f"point count must be an integer in [1, {MAX_GAUSS_POINTS}], got {q!r}")
    x, w = npleg.leggauss(int(q))
    # symmetrize to remove rounding asymmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(x, w)


def _legendre_eval(xi: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    scale = np.sqrt((2 * np.arange(p + 1) + 1) / 2.0)
    V = npleg.legvander(xi, p)
    # column j of D holds the Legendre coefficients of P_j'
    D = npleg.legder(np.eye(p + 1), axis=0) if p > 0 else np.zeros((0, 1))
    ders = np.zeros_like(V)
    if p > 0:
        ders = V[:, :p] @ D
    return V * scale, ders * scale


@lru_cache(maxsize=4096)
def _legendre_cached(key: bytes, p: int) -> tuple[np.ndarray, np.ndarray]:
    vals, ders = _legendre_eval(np.frombuffer(key, dtype=float), p)
    vals.setflags(write=False)
    ders.setflags(write=False)
    return vals, ders


def legendre_table(xi, p: int) -> tuple[np.ndarray, np.ndarray]:
    """L2(-1, 1)-orthonormal Legendre values and xi-derivatives.

    Both arrays have shape (len(xi), p + 1) and are read-only; small point
    sets (quadrature rules) are cached.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.ndim == 1 and xi.size <= 64:
        return _legendre_cached(np.ascontiguousarray(xi).tobytes(), int(p))
    return _legendre_eval(xi, p)


def quad_order_for(*degrees: int) -> int:
    """Gauss point count integrating a product of polynomials of the given degrees exactly."""
    return min(MAX_GAUSS_POINTS, max(1, (sum(degrees) + 2) // 2))


@dataclass(frozen=True)
class BrokenPoly:
    """Piecewise polynomial of degree ``k`` with per-element modal coefficients.

    ``coeffs`` has shape (n_elements, k + 1).
    """

    mesh: Mesh1D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c.reshape(self.mesh.n_elements, -1)
        if c.ndim != 2 or c.shape[0] != self.mesh.n_elements or c.shape[1] < 1:
            raise ValueError(
                f"coefficient array of shape {np.shape(self.coeffs)} does not fit "
                f"{self.mesh.n_elements} elements")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, mesh: Mesh1D, k: int) -> BrokenPoly:
        return cls(mesh, np.zeros((mesh.n_elements, k + 1)))

    @property
    def k(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def ndof(self) -> int:
        return self.coeffs.size

    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    def with_degree(self, k: int) -> BrokenPoly:
        """Same function with coefficients padded to degree ``k`` (truncation is refused)."""
        if k < self.k:
            if np.any(self.coeffs[:, k + 1:] != 0):
                raise ValueError("cannot lower the degree of a polynomial with nonzero high modes")
            return BrokenPoly(self.mesh, self.coeffs[:, : k + 1])
        pad = np.zeros((self.mesh.n_elements, k - self.k))
        return BrokenPoly(self.mesh, np.hstack([self.coeffs, pad]))

    def _check_same_mesh(self, other: BrokenPoly):
        if other.mesh is not self.mesh and not np.array_equal(other.mesh.vertices, self.mesh.vertices):
            raise ValueError("broken polynomials live on different meshes")

    def __add__(self, other: BrokenPoly) -> BrokenPoly:
        self._check_same_mesh(other)
        k = max(self.k, other.k)
        return BrokenPoly(self.mesh, self.with_degree(k).coeffs + other.with_degree(k).coeffs)

    def __sub__(self, other: BrokenPoly) -> BrokenPoly:
        return self + (-1.0) * other

    def __mul__(self, s: float) -> BrokenPoly:
        return BrokenPoly(self.mesh, float(s) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> BrokenPoly:
        return (-1.0) * self

    # evaluation

    def values(self, xi) -> np.ndarray:
        """Values at reference points on every element, shape (n_elements, len(xi))."""
        vals, _ = legendre_table(xi, self.k)
        return (self.coeffs @ vals.T) * np.sqrt(2.0 / self.mesh.h)[:, None]

    def derivative_values(self, xi) -> np.ndarray:
        _, ders = legendre_table(xi, self.k)
        h = self.mesh.h
        return (self.coeffs @ ders.T) * (np.sqrt(2.0 / h) * 2.0 / h)[:, None]

    def eval_in(self, x, elem) -> np.ndarray:
        """Evaluate at ``x`` using the polynomial of element ``elem`` (arrays of equal shape)."""
        x = np.asarray(x, dtype=float)
        elem = np.broadcast_to(np.asarray(elem), x.shape)
        lo, h = self.mesh.left[elem], self.mesh.h[elem]
        xi = 2.0 * (x - lo) / h - 1.0
        scale = np.sqrt((2 * np.arange(self.k + 1) + 1) / h[..., None])
        leg = npleg.legvander(xi, self.k) * scale
        return np.einsum("...j,...j->...", leg, self.coeffs[elem])

    def eval(self, x, side: str = "left"):
        """One-sided point values; ``side`` selects the element at interior vertices."""
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.eval_in(x, self.mesh.locate(x, side))
        return float(out[0]) if scalar else out

    def __call__(self, x, side: str = "left"):
        return self.eval(x, side)

    def traces(self) -> tuple[np.ndarray, np.ndarray]:
        """Values at the left and right end of every element."""
        j = np.arange(self.k + 1)
        s = np.sqrt((2 * j + 1) / self.mesh.h[:, None])
        left = np.sum(self.coeffs * s * (-1.0) ** j, axis=1)
        right = np.sum(self.coeffs * s, axis=1)
        return left, right

    def jumps(self) -> np.ndarray:
        """u(x_i^+) - u(x_i^-) at the interior vertices."""
        left, right = self.traces()
        return left[1:] - right[:-1]

    # norms and calculus

    def element_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coeffs ** 2, axis=1))

    def norm(self, element=None) -> float:
        if element is None:
            return float(np.sqrt(np.sum(self.coeffs ** 2)))
        return float(np.sqrt(np.sum(self.coeffs[element] ** 2)))

    def mean_integrals(self) -> np.ndarray:
        """Integral over each element."""
        return self.coeffs[:, 0] * np.sqrt(self.mesh.h)

    def derivative(self) -> BrokenPoly:
        """Elementwise exact derivative, degree max(k - 1, 0)."""
        n, k = self.mesh.n_elements, self.k
        if k == 0:
            return BrokenPoly.zeros(self.mesh, 0)
        h = self.mesh.h[:, None]
        up = self.coeffs * np.sqrt(2 * np.arange(k + 1) + 1) / np.sqrt(h)
        d = npleg.legder(up, axis=1) * (2.0 / h)
        down = d * np.sqrt(h) / np.sqrt(2 * np.arange(k) + 1)
        return BrokenPoly(self.mesh, down.reshape(n, k))

    def inner(self, other: BrokenPoly) -> float:
        self._check_same_mesh(other)
        k = max(self.k, other.k)
        return float(np.sum(self.with_degree(k).coeffs * other.with_degree(k).coeffs))


def project_values(mesh: Mesh1D, values: np.ndarray, k: int, rule: QuadRule) -> np.ndarray:
    """Modal coefficients of the L2 projection given values at the rule's points.

    ``values`` has shape (n_elements, rule.size).
    """
    vals, _ = legendre_table(rule.nodes, k)
    # (f, phi_j)_K = h/2 sum_q w_q f(x_q) sqrt(2/h) Pn_j(xi_q)
    scale = np.sqrt(mesh.h / 2.0)[:, None]
    return (values * rule.weights) @ vals * scale


def project_l2(f, mesh: Mesh1D, k: int, q: int | None = None) -> BrokenPoly:
    """Elementwise L2 projection of ``f`` onto P_k.

    ``f`` is called with an array of points of shape (n_elements, q).
    """
    if k < 0:
        raise ValueError("degree must be >= 0")
    rule = gauss_rule(q if q is not None else analytic_quad_order())
    x = mesh.to_physical(rule.nodes)
    values = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    return BrokenPoly(mesh, project_values(mesh, values, k, rule))


@lru_cache(maxsize=64)
def reference_shape_coeffs(p: int) -> np.ndarray:
    """Hierarchical C0 shape functions on [-1, 1] in orthonormal Legendre modes.

    Row 0 is the left hat (1 - xi)/2, row 1 the right hat (1 + xi)/2, rows
    2..p the bubbles (P_j - P_{j-2}) / sqrt(2(2j - 1)).  The returned
    coefficients refer to the L2(-1, 1)-orthonormal Legendre polynomials.
    """
    if p < 1:
        raise ValueError("continuous spaces need degree >= 1")
    plain = np.zeros((p + 1, p + 1))
    plain[0, :2] = [0.5, -0.5]
    plain[1, :2] = [0.5, 0.5]
    for j in range(2, p + 1):
        s = 1.0 / np.sqrt(2.0 * (2 * j - 1))
        plain[j, j] = s
        plain[j, j - 2] = -s
    out = plain / np.sqrt((2 * np.arange(p + 1) + 1) / 2.0)
    out.setflags(write=False)
    return out


def continuous_space(mesh: Mesh1D, p: int, zero_left: bool = False,
                     zero_right: bool = False) -> sp.csr_matrix:
    """Map from continuous P_p DOFs to broken modal coefficients.

    Returns a sparse matrix of shape (n_elements * (p + 1), ndof) whose
    columns are the hierarchical basis functions (vertex hats and element
    bubbles, ordered element by element).  Vertex DOFs at the domain ends are
    removed when the corresponding ``zero_*`` flag is set.
    """
    n = mesh.n_elements
    ref = reference_shape_coeffs(p)
    # physical modal coefficient = reference orthonormal coefficient * sqrt(h/2)
    scale = np.sqrt(mesh.h / 2.0)
    rows, cols, data = [], [], []
    modes = np.arange(p + 1)
    for local in range(p + 1):
        if local == 0:
            dof = np.arange(n) * p
        elif local == 1:
            dof = (np.arange(n) + 1) * p
        else:
            dof = np.arange(n) * p + (local - 1)
        for j in modes:
            if ref[local, j] == 0.0:
                continue
            rows.append(np.arange(n) * (p + 1) + j)
            cols.append(dof)
            data.append(ref[local, j] * scale)
    T = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n * (p + 1), n * p + 1))
    keep = np.ones(n * p + 1, dtype=bool)
    if zero_left:
        keep[0] = False
    if zero_right:
        keep[-1] = False
    return T[:, np.flatnonzero(keep)].tocsr()


def continuous_space_dense(h: np.ndarray, p: int) -> np.ndarray:
    """Dense version of :func:`continuous_space` without end conditions, for a few elements."""
    h = np.asarray(h, dtype=float)
    n = h.size
    ref = reference_shape_coeffs(p)
    T = np.zeros((n * (p + 1), n * p + 1))
    for e in range(n):
        block = ref.T * np.sqrt(h[e] / 2.0)  # (mode, local shape)
        r = slice(e * (p + 1), (e + 1) * (p + 1))
        T[r, e * p] += block[:, 0]
        T[r, (e + 1) * p] += block[:, 1]
        if p > 1:
            T[r, e * p + 1:e * p + p] += block[:, 2:]
    return T


def is_continuous(u: BrokenPoly, rtol: float = 1e-12) -> bool:
    left, right = u.traces()
    scale = max(1.0, float(np.max(np.abs(np.concatenate([left, right])))))
    return bool(np.all(np.abs(u.jumps()) <= rtol * scale))
