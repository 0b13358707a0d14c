"""1D meshes, vertex patches and hat functions."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class VertexClass(enum.Enum):
    INTERIOR = "interior"
    INFLOW = "inflow"
    OUTFLOW = "outflow"


@dataclass(frozen=True)
class Mesh1D:
    """Partition of an interval into consecutive elements K_i = [x_{i-1}, x_i].

    ``kappa`` is the largest ratio of sizes of two neighbouring elements
    (1 for a single element).
    """

    vertices: np.ndarray
    kappa: float = field(init=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).ravel()
        if v.size < 2:
            raise ValueError("a mesh needs at least two vertices")
        if not np.all(np.isfinite(v)) or np.any(np.diff(v) <= 0):
            raise ValueError("mesh vertices must be finite and strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        h = np.diff(v)
        kappa = float(np.max(np.maximum(h[1:] / h[:-1], h[:-1] / h[1:]))) if h.size > 1 else 1.0
        object.__setattr__(self, "kappa", kappa)

    @property
    def n_elements(self) -> int:
        return self.vertices.size - 1

    @property
    def n_vertices(self) -> int:
        return self.vertices.size

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.vertices)

    @property
    def left(self) -> np.ndarray:
        return self.vertices[:-1]

    @property
    def right(self) -> np.ndarray:
        return self.vertices[1:]

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.vertices[0]), float(self.vertices[-1])

    def to_physical(self, xi) -> np.ndarray:
        """Map reference points in [-1, 1] to every element, shape (n_elements, len(xi))."""
        xi = np.asarray(xi, dtype=float)
        mid = 0.5 * (self.left + self.right)
        return mid[:, None] + 0.5 * self.h[:, None] * xi[None, :]

    def locate(self, x, side: str = "left") -> np.ndarray:
        """Element index containing each point of ``x``.

        At an interior vertex ``side="left"`` picks the element to the left of
        the vertex, ``side="right"`` the one to the right.
        """
        x = np.asarray(x, dtype=float)
        a, b = self.domain
        tol = 1e-14 * (b - a)
        if np.any(x < a - tol) or np.any(x > b + tol):
            raise ValueError("point outside the mesh domain")
        if side == "left":
            idx = np.searchsorted(self.vertices, x, side="left") - 1
        elif side == "right":
            idx = np.searchsorted(self.vertices, x, side="right") - 1
        else:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        return np.clip(idx, 0, self.n_elements - 1)

    def refine(self, m: int) -> Mesh1D:
        """Split every element into ``m`` equal pieces (nested refinement)."""
        if m < 1:
            raise ValueError("refinement factor must be >= 1")
        if m == 1:
            return self
        t = np.arange(m) / m
        inner = (self.left[:, None] + self.h[:, None] * t[None, :]).ravel()
        return Mesh1D(np.append(inner, self.vertices[-1]))

    def submesh(self, elements) -> Mesh1D:
        """Mesh made of a run of consecutive elements."""
        elements = list(elements)
        return Mesh1D(self.vertices[elements[0]: elements[-1] + 2])


def build_uniform(domain=(0.0, 1.0), n: int = 1) -> Mesh1D:
    a, b = map(float, domain)
    if n < 1:
        raise ValueError("element count must be >= 1")
    if not b > a:
        raise ValueError("degenerate interval")
    v = np.linspace(a, b, n + 1)
    v[0], v[-1] = a, b
    return Mesh1D(v)


def build_graded(domain=(0.0, 1.0), n: int = 1, r: float = 1.0) -> Mesh1D:
    """Geometric mesh with h_{i+1} / h_i = r."""
    a, b = map(float, domain)
    if r <= 0:
        raise ValueError("grading factor must be positive")
    if n < 1:
        raise ValueError("element count must be >= 1")
    if not b > a:
        raise ValueError("degenerate interval")
    if r == 1.0:
        return build_uniform((a, b), n)
    sizes = r ** np.arange(n)
    v = a + (b - a) * np.concatenate([[0.0], np.cumsum(sizes)]) / sizes.sum()
    v[-1] = b
    return Mesh1D(v)


@dataclass(frozen=True)
class Patch:
    """Elements sharing the vertex ``vertex`` (index into ``mesh.vertices``)."""

    vertex: int
    elements: tuple[int, ...]
    kind: VertexClass
    mesh: Mesh1D

    @property
    def anchor(self) -> float:
        return float(self.mesh.vertices[self.vertex])

    @property
    def bounds(self) -> tuple[float, float]:
        v = self.mesh.vertices
        return float(v[self.elements[0]]), float(v[self.elements[-1] + 1])

    @property
    def diameter(self) -> float:
        lo, hi = self.bounds
        return hi - lo

    @property
    def hat_slope_max(self) -> float:
        """||psi_a'||_inf on the patch."""
        return float(1.0 / self.mesh.h[list(self.elements)].min())

    def submesh(self) -> Mesh1D:
        return self.mesh.submesh(self.elements)


def vertex_index(mesh: Mesh1D, a: float) -> int:
    v = mesh.vertices
    i = int(np.argmin(np.abs(v - a)))
    if abs(v[i] - a) > 1e-12 * (v[-1] - v[0]):
        raise ValueError(f"{a} is not a mesh vertex")
    return i


def classify_vertices(mesh: Mesh1D, beta: float) -> list[VertexClass]:
    if beta == 0 or not np.isfinite(beta):
        raise ValueError("velocity must be a finite nonzero number")
    kinds = [VertexClass.INTERIOR] * mesh.n_vertices
    inflow, outflow = (0, -1) if beta > 0 else (-1, 0)
    kinds[inflow] = VertexClass.INFLOW
    kinds[outflow] = VertexClass.OUTFLOW
    return kinds


def patches(mesh: Mesh1D, beta: float) -> list[Patch]:
    """One patch per vertex, classified according to the sign of ``beta``."""
    kinds = classify_vertices(mesh, beta)
    n = mesh.n_elements
    out = []
    for i, kind in enumerate(kinds):
        elems = tuple(e for e in (i - 1, i) if 0 <= e < n)
        out.append(Patch(i, elems, kind, mesh))
    return out


def hat_function(mesh: Mesh1D, a: float):
    """Continuous piecewise affine function equal to 1 at vertex ``a`` and 0 at the others."""
    i = vertex_index(mesh, a)
    nodal = np.zeros(mesh.n_vertices)
    nodal[i] = 1.0
    v = mesh.vertices

    def psi(x):
        return np.interp(x, v, nodal, left=0.0, right=0.0)

    return psi


def hat_values(mesh: Mesh1D, xi) -> tuple[np.ndarray, np.ndarray]:
    """Values of the two hat functions living on each element at reference points.

    Returns ``(left_hat, right_hat)``, each of shape (n_elements, len(xi)):
    the hat of the left vertex and of the right vertex of the element.
    """
    xi = np.asarray(xi, dtype=float)
    right = np.broadcast_to(0.5 * (1.0 + xi), (mesh.n_elements, xi.size))
    return 1.0 - right, right


def c_cont_pf(mesh: Mesh1D, c_pf: float = 1.0) -> float:
    """max_a (1 + C_PF h_{omega_a} ||psi_a'||_inf)."""
    return max(1.0 + c_pf * p.diameter * p.hat_slope_max for p in patches(mesh, 1.0))
