"""Advection problems beta u' = f on an interval with u = 0 at the inflow end."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as nppoly

from .basis import analytic_quad_order, gauss_rule, quad_order_for
from .mesh import Mesh1D


class Source:
    """Right-hand side f.

    Sources may depend on the mesh of the problem (piecewise data), so they
    are always evaluated through ``values(mesh, x, elem)`` where ``elem`` is
    the index of the element of ``mesh`` that contains each point.
    """

    name = "source"
    #: polynomial degree on every element, or None for general data
    degree: int | None = None

    def values(self, mesh: Mesh1D, x, elem) -> np.ndarray:
        raise NotImplementedError

    def antiderivative(self, mesh: Mesh1D, x, elem) -> np.ndarray:
        """Integral of f from the left end of the domain to ``x``."""
        q = gauss_rule(self.quad_points())
        x = np.asarray(x, dtype=float)
        elem = np.broadcast_to(np.asarray(elem), x.shape)
        lo, h = mesh.left, mesh.h
        # whole elements
        xe = mesh.to_physical(q.nodes)
        ie = np.broadcast_to(np.arange(mesh.n_elements)[:, None], xe.shape)
        whole = 0.5 * h * (self.values(mesh, xe, ie) @ q.weights)
        before = np.concatenate([[0.0], np.cumsum(whole)])
        # partial element [x_{e-1}, x]
        a = lo[elem]
        pts = a[..., None] + (x - a)[..., None] * 0.5 * (1.0 + q.nodes)
        fe = self.values(mesh, pts, np.broadcast_to(elem[..., None], pts.shape))
        part = 0.5 * (x - a) * (fe @ q.weights)
        return before[elem] + part

    def quad_points(self, *degrees: int) -> int:
        """Gauss points for integrating f times polynomials of the given degrees."""
        if self.degree is None:
            return analytic_quad_order()
        return quad_order_for(self.degree, *degrees)

    def quad_points_total(self, degree: int) -> int:
        """Gauss points for an integrand of total polynomial ``degree`` built from f."""
        if self.degree is None:
            return analytic_quad_order()
        return quad_order_for(degree)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Arctan(Source):
    name = "arctan"

    def values(self, mesh, x, elem):
        return np.arctan(x)

    @staticmethod
    def _primitive(x):
        return x * np.arctan(x) - 0.5 * np.log1p(x * x)

    def antiderivative(self, mesh, x, elem):
        x = np.asarray(x, dtype=float)
        return self._primitive(x) - self._primitive(mesh.vertices[0])


class Polynomial(Source):
    """Global polynomial sum_j c_j x^j."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if self.coeffs.size == 0:
            raise ValueError("polynomial needs at least one coefficient")
        self.degree = max(self.coeffs.size - 1, 0)
        self.name = "poly:" + ",".join(repr(float(c)) for c in self.coeffs)

    def values(self, mesh, x, elem):
        return nppoly.polyval(np.asarray(x, dtype=float), self.coeffs)

    def antiderivative(self, mesh, x, elem):
        prim = nppoly.polyint(self.coeffs)
        return nppoly.polyval(np.asarray(x, dtype=float), prim) - nppoly.polyval(mesh.vertices[0], prim)


class PiecewisePolynomial(Source):
    """Different polynomial sum_j c_{i,j} x^j on every element K_i.

    ``coeffs`` is either an array of shape (n_elements, d + 1) or a callable
    producing one from the mesh.
    """

    def __init__(self, coeffs, name: str = "piecewise", degree: int | None = None):
        self._coeffs = coeffs
        self.name = name
        if callable(coeffs):
            if degree is None:
                raise ValueError("give the degree of a mesh-dependent piecewise polynomial")
            self.degree = degree
        else:
            arr = np.asarray(coeffs, dtype=float)
            if arr.ndim != 2:
                raise ValueError("piecewise coefficients must have shape (n_elements, d + 1)")
            self.degree = arr.shape[1] - 1

    def coefficients(self, mesh: Mesh1D) -> np.ndarray:
        c = self._coeffs(mesh) if callable(self._coeffs) else self._coeffs
        c = np.asarray(c, dtype=float)
        if c.shape[0] != mesh.n_elements:
            raise ValueError(f"source has {c.shape[0]} pieces, mesh has {mesh.n_elements} elements")
        return c

    def values(self, mesh, x, elem):
        c = self.coefficients(mesh)[np.asarray(elem)]
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for j in range(c.shape[-1] - 1, -1, -1):
            out = out * x + c[..., j]
        return out

    def antiderivative(self, mesh, x, elem):
        c = self.coefficients(mesh)
        d = c.shape[1]
        div = 1.0 / np.arange(1, d + 1)

        def prim(cc, t):
            # sum_j c_j t^{j+1} / (j + 1)
            out = np.zeros(np.shape(t))
            for j in range(d - 1, -1, -1):
                out = (out + cc[..., j] * div[j]) * t
            return out

        whole = prim(c, mesh.right) - prim(c, mesh.left)
        before = np.concatenate([[0.0], np.cumsum(whole)])
        x = np.asarray(x, dtype=float)
        elem = np.broadcast_to(np.asarray(elem), x.shape)
        ce = c[elem]
        return before[elem] + prim(ce, x) - prim(ce, mesh.left[elem])


def piecewise_quadratic_coefficients(mesh: Mesh1D) -> np.ndarray:
    """f = x^2 + x + sin(2 pi x_{i-1}) on K_i."""
    n = mesh.n_elements
    return np.column_stack([np.sin(2 * np.pi * mesh.left), np.ones(n), np.ones(n)])


def piecewise_quadratic() -> PiecewisePolynomial:
    return PiecewisePolynomial(piecewise_quadratic_coefficients, name="piecewise_quadratic", degree=2)


class CallableSource(Source):
    """Arbitrary f(x); the primitive is computed by composite Gauss quadrature unless given."""

    def __init__(self, f: Callable, primitive: Callable | None = None, name: str = "callable"):
        self.f = f
        self.primitive = primitive
        self.name = name

    def values(self, mesh, x, elem):
        return np.broadcast_to(np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float), np.shape(x))

    def antiderivative(self, mesh, x, elem):
        if self.primitive is None:
            return super().antiderivative(mesh, x, elem)
        return self.primitive(np.asarray(x, dtype=float)) - self.primitive(mesh.vertices[0])


SOURCE_REGISTRY: dict[str, Callable[[], Source]] = {
    "arctan": Arctan,
    "piecewise_quadratic": piecewise_quadratic,
}


def parse_source(text: str) -> Source:
    """``arctan`` | ``piecewise_quadratic`` | ``poly:c0,c1,...``."""
    text = text.strip()
    if text in SOURCE_REGISTRY:
        return SOURCE_REGISTRY[text]()
    if text.startswith("poly:"):
        body = text[len("poly:"):]
        try:
            coeffs = [float(tok) for tok in body.split(",") if tok.strip() != ""]
        except ValueError as exc:
            raise ValueError(f"bad polynomial coefficients in source {text!r}: {exc}") from None
        if not coeffs:
            raise ValueError(f"source {text!r} has no coefficients")
        return Polynomial(coeffs)
    known = ", ".join(sorted(SOURCE_REGISTRY)) + ", poly:<c0,c1,...>"
    raise ValueError(f"unknown source {text!r} (expected one of: {known})")


@dataclass(frozen=True)
class AdvectionProblem:
    """beta u' = f on the mesh domain, u = 0 on the inflow end.

    ``with_exact=False`` hides the exact solution (estimators then report
    no error and no effectivity index).
    """

    beta: float
    source: Source
    with_exact: bool = True

    def __post_init__(self):
        b = float(self.beta)
        if b == 0.0 or not np.isfinite(b):
            raise ValueError("velocity must be a finite nonzero number")
        object.__setattr__(self, "beta", b)

    def scaled(self, c: float) -> AdvectionProblem:
        return AdvectionProblem(self.beta * c, self.source, self.with_exact)

    def f(self, mesh: Mesh1D, x, elem) -> np.ndarray:
        return self.source.values(mesh, x, elem)

    def f_at_quad(self, mesh: Mesh1D, nodes) -> np.ndarray:
        x = mesh.to_physical(nodes)
        elem = np.broadcast_to(np.arange(mesh.n_elements)[:, None], x.shape)
        return self.f(mesh, x, elem)

    def exact(self, mesh: Mesh1D, x, elem) -> np.ndarray:
        """u(x) = (1/beta) * integral of f from the inflow end to x."""
        if not self.with_exact:
            raise LookupError("exact solution unavailable for this problem")
        F = self.source.antiderivative(mesh, x, elem)
        if self.beta > 0:
            return F / self.beta
        end = self.source.antiderivative(mesh, np.array([mesh.vertices[-1]]), np.array([mesh.n_elements - 1]))[0]
        return (F - end) / self.beta
