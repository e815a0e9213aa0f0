"""Shape-function spaces on the reference square with their degrees of freedom.

Four element families are provided:

* ``rt_element(r)`` -- the tensor Raviart--Thomas space
  P_{r,r-1} x P_{r-1,r} with normal edge moments and interior moments,
* ``bdm1_element()`` -- the 8-dimensional space spanned by P_1 vector fields
  plus curl(x^2 y) and curl(x y^2), with two normal moments per edge,
* ``q_element(r)`` -- the scalar tensor space Q_r with interior moments,
* ``p_element(r)`` -- scalar polynomials of total degree <= r with interior
  moments.

Edge moments use shifted Legendre weights in the counterclockwise edge
parametrization against the outward normal; moment weights of equal degree
pairs are L2-orthogonal, which keeps every degree-of-freedom matrix well
conditioned (diagonal for the scalar families).  Nodal bases are obtained by
inverting the DOF matrix once at construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as npoly

from .mapping import gauss_rule, gauss_rule_1d

__all__ = [
    "PolyBasis",
    "EdgeMoment",
    "InteriorMoment",
    "ReferenceElement",
    "rt_element",
    "bdm1_element",
    "q_element",
    "p_element",
    "shifted_legendre",
    "EDGE_STARTS",
    "EDGE_DIRS",
    "EDGE_NORMALS",
]

# Counterclockwise parametrization x(t) = start + t*dir of the four edges of
# the reference square, with outward unit normals.
EDGE_STARTS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
EDGE_DIRS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
EDGE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


@lru_cache(maxsize=None)
def shifted_legendre(m: int) -> np.ndarray:
    """Power-basis coefficients of the shifted Legendre polynomial P_m(2t-1).

    The coefficients are exact integers; the family is orthogonal on [0,1]
    with ||P_m||^2 = 1/(2m+1).
    """
    series = np.zeros(m + 1)
    series[m] = 1.0
    p = legendre.leg2poly(series)
    out = np.array([p[-1]])
    for c in p[-2::-1]:
        out = npoly.polyadd(npoly.polymul(out, [-1.0, 2.0]), [c])
    return out


def _poly_field(coeffs: np.ndarray):
    """Callable evaluating a (ncomp, dx, dy) coefficient array at points."""
    ncomp = coeffs.shape[0]

    def f(xhat):
        xhat = np.asarray(xhat)
        x, y = xhat[..., 0], xhat[..., 1]
        if ncomp == 1:
            return npoly.polyval2d(x, y, coeffs[0])
        return np.stack(
            [npoly.polyval2d(x, y, coeffs[c]) for c in range(ncomp)], axis=-1
        )

    return f


@dataclass(frozen=True)
class PolyBasis:
    """Basis of bivariate polynomials, scalar (ncomp=1) or vector (ncomp=2).

    ``coeffs[k, c, i, j]`` is the coefficient of x^i y^j in component c of
    basis function k.
    """

    coeffs: np.ndarray  # (n, ncomp, dx+1, dy+1)

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=float)
        if c.ndim != 4:
            raise ValueError("coeffs must have shape (n, ncomp, dx, dy)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[1]

    def eval(self, xhat: np.ndarray) -> np.ndarray:
        """Values of all basis functions; shape (n, ..., ncomp)."""
        xhat = np.asarray(xhat)
        x, y = xhat[..., 0], xhat[..., 1]
        out = np.empty((self.n,) + x.shape + (self.ncomp,))
        for k in range(self.n):
            for c in range(self.ncomp):
                out[k, ..., c] = npoly.polyval2d(x, y, self.coeffs[k, c])
        return out

    def div(self, xhat: np.ndarray) -> np.ndarray:
        """Divergence of all (vector) basis functions; shape (n, ...)."""
        if self.ncomp != 2:
            raise ValueError("div is defined for vector bases only")
        xhat = np.asarray(xhat)
        x, y = xhat[..., 0], xhat[..., 1]
        out = np.empty((self.n,) + x.shape)
        for k in range(self.n):
            dx = npoly.polyder(self.coeffs[k, 0], axis=0)
            dy = npoly.polyder(self.coeffs[k, 1], axis=1)
            out[k] = npoly.polyval2d(x, y, dx) + npoly.polyval2d(x, y, dy)
        return out

    def div_coeffs(self) -> np.ndarray:
        """Coefficient arrays of the divergences, shape (n, dx, dy)."""
        if self.ncomp != 2:
            raise ValueError("div is defined for vector bases only")
        parts = []
        for k in range(self.n):
            dx = np.atleast_2d(npoly.polyder(self.coeffs[k, 0], axis=0))
            dy = np.atleast_2d(npoly.polyder(self.coeffs[k, 1], axis=1))
            s = np.zeros((max(dx.shape[0], dy.shape[0]),
                          max(dx.shape[1], dy.shape[1])))
            s[: dx.shape[0], : dx.shape[1]] += dx
            s[: dy.shape[0], : dy.shape[1]] += dy
            parts.append(s)
        d1 = max(p.shape[0] for p in parts)
        d2 = max(p.shape[1] for p in parts)
        out = np.zeros((self.n, d1, d2))
        for k, p in enumerate(parts):
            out[k, : p.shape[0], : p.shape[1]] = p
        return out


@dataclass(frozen=True)
class EdgeMoment:
    """Moment of the normal component on one edge against P_degree(2t-1)."""

    edge: int
    degree: int

    def apply(self, field, n1d: int = 8) -> float:
        t, w = gauss_rule_1d(n1d)
        pts = EDGE_STARTS[self.edge] + t[:, None] * EDGE_DIRS[self.edge]
        vals = np.asarray(field(pts))
        weight = npoly.polyval(t, shifted_legendre(self.degree))
        return float((w * weight) @ (vals @ EDGE_NORMALS[self.edge]))


@dataclass(frozen=True)
class InteriorMoment:
    """Moment against a polynomial weight over the reference square."""

    weight: np.ndarray  # (ncomp, dx+1, dy+1)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weight, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weight", w)

    def apply(self, field, k: int = 8) -> float:
        rule = gauss_rule(k)
        x, y = rule.points[:, 0], rule.points[:, 1]
        vals = np.asarray(field(rule.points))
        ncomp = self.weight.shape[0]
        if ncomp == 1:
            integrand = vals * npoly.polyval2d(x, y, self.weight[0])
        else:
            integrand = sum(
                vals[:, c] * npoly.polyval2d(x, y, self.weight[c])
                for c in range(ncomp)
            )
        return float(rule.weights @ integrand)


@dataclass(frozen=True)
class ReferenceElement:
    """Unisolvent finite element on the reference square.

    ``basis`` is nodal with respect to ``dofs``: dof i applied to basis
    function j gives the Kronecker delta.  ``edge_dofs[e]`` lists the dof
    indices on edge e ordered by moment degree (empty for scalar elements);
    the remaining dofs are interior.
    """

    name: str
    degree: int
    basis: PolyBasis
    dofs: tuple
    edge_dofs: tuple  # 4-tuple of index tuples
    interior_dofs: tuple
    dof_cond: float

    @property
    def dim(self) -> int:
        return self.basis.n

    @property
    def ncomp(self) -> int:
        return self.basis.ncomp

    @property
    def n_edge_dofs(self) -> int:
        return len(self.edge_dofs[0])

    def interpolate(self, field, order: int = 10) -> np.ndarray:
        """Canonical interpolation: apply every dof functional to ``field``.

        ``order`` sets the quadrature used inside the functionals; exact for
        polynomial fields, and the knob to turn for rational pullbacks.
        """
        out = np.empty(self.dim)
        for i, dof in enumerate(self.dofs):
            if isinstance(dof, EdgeMoment):
                out[i] = dof.apply(field, n1d=order)
            else:
                out[i] = dof.apply(field, k=order)
        return out


def _legendre_product(i: int, j: int, shape: tuple[int, int]) -> np.ndarray:
    """Coefficient array of P_i(2x-1) P_j(2y-1), zero-padded to ``shape``."""
    out = np.zeros(shape)
    out[: i + 1, : j + 1] = np.outer(shifted_legendre(i), shifted_legendre(j))
    return out


def _nodalize(name, degree, raw, dofs, edge_dofs, interior_dofs, order):
    n = raw.shape[0]
    if len(dofs) != n:
        raise ValueError(f"{name}: {len(dofs)} dofs for dimension {n}")
    D = np.empty((n, n))
    for j in range(n):
        f = _poly_field(raw[j])
        for i, dof in enumerate(dofs):
            if isinstance(dof, EdgeMoment):
                D[i, j] = dof.apply(f, n1d=order)
            else:
                D[i, j] = dof.apply(f, k=order)
    cond = float(np.linalg.cond(D))
    C = np.linalg.solve(D, np.eye(n))
    nodal = np.einsum("jk,jcab->kcab", C, raw)
    return ReferenceElement(
        name=name,
        degree=degree,
        basis=PolyBasis(nodal),
        dofs=tuple(dofs),
        edge_dofs=tuple(tuple(e) for e in edge_dofs),
        interior_dofs=tuple(interior_dofs),
        dof_cond=cond,
    )


@lru_cache(maxsize=None)
def rt_element(r: int) -> ReferenceElement:
    """Tensor Raviart--Thomas element of order r >= 1.

    Shape space P_{r,r-1} x P_{r-1,r} of dimension 2r(r+1); r normal moments
    per edge plus, for r >= 2, interior moments against
    P_{r-2,r-1} x P_{r-1,r-2}.
    """
    if r < 1:
        raise ValueError("Raviart-Thomas order must be >= 1")
    shape = (r + 1, r + 1)
    raw = []
    for i in range(r + 1):  # first component: degree (r, r-1)
        for j in range(r):
            raw.append(np.stack([_legendre_product(i, j, shape), np.zeros(shape)]))
    for i in range(r):  # second component: degree (r-1, r)
        for j in range(r + 1):
            raw.append(np.stack([np.zeros(shape), _legendre_product(i, j, shape)]))
    raw = np.array(raw)

    dofs = []
    edge_dofs = []
    for e in range(4):
        edge_dofs.append(range(len(dofs), len(dofs) + r))
        dofs.extend(EdgeMoment(e, m) for m in range(r))
    interior_start = len(dofs)
    for i in range(max(r - 1, 0)):  # weights P_{r-2,r-1} for the first row
        for j in range(r):
            w = np.stack([_legendre_product(i, j, shape), np.zeros(shape)])
            dofs.append(InteriorMoment(w))
    for i in range(r):  # weights P_{r-1,r-2} for the second row
        for j in range(max(r - 1, 0)):
            w = np.stack([np.zeros(shape), _legendre_product(i, j, shape)])
            dofs.append(InteriorMoment(w))
    interior = range(interior_start, len(dofs))
    return _nodalize(f"RT{r}", r, raw, dofs, edge_dofs, interior, order=r + 3)


@lru_cache(maxsize=None)
def bdm1_element() -> ReferenceElement:
    """8-dimensional Brezzi--Douglas--Marini-type element.

    P_1 vector fields plus curl(x^2 y) = (x^2, -2xy) and
    curl(x y^2) = (2xy, -y^2); both extra fields are divergence free, so the
    divergence of the space is the constants.  Two normal moments per edge.
    """
    shape = (3, 3)

    def cmat(entries):
        out = np.zeros(shape)
        for (i, j), v in entries.items():
            out[i, j] = v
        return out

    zero = np.zeros(shape)
    p1 = [cmat({(0, 0): 1.0}), cmat({(1, 0): 1.0}), cmat({(0, 1): 1.0})]
    raw = [np.stack([c, zero]) for c in p1] + [np.stack([zero, c]) for c in p1]
    raw.append(np.stack([cmat({(2, 0): 1.0}), cmat({(1, 1): -2.0})]))
    raw.append(np.stack([cmat({(1, 1): 2.0}), cmat({(0, 2): -1.0})]))
    raw = np.array(raw)

    dofs = []
    edge_dofs = []
    for e in range(4):
        edge_dofs.append(range(len(dofs), len(dofs) + 2))
        dofs.extend(EdgeMoment(e, m) for m in range(2))
    return _nodalize("BDM1", 1, raw, dofs, edge_dofs, (), order=5)


@lru_cache(maxsize=None)
def q_element(r: int) -> ReferenceElement:
    """Scalar tensor-product element Q_r with interior moment dofs."""
    if r < 0:
        raise ValueError("polynomial degree must be >= 0")
    shape = (r + 1, r + 1)
    raw = np.array(
        [[_legendre_product(i, j, shape)] for i in range(r + 1) for j in range(r + 1)]
    )
    dofs = [
        InteriorMoment(np.array([_legendre_product(i, j, shape)]))
        for i in range(r + 1)
        for j in range(r + 1)
    ]
    return _nodalize(f"Q{r}", r, raw, dofs, ((), (), (), ()),
                     range(len(dofs)), order=r + 2)


@lru_cache(maxsize=None)
def p_element(r: int) -> ReferenceElement:
    """Scalar element of total degree <= r with interior moment dofs."""
    if r < 0:
        raise ValueError("polynomial degree must be >= 0")
    shape = (r + 1, r + 1)
    pairs = [(i, j) for i in range(r + 1) for j in range(r + 1 - i)]
    raw = np.array([[_legendre_product(i, j, shape)] for i, j in pairs])
    dofs = [InteriorMoment(np.array([_legendre_product(i, j, shape)]))
            for i, j in pairs]
    return _nodalize(f"P{r}", r, raw, dofs, ((), (), (), ()),
                     range(len(dofs)), order=r + 2)
