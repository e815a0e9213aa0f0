"""Global finite element spaces: stress, displacement and rotation.

A space couples a reference element to a mesh through one of three mapping
kinds:

* ``piola`` -- H(div)-conforming spaces (stress rows).  Edge dofs are shared
  between neighbouring elements; the stored sign makes the normal trace
  single-valued.  An element that traverses a global edge against its lo->hi
  direction sees the reference moment of degree m flipped by (-1)**(m+1):
  the outward normal flips sign and the reversed parametrization contributes
  (-1)**m from the Legendre weight.
* ``compose`` -- fully discontinuous spaces mapped by composition
  (displacements).
* ``unmapped`` -- per-element polynomials in scaled physical coordinates
  ((x - x_K)/h_K with x_K the vertex centroid and h_K the diameter), used
  for the rotation multiplier.

Multi-component spaces (matrix-valued stress, vector displacement) store one
dof block per row: global dof = row * n_row_dofs + row-local dof.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import QuadMesh
from .mapping import geometry_at
from .reference_elements import (
    ReferenceElement,
    bdm1_element,
    p_element,
    q_element,
    rt_element,
)

__all__ = [
    "PIOLA",
    "COMPOSE",
    "UNMAPPED",
    "FESpace",
    "FEFunction",
    "stress_element",
    "family_order",
    "build_stress_space",
    "build_displacement_space",
    "build_rotation_space",
    "build_elasticity_spaces",
    "evaluate",
    "evaluate_div",
    "evaluate_batch",
    "evaluate_div_batch",
    "unmapped_monomials",
]

PIOLA = "piola"
COMPOSE = "compose"
UNMAPPED = "unmapped"


def stress_element(family: str) -> ReferenceElement:
    """Reference row element for a stress family name ('rt2', 'rt3', 'bdm1')."""
    fam = family.lower()
    if fam == "bdm1":
        return bdm1_element()
    if fam.startswith("rt") and fam[2:].isdigit():
        return rt_element(int(fam[2:]))
    raise ValueError(f"unknown stress family {family!r}")


def family_order(family: str) -> int:
    """Order r of a family: rt_r -> r, bdm1 -> 1.

    Displacement and rotation companions have polynomial degree r-1.
    """
    return stress_element(family).n_edge_dofs if family.lower() != "bdm1" else 1


@dataclass(frozen=True)
class FESpace:
    """Finite element space on a mesh.

    ``row_dofs[e, i]`` is the row-local global dof of local basis function i
    on element e; ``row_signs`` the orientation sign (always +1 except for
    shared Piola edge dofs).  ``components`` counts identical rows (2 for
    stress matrices and vector displacements, 1 for rotations).
    """

    mesh: QuadMesh
    element: ReferenceElement
    kind: str
    components: int
    row_dofs: np.ndarray  # (nq, local_dim) int
    row_signs: np.ndarray  # (nq, local_dim) float
    n_row_dofs: int
    centers: np.ndarray | None = None  # (nq, 2), unmapped spaces only
    scales: np.ndarray | None = None  # (nq,), unmapped spaces only
    exponents: np.ndarray | None = None  # (local_dim, 2), unmapped only

    @property
    def n_dofs(self) -> int:
        return self.components * self.n_row_dofs

    @property
    def local_dim(self) -> int:
        return self.row_dofs.shape[1]

    def global_dof(self, component: int, elem: int, local: int) -> int:
        return component * self.n_row_dofs + int(self.row_dofs[elem, local])

    def local_coefficients(self, coefficients: np.ndarray) -> np.ndarray:
        """Per-element, per-row coefficients including orientation signs.

        Returns shape (components, nq, local_dim).
        """
        coefficients = np.asarray(coefficients)
        if coefficients.shape != (self.n_dofs,):
            raise ValueError(
                f"expected {self.n_dofs} coefficients, got {coefficients.shape}"
            )
        out = np.empty((self.components, self.mesh.n_quads, self.local_dim))
        for rho in range(self.components):
            block = coefficients[rho * self.n_row_dofs:(rho + 1) * self.n_row_dofs]
            out[rho] = block[self.row_dofs] * self.row_signs
        return out


@dataclass
class FEFunction:
    """Coefficient vector attached to a space."""

    space: FESpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ValueError("coefficient vector does not match space size")

    def __call__(self, elem: int, xhat: np.ndarray) -> np.ndarray:
        return evaluate(self, elem, xhat)

    def div(self, elem: int, xhat: np.ndarray) -> np.ndarray:
        return evaluate_div(self, elem, xhat)


def build_stress_space(mesh: QuadMesh, family: str) -> FESpace:
    """H(div)-conforming matrix-valued stress space; each row a Piola copy.

    Row dof layout: edge dofs first (global edge E, moment m -> E*r + m),
    then element-interior blocks.
    """
    elem = stress_element(family)
    r = elem.n_edge_dofs
    n_int = len(elem.interior_dofs)
    nq, ne = mesh.n_quads, mesh.n_edges
    row_dofs = np.empty((nq, elem.dim), dtype=np.int64)
    row_signs = np.ones((nq, elem.dim))
    for q in range(nq):
        for j in range(4):
            edge, orient = mesh.quad_edges[q, j]
            for dof_i in elem.edge_dofs[j]:
                deg = elem.dofs[dof_i].degree
                row_dofs[q, dof_i] = edge * r + deg
                if orient == -1:
                    row_signs[q, dof_i] = (-1.0) ** (deg + 1)
        for k, dof_i in enumerate(elem.interior_dofs):
            row_dofs[q, dof_i] = ne * r + q * n_int + k
    return FESpace(mesh, elem, PIOLA, 2, row_dofs, row_signs,
                   n_row_dofs=ne * r + nq * n_int)


def _discontinuous_dofs(nq: int, dim: int):
    row_dofs = np.arange(nq * dim, dtype=np.int64).reshape(nq, dim)
    return row_dofs, np.ones((nq, dim))


def build_displacement_space(mesh: QuadMesh, r: int) -> FESpace:
    """Vector displacement space, Q_{r-1} per component, mapped by composition."""
    if r < 1:
        raise ValueError("family order r must be >= 1")
    elem = q_element(r - 1)
    row_dofs, row_signs = _discontinuous_dofs(mesh.n_quads, elem.dim)
    return FESpace(mesh, elem, COMPOSE, 2, row_dofs, row_signs,
                   n_row_dofs=mesh.n_quads * elem.dim)


def build_rotation_space(mesh: QuadMesh, r: int) -> FESpace:
    """Scalar rotation space, unmapped P_{r-1} in scaled element coordinates."""
    if r < 1:
        raise ValueError("family order r must be >= 1")
    elem = p_element(r - 1)
    row_dofs, row_signs = _discontinuous_dofs(mesh.n_quads, elem.dim)
    p = mesh.element_corners()
    centers = p.mean(axis=1)
    scales = np.linalg.norm(p[:, :, None, :] - p[:, None, :, :], axis=-1).max(axis=(1, 2))
    exponents = np.array([(i, j) for i in range(r) for j in range(r - i)],
                         dtype=np.int64)
    return FESpace(mesh, elem, UNMAPPED, 1, row_dofs, row_signs,
                   n_row_dofs=mesh.n_quads * elem.dim,
                   centers=centers, scales=scales, exponents=exponents)


def build_elasticity_spaces(mesh: QuadMesh, family: str):
    """The (stress, displacement, rotation) triple for one family."""
    r = family_order(family)
    return (
        build_stress_space(mesh, family),
        build_displacement_space(mesh, r),
        build_rotation_space(mesh, r),
    )


def unmapped_monomials(space: FESpace, X: np.ndarray, elements=None) -> np.ndarray:
    """Scaled-coordinate monomials; X is (nq_sel, npts, 2) physical points."""
    if elements is None:
        elements = np.arange(space.mesh.n_quads)
    centers = space.centers[elements]
    scales = space.scales[elements]
    xi = (X - centers[:, None, :]) / scales[:, None, None]
    a = space.exponents[:, 0][:, None, None]
    b = space.exponents[:, 1][:, None, None]
    return xi[None, ..., 0] ** a * xi[None, ..., 1] ** b  # (dim, nq_sel, npts)


def evaluate_batch(f: FEFunction, xhat: np.ndarray,
                   elements: np.ndarray | None = None) -> np.ndarray:
    """Values of ``f`` at the same reference points in many elements.

    Returns shape (nq_sel, npts, 2, 2) for stress, (nq_sel, npts, 2) for
    displacement, (nq_sel, npts) for rotation.
    """
    space = f.space
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    if elements is None:
        elements = np.arange(space.mesh.n_quads)
    elements = np.asarray(elements)
    C = space.local_coefficients(f.coefficients)[:, elements]
    corners = space.mesh.element_corners()[elements]

    if space.kind == UNMAPPED:
        X, _, _ = geometry_at(corners, xhat)
        mono = unmapped_monomials(space, X, elements)
        return np.einsum("ek,kep->ep", C[0], mono)

    Phi = space.element.basis.eval(xhat)  # (dim, npts, ncomp)
    if space.kind == COMPOSE:
        vals = np.einsum("rek,kp->epr", C, Phi[..., 0])
        return vals if space.components > 1 else vals[..., 0]

    # Piola rows
    _, DF, J = geometry_at(corners, xhat)
    ref = np.einsum("rek,kpc->repc", C, Phi)
    vals = np.einsum("epck,repk->eprc", DF, ref) / J[..., None, None]
    return vals if space.components > 1 else vals[:, :, 0, :]


def evaluate_div_batch(f: FEFunction, xhat: np.ndarray,
                       elements: np.ndarray | None = None) -> np.ndarray:
    """Row-wise divergence of a Piola-mapped function, via the 1/J transform."""
    space = f.space
    if space.kind != PIOLA:
        raise ValueError("divergence evaluation requires a Piola-mapped space")
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    if elements is None:
        elements = np.arange(space.mesh.n_quads)
    elements = np.asarray(elements)
    C = space.local_coefficients(f.coefficients)[:, elements]
    corners = space.mesh.element_corners()[elements]
    dPhi = space.element.basis.div(xhat)  # (dim, npts)
    _, _, J = geometry_at(corners, xhat)
    ref = np.einsum("rek,kp->epr", C, dPhi)
    vals = ref / J[..., None]
    return vals if space.components > 1 else vals[..., 0]


def _check_elem(space: FESpace, elem: int) -> int:
    if not 0 <= elem < space.mesh.n_quads:
        raise IndexError(f"element index {elem} out of range")
    return elem


def evaluate(f: FEFunction, elem: int, xhat: np.ndarray) -> np.ndarray:
    """Value of ``f`` on element ``elem`` at reference points ``xhat``."""
    xhat = np.asarray(xhat, dtype=float)
    single = xhat.ndim == 1
    out = evaluate_batch(f, np.atleast_2d(xhat),
                         elements=np.array([_check_elem(f.space, elem)]))[0]
    return out[0] if single else out


def evaluate_div(f: FEFunction, elem: int, xhat: np.ndarray) -> np.ndarray:
    """Divergence of ``f`` (Piola spaces) on one element."""
    xhat = np.asarray(xhat, dtype=float)
    single = xhat.ndim == 1
    out = evaluate_div_batch(f, np.atleast_2d(xhat),
                             elements=np.array([_check_elem(f.space, elem)]))[0]
    return out[0] if single else out
