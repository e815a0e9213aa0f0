"""Quadrilateral meshes of the unit square.

Provides the mesh container with oriented edge topology, the two structured
generators used in the convergence studies (uniform squares and congruent
trapezoids), shape-regularity metrics, and a plain-text mesh format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuadMesh",
    "MeshQuality",
    "generate_square_mesh",
    "generate_trapezoidal_mesh",
    "mesh_quality",
    "write_mesh",
    "read_mesh",
]

# Corners of the reference square in counterclockwise order.
_REF_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

# Local edges of a quad as (start, end) vertex slots, counterclockwise.
LOCAL_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


def corner_jacobians(vertices: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """Bilinear-map Jacobian determinant at the four corners of each quad.

    For a bilinear map the Jacobian determinant is affine in the reference
    coordinates, so positivity at all four corners implies positivity on the
    whole element (strict convexity).

    Returns an array of shape (n_quads, 4).
    """
    p = vertices[quads]  # (nq, 4, 2)
    jac = np.empty((len(quads), 4))
    for c in range(4):
        # At corner c the two Jacobian columns are the edge vectors leaving it.
        e_next = p[:, (c + 1) % 4] - p[:, c]
        e_prev = p[:, (c + 3) % 4] - p[:, c]
        jac[:, c] = e_next[:, 0] * e_prev[:, 1] - e_next[:, 1] * e_prev[:, 0]
    return jac


@dataclass(frozen=True)
class QuadMesh:
    """Conforming mesh of strictly convex quadrilaterals.

    Vertices and quads are given; edge topology is derived on construction.
    Edges are keyed by their sorted vertex pair and directed lo -> hi, so a
    shared edge has one well-defined global direction.  ``quad_edges`` stores,
    per quad, four ``(edge index, orientation)`` pairs where orientation is +1
    when the quad's counterclockwise traversal runs lo -> hi and -1 otherwise.
    """

    vertices: np.ndarray  # (nv, 2) float
    quads: np.ndarray  # (nq, 4) int, counterclockwise
    edges: np.ndarray = field(init=False)  # (ne, 2) int, lo < hi
    quad_edges: np.ndarray = field(init=False)  # (nq, 4, 2) int: (edge, +-1)
    h: float = field(init=False)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        quads = np.ascontiguousarray(self.quads, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if quads.ndim != 2 or quads.shape[1] != 4:
            raise ValueError("quads must have shape (nq, 4)")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertex coordinates must be finite")

        jac = corner_jacobians(vertices, quads)
        if not np.all(jac > 0.0):
            bad = int(np.argwhere(~np.all(jac > 0.0, axis=1))[0, 0])
            raise ValueError(
                f"quad {bad} is not strictly convex / counterclockwise "
                f"(corner Jacobians {jac[bad]})"
            )

        edge_ids: dict[tuple[int, int], int] = {}
        quad_edges = np.empty((len(quads), 4, 2), dtype=np.int64)
        edge_count: list[int] = []
        for q, quad in enumerate(quads):
            for j, (a, b) in enumerate(LOCAL_EDGES):
                va, vb = int(quad[a]), int(quad[b])
                key = (va, vb) if va < vb else (vb, va)
                e = edge_ids.setdefault(key, len(edge_ids))
                if e == len(edge_count):
                    edge_count.append(0)
                edge_count[e] += 1
                quad_edges[q, j] = (e, 1 if va < vb else -1)
        edges = np.array(list(edge_ids.keys()), dtype=np.int64)

        counts = np.asarray(edge_count)
        if counts.max(initial=0) > 2:
            raise ValueError("non-manifold mesh: an edge is shared by >2 quads")
        if len(vertices) - len(edges) + len(quads) != 1:
            raise ValueError("Euler count check failed; mesh is not a simply "
                             "connected quad partition")

        p = vertices[quads]
        diams = np.linalg.norm(p[:, :, None, :] - p[:, None, :, :], axis=-1)
        h = float(diams.max())

        for name, value in (("vertices", vertices), ("quads", quads),
                            ("edges", edges), ("quad_edges", quad_edges)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "_edge_use", counts)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_quads(self) -> int:
        return len(self.quads)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def boundary_edges(self) -> np.ndarray:
        """Indices of edges adjacent to exactly one quad."""
        return np.flatnonzero(self._edge_use == 1)

    def element_corners(self) -> np.ndarray:
        """Corner coordinates per element, shape (nq, 4, 2)."""
        return self.vertices[self.quads]


@dataclass(frozen=True)
class MeshQuality:
    h_max: float
    shape_regularity: float  # max over elements of diam(K) / rho_K


def _incircle_diameter(a, b, c):
    """Diameter of the inscribed circle of triangle abc (vectorized)."""
    la = np.linalg.norm(b - c, axis=-1)
    lb = np.linalg.norm(c - a, axis=-1)
    lc = np.linalg.norm(a - b, axis=-1)
    area = 0.5 * np.abs(
        (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
        - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])
    )
    return 4.0 * area / (la + lb + lc)


def mesh_quality(mesh: QuadMesh) -> MeshQuality:
    """Shape-regularity metric max_K diam(K) / rho_K.

    rho_K is the smallest inscribed-circle diameter among the four triangles
    obtained by dropping one vertex of the quadrilateral.
    """
    p = mesh.element_corners()
    diam = np.linalg.norm(p[:, :, None, :] - p[:, None, :, :], axis=-1).max(axis=(1, 2))
    rho = np.full(mesh.n_quads, np.inf)
    for drop in range(4):
        keep = [k for k in range(4) if k != drop]
        d = _incircle_diameter(p[:, keep[0]], p[:, keep[1]], p[:, keep[2]])
        rho = np.minimum(rho, d)
    return MeshQuality(h_max=float(diam.max()),
                       shape_regularity=float((diam / rho).max()))


def _grid_quads(n: int) -> np.ndarray:
    """Counterclockwise quads for an (n+1) x (n+1) vertex grid, row-major."""
    idx = lambda i, j: j * (n + 1) + i
    quads = np.empty((n * n, 4), dtype=np.int64)
    q = 0
    for j in range(n):
        for i in range(n):
            quads[q] = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1))
            q += 1
    return quads


def generate_square_mesh(n: int) -> QuadMesh:
    """Uniform n x n mesh of the unit square into congruent subsquares."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    coords = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])
    return QuadMesh(vertices, _grid_quads(n))


def generate_trapezoidal_mesh(n: int, d: float = 1.0 / 6.0) -> QuadMesh:
    """n x n mesh in which every interior element is a fixed trapezoid.

    Vertices sit on the uniform grid in x; interior horizontal grid lines are
    displaced vertically by +-d*h in a checkerboard pattern,

        y_{i,j} = h * (j + (-1)**(i+j) * d),   1 <= j <= n-1,

    with the top and bottom rows kept flat so the mesh conforms to the unit
    square.  Interior elements have vertical parallel edges of lengths
    h*(1-2d) and h*(1+2d); the default d = 1/6 gives the 1:2 edge ratio of
    the classical distorted-mesh family.
    """
    if n < 2:
        raise ValueError("n must be >= 2 for the trapezoidal family")
    if not 0.0 <= d < 0.5:
        raise ValueError("distortion d must satisfy 0 <= d < 1/2")
    h = 1.0 / n
    i_idx, j_idx = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    x = i_idx * h
    y = (j_idx + np.where((i_idx + j_idx) % 2 == 0, d, -d)) * h
    y[:, :] = np.where((j_idx == 0) | (j_idx == n), j_idx * h, y)
    vertices = np.column_stack([x.ravel(), y.ravel()])
    return QuadMesh(vertices, _grid_quads(n))


def write_mesh(mesh: QuadMesh, path) -> None:
    """Write the plain-text format: header, vertex lines, quad lines."""
    with open(path, "w") as fh:
        fh.write(f"quadmesh {mesh.n_vertices} {mesh.n_quads}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for quad in mesh.quads:
            fh.write("{} {} {} {}\n".format(*quad))


def read_mesh(path) -> QuadMesh:
    """Read the plain-text format written by :func:`write_mesh`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "quadmesh":
            raise ValueError("not a quadmesh file")
        nv, nq = int(header[1]), int(header[2])
        vertices = np.array(
            [[float(t) for t in fh.readline().split()] for _ in range(nv)]
        )
        quads = np.array(
            [[int(t) for t in fh.readline().split()] for _ in range(nq)],
            dtype=np.int64,
        )
    return QuadMesh(vertices, quads)
