"""Conforming triangulations of 2D polygonal domains and their nested refinements.

A :class:`Mesh` stores vertex coordinates, counterclockwise triangle
connectivity and per-vertex boundary flags.  Boundary flags are always
recomputed from edge incidence (an edge belonging to exactly one triangle is
a boundary edge), never trusted from input files.

Regular refinement splits each triangle into four congruent children by
connecting the edge midpoints, halving the mesh size, and records the
coarse-to-fine interpolation of piecewise-linear vertex coefficients as a
sparse :data:`Prolongation` matrix.  :func:`build_hierarchy` chains
refinements into a :class:`MeshHierarchy`, the nested sequence of spaces the
multigrid solvers operate on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import MeshFormatError

__all__ = [
    "Mesh",
    "MeshHierarchy",
    "Prolongation",
    "unit_square_mesh",
    "load_mesh",
    "save_mesh",
    "refine_regular",
    "build_hierarchy",
    "triangle_areas",
    "max_edge_length",
]

#: Sparse coarse-to-fine interpolation matrix (one row per fine vertex).
Prolongation = sp.csr_array


@dataclass(frozen=True)
class Mesh:
    """Immutable conforming triangulation.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
        Vertex coordinates.
    triangles : ndarray, shape (nt, 3)
        Vertex indices of each triangle, counterclockwise.
    boundary_vertex : ndarray of bool, shape (nv,)
        True for vertices lying on an edge owned by exactly one triangle.
    level : int
        Refinement generation (0 for an initial mesh).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    level: int = 0

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class MeshHierarchy:
    """Nested meshes ordered coarse to fine with inter-level prolongations.

    ``prolongations[k]`` interpolates vertex coefficients of ``meshes[k]``
    onto ``meshes[k + 1]``; compositions embed any level into any finer one.
    ``coarse_index`` marks the level whose space augments the small
    eigenproblem in the correction scheme.  ``beta`` is the stored mesh-size
    refinement index; only ``beta = 2`` (midpoint refinement) is implemented.
    """

    meshes: list[Mesh]
    prolongations: list[Prolongation]
    coarse_index: int = 0
    beta: int = 2

    @property
    def n_levels(self) -> int:
        return len(self.meshes)

    def compose_prolongation(self, start: int, stop: int) -> Prolongation:
        """Return the full-vertex interpolation from level ``start`` to ``stop``."""
        if not 0 <= start <= stop < self.n_levels:
            raise ValueError("level range (%d, %d) out of bounds" % (start, stop))
        op = sp.identity(self.meshes[start].n_vertices, format="csr")
        op = sp.csr_array(op)
        for k in range(start, stop):
            op = self.prolongations[k] @ op
        return op


def _sorted_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges (sorted vertex pairs) and per-edge triangle counts."""
    raw = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    raw.sort(axis=1)
    edges, counts = np.unique(raw, axis=0, return_counts=True)
    return edges, counts


def _signed_doubled_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    d1 = v1 - v0
    d2 = v2 - v0
    return d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]


def _build_mesh(vertices: np.ndarray, triangles: np.ndarray, level: int) -> Mesh:
    """Validate connectivity, derive boundary flags and freeze the arrays."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    nv = vertices.shape[0]
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= nv:
        raise ValueError("triangle refers to vertex index outside 0..%d" % (nv - 1))
    if np.any(_signed_doubled_areas(vertices, triangles) <= 0.0):
        bad = int(np.flatnonzero(_signed_doubled_areas(vertices, triangles) <= 0.0)[0])
        raise ValueError("triangle %d has non-positive area (orientation?)" % bad)

    edges, counts = _sorted_edges(triangles)
    if counts.max(initial=0) > 2:
        raise ValueError("non-conforming mesh: an edge is shared by >2 triangles")

    boundary = np.zeros(nv, dtype=bool)
    boundary[edges[counts == 1].ravel()] = True

    vertices.setflags(write=False)
    triangles.setflags(write=False)
    boundary.setflags(write=False)
    return Mesh(vertices, triangles, boundary, level)


def unit_square_mesh(nx: int) -> Mesh:
    """Criss-cross triangulation of the unit square with ``nx`` cells per side.

    Every grid square is split along its lower-left to upper-right diagonal,
    giving ``(nx + 1)**2`` vertices and ``2 * nx**2`` triangles, all
    counterclockwise.
    """
    if nx < 1:
        raise ValueError("nx must be >= 1, got %r" % (nx,))
    coords = np.linspace(0.0, 1.0, nx + 1)
    x, y = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([x.ravel(), y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(nx), indexing="xy")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.concatenate([lower, upper])
    return _build_mesh(vertices, triangles, level=0)


def load_mesh(text: str) -> Mesh:
    """Parse the plain-text node/element format into a validated mesh.

    Format: a header line ``NV NT``, then ``NV`` lines ``x y``, then ``NT``
    lines ``i j k`` of 0-based counterclockwise vertex indices.  Blank lines
    and lines starting with ``#`` are skipped.  Boundary flags are
    recomputed from connectivity.

    Raises
    ------
    MeshFormatError
        On malformed lines, out-of-range indices or non-positive triangle
        areas, reporting the 1-based line number.
    """
    records = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not records:
        raise MeshFormatError("empty mesh file")

    lineno, header = records[0]
    if len(header) != 2:
        raise MeshFormatError("expected header 'NV NT'", line=lineno)
    try:
        nv, nt = int(header[0]), int(header[1])
    except ValueError:
        raise MeshFormatError("non-integer counts in header", line=lineno) from None
    if nv < 3 or nt < 1:
        raise MeshFormatError("need at least 3 vertices and 1 triangle", line=lineno)
    if len(records) != 1 + nv + nt:
        raise MeshFormatError(
            "expected %d data lines, found %d" % (nv + nt, len(records) - 1),
            line=lineno,
        )

    vertices = np.empty((nv, 2))
    for row, (lineno, fields) in enumerate(records[1 : 1 + nv]):
        if len(fields) != 2:
            raise MeshFormatError("expected 'x y'", line=lineno)
        try:
            vertices[row] = [float(fields[0]), float(fields[1])]
        except ValueError:
            raise MeshFormatError("non-numeric coordinate", line=lineno) from None
        if not np.all(np.isfinite(vertices[row])):
            raise MeshFormatError("non-finite coordinate", line=lineno)

    triangles = np.empty((nt, 3), dtype=np.int64)
    for row, (lineno, fields) in enumerate(records[1 + nv :]):
        if len(fields) != 3:
            raise MeshFormatError("expected 'i j k'", line=lineno)
        try:
            triangles[row] = [int(f) for f in fields]
        except ValueError:
            raise MeshFormatError("non-integer vertex index", line=lineno) from None
        if triangles[row].min() < 0 or triangles[row].max() >= nv:
            raise MeshFormatError(
                "vertex index out of range 0..%d" % (nv - 1), line=lineno
            )
        if _signed_doubled_areas(vertices, triangles[row : row + 1])[0] <= 0.0:
            raise MeshFormatError(
                "triangle has zero or negative area", line=lineno
            )

    try:
        return _build_mesh(vertices, triangles, level=0)
    except ValueError as exc:
        raise MeshFormatError(str(exc)) from None


def save_mesh(mesh: Mesh) -> str:
    """Serialize a mesh to the node/element text format (17 significant digits)."""
    lines = ["%d %d" % (mesh.n_vertices, mesh.n_triangles)]
    lines.extend("%.17g %.17g" % (x, y) for x, y in mesh.vertices)
    lines.extend("%d %d %d" % (i, j, k) for i, j, k in mesh.triangles)
    return "\n".join(lines) + "\n"


def refine_regular(mesh: Mesh) -> tuple[Mesh, Prolongation]:
    """Split every triangle into four congruent children via edge midpoints.

    Midpoint vertices are created once per undirected edge (keyed by the
    sorted vertex pair), so the fine mesh has ``V + E`` vertices and the
    result is independent of triangle ordering.  Returns the fine mesh and
    the prolongation whose rows hold 1 for retained coarse vertices and two
    entries of 1/2 for midpoint vertices.
    """
    tri = mesh.triangles
    nv = mesh.n_vertices
    edges, _ = _sorted_edges(tri)
    ne = edges.shape[0]

    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    fine_vertices = np.concatenate([mesh.vertices, midpoints])

    # Locate each triangle edge in the unique sorted-edge table.
    def edge_ids(a, b):
        pairs = np.sort(np.column_stack([tri[:, a], tri[:, b]]), axis=1)
        keys = edges[:, 0] * np.int64(nv) + edges[:, 1]
        wanted = pairs[:, 0] * np.int64(nv) + pairs[:, 1]
        return nv + np.searchsorted(keys, wanted)

    m01 = edge_ids(0, 1)
    m12 = edge_ids(1, 2)
    m20 = edge_ids(2, 0)

    children = np.concatenate(
        [
            np.column_stack([tri[:, 0], m01, m20]),
            np.column_stack([tri[:, 1], m12, m01]),
            np.column_stack([tri[:, 2], m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    fine = _build_mesh(fine_vertices, children, level=mesh.level + 1)

    rows = np.concatenate([np.arange(nv), np.repeat(nv + np.arange(ne), 2)])
    cols = np.concatenate([np.arange(nv), edges.ravel()])
    vals = np.concatenate([np.ones(nv), np.full(2 * ne, 0.5)])
    prolongation = sp.csr_array(
        (vals, (rows, cols)), shape=(nv + ne, nv)
    )
    prolongation.sort_indices()
    return fine, prolongation


def _projected_refined_counts(nv: int, ne: int, nt: int) -> tuple[int, int, int]:
    # One refinement: V' = V + E, E' = 2E + 3T, T' = 4T.
    return nv + ne, 2 * ne + 3 * nt, 4 * nt


def build_hierarchy(
    coarse: Mesh,
    n_levels: int,
    coarse_index: int = 0,
    max_vertices: int = 20_000_000,
) -> MeshHierarchy:
    """Refine ``coarse`` ``n_levels - 1`` times into a nested hierarchy.

    The projected vertex count of every level is checked against
    ``max_vertices`` before any refinement is performed, so oversized
    requests fail with a sizing error instead of exhausting memory.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1, got %r" % (n_levels,))
    if not 0 <= coarse_index < n_levels:
        raise ValueError("coarse_index %d outside 0..%d" % (coarse_index, n_levels - 1))

    nv, nt = coarse.n_vertices, coarse.n_triangles
    ne = _sorted_edges(coarse.triangles)[0].shape[0]
    for _ in range(n_levels - 1):
        nv, ne, nt = _projected_refined_counts(nv, ne, nt)
        if nv > max_vertices:
            raise ValueError(
                "projected fine vertex count %d exceeds cap %d" % (nv, max_vertices)
            )

    meshes = [coarse]
    prolongations = []
    for _ in range(n_levels - 1):
        fine, op = refine_regular(meshes[-1])
        meshes.append(fine)
        prolongations.append(op)
    return MeshHierarchy(meshes, prolongations, coarse_index=coarse_index)


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Positive area of every triangle."""
    return 0.5 * _signed_doubled_areas(mesh.vertices, mesh.triangles)


def max_edge_length(mesh: Mesh) -> float:
    """Mesh size: the longest edge over all triangles."""
    edges, _ = _sorted_edges(mesh.triangles)
    d = mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]]
    return float(np.sqrt((d * d).sum(axis=1)).max())
