"""Interval and triangle meshes, the four square meshes, and the ASCII mesh format.

Meshes are immutable values.  Both mesh types expose the same small surface
used by the finite element code: ``dim``, ``coordinates`` (nv x dim),
``cells`` (ne x dim+1 vertex indices), ``markers`` and ``measures``.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Sequence, Union

import numpy as np

from .errors import DegenerateElement, InvalidMesh, ParseError, Unsupported

INFLOW = "I"
OUTFLOW = "O"
LATERAL = "L"
INTERIOR = "."
MARKERS = (INFLOW, OUTFLOW, LATERAL, INTERIOR)

_GEOM_TOL = 1e-14


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Partition of ``(x_0, x_N)`` into intervals ``(x_{i-1}, x_i)``."""

    breakpoints: np.ndarray
    dim: ClassVar[int] = 1

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float).ravel()
        if x.size < 2:
            raise InvalidMesh("an interval mesh needs at least 2 breakpoints")
        if not np.all(np.isfinite(x)):
            raise InvalidMesh("breakpoints must be finite")
        if np.any(np.diff(x) <= 0):
            raise InvalidMesh("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", _readonly(x, float))

    @property
    def coordinates(self):
        return self.breakpoints[:, None]

    @property
    def cells(self):
        n = self.num_elements
        return np.column_stack([np.arange(n), np.arange(1, n + 1)])

    @property
    def lengths(self):
        return np.diff(self.breakpoints)

    @property
    def measures(self):
        return self.lengths

    @property
    def num_vertices(self):
        return self.breakpoints.size

    @property
    def num_elements(self):
        return self.breakpoints.size - 1

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def markers(self):
        m = [INTERIOR] * self.num_vertices
        m[0], m[-1] = INFLOW, OUTFLOW
        return tuple(m)

    def __eq__(self, other):
        if not isinstance(other, Mesh1D):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self):
        return hash(self.breakpoints.tobytes())

    def __repr__(self):
        return f"Mesh1D(N={self.num_elements}, domain={self.domain})"


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def classify_vertices(vertices):
    """Boundary marker per vertex from its position on the bounding box."""
    v = np.asarray(vertices, dtype=float)
    xmin, ymin = v.min(axis=0)
    xmax, ymax = v.max(axis=0)
    out = []
    for x, y in v:
        if abs(x - xmin) <= _GEOM_TOL:
            out.append(INFLOW)
        elif abs(x - xmax) <= _GEOM_TOL:
            out.append(OUTFLOW)
        elif abs(y - ymin) <= _GEOM_TOL or abs(y - ymax) <= _GEOM_TOL:
            out.append(LATERAL)
        else:
            out.append(INTERIOR)
    return tuple(out)


def _canonical_rotation(tri):
    k = int(np.argmin(tri))
    return (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3])


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation of a rectangle.

    Triangles are stored counter-clockwise with their lowest vertex index
    first.  Use :meth:`build` to get that normalisation from arbitrary input;
    the plain constructor only validates.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_markers: tuple
    dim: ClassVar[int] = 2

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidMesh("vertices must be an (nv, 2) array with nv >= 3")
        if not np.all(np.isfinite(v)):
            raise InvalidMesh("vertex coordinates must be finite")
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] < 1:
            raise InvalidMesh("triangles must be an (ne, 3) index array")
        if not np.issubdtype(t.dtype, np.integer):
            if not np.all(t == np.round(t)):
                raise InvalidMesh("triangle indices must be integers")
            t = t.astype(np.int64)
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise InvalidMesh("triangle vertex index out of range")
        markers = tuple(self.boundary_markers)
        if len(markers) != v.shape[0] or any(m not in MARKERS for m in markers):
            raise InvalidMesh("need one marker in {I, O, L, .} per vertex")
        object.__setattr__(self, "vertices", _readonly(v, float))
        object.__setattr__(self, "triangles", _readonly(t, np.int64))
        object.__setattr__(self, "boundary_markers", markers)
        self._validate()

    def _validate(self):
        v, t = self.vertices, self.triangles
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise InvalidMesh("triangle with repeated vertex")
        areas = signed_areas(v, t)
        if np.any(areas <= 0):
            k = int(np.argmin(areas))
            raise InvalidMesh(f"triangle {k} is not counter-clockwise or is degenerate")
        used = np.zeros(v.shape[0], dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise InvalidMesh(f"vertex {int(np.argmin(used))} belongs to no triangle")

        xmin, ymin = v.min(axis=0)
        xmax, ymax = v.max(axis=0)
        box = (xmax - xmin) * (ymax - ymin)
        if abs(areas.sum() - box) > 1e-12 * max(box, 1.0):
            raise InvalidMesh("triangles do not tile the bounding rectangle")

        edges = Counter()
        for a, b, c in t:
            for e in ((a, b), (b, c), (c, a)):
                edges[(min(e), max(e))] += 1
        for (a, b), n in edges.items():
            if n > 2:
                raise InvalidMesh(f"edge ({a}, {b}) shared by {n} triangles")
            if n == 1 and not _on_same_box_side(v[a], v[b], xmin, xmax, ymin, ymax):
                raise InvalidMesh(f"edge ({a}, {b}) is unmatched but not on the boundary")

        expected = classify_vertices(v)
        for i, (m, e) in enumerate(zip(self.boundary_markers, expected)):
            if m != e:
                raise InvalidMesh(f"vertex {i} marked {m!r}, geometry says {e!r}")

    @classmethod
    def build(cls, vertices, triangles, markers=None):
        """Orient triangles CCW, rotate lowest index first, derive markers."""
        v = np.asarray(vertices, dtype=float)
        tris = []
        for tri in np.asarray(triangles, dtype=np.int64):
            a, b, c = (int(i) for i in tri)
            p = v[[a, b, c]]
            cross = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
            if cross < 0:
                b, c = c, b
            tris.append(_canonical_rotation((a, b, c)))
        if markers is None:
            markers = classify_vertices(v)
        return cls(v, np.array(tris, dtype=np.int64), tuple(markers))

    @property
    def coordinates(self):
        return self.vertices

    @property
    def cells(self):
        return self.triangles

    @property
    def markers(self):
        return self.boundary_markers

    @property
    def areas(self):
        return signed_areas(self.vertices, self.triangles)

    @property
    def measures(self):
        return self.areas

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_elements(self):
        return self.triangles.shape[0]

    def edges(self):
        """Sorted unique vertex pairs."""
        s = set()
        for a, b, c in self.triangles:
            for e in ((a, b), (b, c), (c, a)):
                s.add((int(min(e)), int(max(e))))
        return sorted(s)

    def edge_counts(self):
        n = Counter()
        for a, b, c in self.triangles:
            for e in ((a, b), (b, c), (c, a)):
                n[(int(min(e)), int(max(e)))] += 1
        return n

    def find_vertex(self, point, tol=1e-12):
        d = np.abs(self.vertices - np.asarray(point, dtype=float)).max(axis=1)
        k = int(np.argmin(d))
        return k if d[k] <= tol else None

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and self.boundary_markers == other.boundary_markers
        )

    def __hash__(self):
        return hash((self.vertices.tobytes(), self.triangles.tobytes()))

    def __repr__(self):
        return f"TriMesh(nv={self.num_vertices}, ne={self.num_elements})"


def _on_same_box_side(p, q, xmin, xmax, ymin, ymax):
    for k, lo, hi in ((0, xmin, xmax), (1, ymin, ymax)):
        for side in (lo, hi):
            if abs(p[k] - side) <= _GEOM_TOL and abs(q[k] - side) <= _GEOM_TOL:
                return True
    return False


Mesh = Union[Mesh1D, TriMesh]


# ---------------------------------------------------------------- generators

def interval_mesh(breakpoints: Sequence[float]) -> Mesh1D:
    return Mesh1D(np.asarray(breakpoints, dtype=float))


def uniform_interval_mesh(n: int, a: float = 0.0, b: float = 1.0) -> Mesh1D:
    return Mesh1D(np.linspace(a, b, n + 1))


def two_element_mesh(h: float) -> Mesh1D:
    """``(0, 1-h)`` and ``(1-h, 1)``; the last element has length ``h``."""
    return Mesh1D(np.array([0.0, 1.0 - h, 1.0]))


def jump_mesh(h: float) -> Mesh1D:
    """Symmetric four-element mesh ``-1 < -h < 0 < h < 1``."""
    return Mesh1D(np.array([-1.0, -h, 0.0, h, 1.0]))


class Pattern(enum.Enum):
    MESH1 = "mesh1"
    MESH2 = "mesh2"
    MESH3 = "mesh3"
    MESH4 = "mesh4"


# 3x3 grid, row-major: 0 (0,0) 1 (.5,0) 2 (1,0) 3 (0,.5) 4 (.5,.5) 5 (1,.5) 6 (0,1) 7 (.5,1) 8 (1,1).
# Triangle k of each list is the element conventionally labelled tau_k.
_GRID3 = np.array([[x, y] for y in (0.0, 0.5, 1.0) for x in (0.0, 0.5, 1.0)])
_SQUARE_TRIANGLES = {
    Pattern.MESH2: [(0, 1, 4), (0, 4, 3), (1, 2, 5), (1, 5, 4), (3, 4, 7), (3, 7, 6), (4, 5, 8), (4, 8, 7)],
    Pattern.MESH3: [(0, 1, 4), (0, 4, 3), (2, 5, 4), (1, 2, 4), (4, 7, 6), (3, 4, 6), (4, 5, 8), (4, 8, 7)],
    Pattern.MESH4: [(1, 4, 3), (0, 1, 3), (1, 2, 5), (1, 5, 4), (3, 4, 7), (3, 7, 6), (5, 8, 7), (4, 5, 7)],
}


def criss_cross_mesh(n: int) -> TriMesh:
    """Unit square cut into ``n x n`` cells, each split by both diagonals.

    Vertices are the ``(n+1)^2`` grid points (row-major) followed by the
    ``n^2`` cell centres.  Each cell contributes its bottom, right, top and
    left triangle in that order, so ``n = 1`` gives Mesh 1 with the
    elements in the order tau_0..tau_3.
    """
    if n < 1:
        raise InvalidMesh("criss-cross mesh needs n >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    grid = np.array([[x, y] for y in g for x in g])
    c = (g[:-1] + g[1:]) / 2
    centres = np.array([[x, y] for y in c for x in c])
    vertices = np.vstack([grid, centres])
    tris = []
    for j in range(n):
        for i in range(n):
            bl = j * (n + 1) + i
            br, tl = bl + 1, bl + n + 1
            tr = tl + 1
            m = (n + 1) ** 2 + j * n + i
            tris += [(bl, br, m), (br, tr, m), (tr, tl, m), (tl, bl, m)]
    return TriMesh.build(vertices, tris)


def structured_square_mesh(pattern, refine: int = 0) -> TriMesh:
    """One of the four meshes of the unit square.

    ``refine = k`` applies ``k`` structure-preserving uniform refinements,
    which is only defined for the criss-cross Mesh 1 (``4**(k+1)`` triangles).
    """
    pattern = Pattern(pattern) if not isinstance(pattern, Pattern) else pattern
    if refine < 0:
        raise InvalidMesh("refine must be non-negative")
    if pattern is Pattern.MESH1:
        return criss_cross_mesh(2 ** refine)
    if refine:
        raise Unsupported(f"refinement is only defined for mesh1, not {pattern.value}")
    return TriMesh.build(_GRID3, _SQUARE_TRIANGLES[pattern])


# ---------------------------------------------------------------- affine maps

@dataclass(frozen=True)
class AffineMap:
    """``x -> linear @ x + translation``, physical triangle onto the reference one."""

    linear: np.ndarray
    translation: np.ndarray
    jacobian_abs: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.translation

    def inverse(self, xhat):
        xhat = np.asarray(xhat, dtype=float)
        return np.linalg.solve(self.linear, (xhat - self.translation).T).T


REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def affine_to_reference(tri) -> AffineMap:
    """Map the three vertices of ``tri`` to (0,0), (1,0), (0,1) in order.

    ``jacobian_abs`` is the absolute determinant of the reference-to-physical
    map, i.e. twice the physical area.
    """
    p = np.asarray(tri, dtype=float)
    if p.shape != (3, 2):
        raise DegenerateElement("a triangle is three 2D points")
    B = np.column_stack([p[1] - p[0], p[2] - p[0]])
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    scale = max(np.abs(B).max(), 1.0)
    if abs(det) <= 1e-14 * scale * scale:
        raise DegenerateElement("triangle has zero area")
    A = np.array([[B[1, 1], -B[0, 1]], [-B[1, 0], B[0, 0]]]) / det
    return AffineMap(A, -A @ p[0], abs(det))


# ---------------------------------------------------------------- ASCII format

def format_mesh(mesh: Mesh) -> str:
    """The ASCII ``lqmesh`` text of ``mesh`` (coordinates to 17 significant digits)."""
    lines = [f"lqmesh 1 {mesh.dim}", f"{mesh.num_vertices} {mesh.num_elements}"]
    for row in mesh.coordinates:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    for cell in mesh.cells:
        lines.append(" ".join(str(int(i) + 1) for i in cell))
    lines.extend(mesh.markers)
    return "\n".join(lines) + "\n"


def save_mesh(mesh: Mesh, path) -> None:
    Path(path).write_text(format_mesh(mesh))


def load_mesh(path) -> Mesh:
    return parse_mesh(Path(path).read_text())


def parse_mesh(text: str) -> Mesh:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    pos = 0

    def next_line():
        nonlocal pos
        if pos >= len(lines):
            raise ParseError("unexpected end of file", pos + 1)
        pos += 1
        return lines[pos - 1].split()

    head = next_line()
    if len(head) != 3 or head[0] != "lqmesh" or head[1] != "1" or head[2] not in ("1", "2"):
        raise ParseError("header must be 'lqmesh 1 <dim>' with dim 1 or 2", 1)
    dim = int(head[2])
    counts = next_line()
    try:
        nv, ne = (int(c) for c in counts)
    except ValueError:
        raise ParseError("second line must be '<nv> <ne>'", 2) from None
    if nv < dim + 1 or ne < 1:
        raise ParseError("vertex/element counts too small", 2)

    coords = np.empty((nv, dim))
    for i in range(nv):
        tok = next_line()
        if len(tok) != dim:
            raise ParseError(f"expected {dim} coordinate(s)", pos)
        try:
            coords[i] = [float(s) for s in tok]
        except ValueError:
            raise ParseError("bad coordinate", pos) from None
    cells = np.empty((ne, dim + 1), dtype=np.int64)
    cell_lines = []
    for k in range(ne):
        tok = next_line()
        if len(tok) != dim + 1:
            raise ParseError(f"expected {dim + 1} vertex indices", pos)
        try:
            idx = [int(s) - 1 for s in tok]
        except ValueError:
            raise ParseError("bad vertex index", pos) from None
        if min(idx) < 0 or max(idx) >= nv:
            raise ParseError("vertex index out of range", pos)
        cells[k] = idx
        cell_lines.append(pos)
    markers = []
    for i in range(nv):
        tok = next_line()
        if len(tok) != 1 or tok[0] not in MARKERS:
            raise ParseError("marker must be one of I O L .", pos)
        markers.append(tok[0])
    if pos != len(lines):
        raise ParseError("trailing content after markers", pos + 1)

    if dim == 1:
        x = coords[:, 0]
        if not np.array_equal(cells, np.column_stack([np.arange(ne), np.arange(1, ne + 1)])) or nv != ne + 1:
            raise ParseError("1D elements must join consecutive vertices", cell_lines[0])
        try:
            mesh = Mesh1D(x)
        except InvalidMesh as exc:
            raise ParseError(str(exc), 3) from None
        if tuple(markers) != mesh.markers:
            raise ParseError("1D markers must be I, ., ..., O", 3 + nv + ne)
        return mesh

    areas = signed_areas(coords, cells)
    for k, a in enumerate(areas):
        if a <= 0:
            raise ParseError("orientation: triangle is not counter-clockwise", cell_lines[k])
    tris = [_canonical_rotation(tuple(int(i) for i in c)) for c in cells]
    try:
        return TriMesh(coords, np.array(tris, dtype=np.int64), tuple(markers))
    except InvalidMesh as exc:
        raise ParseError(str(exc), 0) from None
