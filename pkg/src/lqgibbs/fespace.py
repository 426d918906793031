"""Continuous piecewise-linear spaces with Dirichlet constraints.

Constrained nodes keep fixed coefficients and only the free nodes are
unknowns (a Dirichlet lift), so every function in the space is stored as a
full nodal coefficient vector.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import InvalidProblem, OutOfDomain
from .mesh import INFLOW, OUTFLOW, Mesh1D, TriMesh

BARYCENTRIC_TOL = 1e-12


class Problem(enum.Enum):
    """Boundary-value setting that fixes the constrained nodes."""

    BOUNDARY_1D = "boundary1d"   # u_h(0) = 1, u_h(1) = 0
    JUMP_1D = "jump1d"           # u_h(-1) = -1, u_h(1) = 1
    BOUNDARY_2D = "boundary2d"   # u_h = 1 on x = xmin, 0 on x = xmax


class TargetKind(enum.Enum):
    CONSTANT_ONE = "const1"
    SGN_X = "sgnx"
    SINE_PERTURBED = "sine"
    BOUNDARY_LAYER = "layer"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TargetFunction:
    """The function ``u`` being approximated.

    Use the constructors :meth:`constant_one`, :meth:`sgn_x`,
    :meth:`sine_perturbed`, :meth:`boundary_layer` and :meth:`custom`.
    ``smooth`` targets are integrated pointwise (1D only); the others must be
    affine on every element of the mesh they are used with, which lets the
    residual be handled with exact element geometry.
    """

    kind: TargetKind
    amplitude: float = 0.0
    frequency: float = 0.0
    epsilon: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False)
    smooth: bool = False

    @classmethod
    def constant_one(cls):
        return cls(TargetKind.CONSTANT_ONE)

    @classmethod
    def sgn_x(cls):
        return cls(TargetKind.SGN_X)

    @classmethod
    def sine_perturbed(cls, amplitude, frequency):
        return cls(TargetKind.SINE_PERTURBED, amplitude=float(amplitude),
                   frequency=float(frequency), smooth=True)

    @classmethod
    def boundary_layer(cls, epsilon):
        if epsilon <= 0:
            raise ValueError("boundary layer width must be positive")
        return cls(TargetKind.BOUNDARY_LAYER, epsilon=float(epsilon), smooth=True)

    @classmethod
    def custom(cls, func, smooth=True):
        """Wrap a vectorised evaluator ``func(x)``.

        With ``smooth=False`` the function must be affine on each element.
        """
        return cls(TargetKind.CUSTOM, func=func, smooth=bool(smooth))

    def __call__(self, x):
        """Evaluate at x-coordinates ``x``.

        Every target depends on the first coordinate only, so 2D callers
        pass ``points[..., 0]``.
        """
        xs = np.asarray(x, dtype=float)
        if self.kind is TargetKind.CUSTOM:
            return np.asarray(self.func(xs), dtype=float) + np.zeros_like(xs)
        if self.kind is TargetKind.CONSTANT_ONE:
            return np.ones_like(xs)
        if self.kind is TargetKind.SGN_X:
            return np.sign(xs)
        if self.kind is TargetKind.SINE_PERTURBED:
            return 1.0 + self.amplitude * np.sin(2.0 * math.pi * self.frequency * xs)
        eps = self.epsilon
        # (1 - exp(-(1-x)/eps)) / (1 - exp(-1/eps)), written to avoid overflow
        return -np.expm1(-(1.0 - xs) / eps) / -math.expm1(-1.0 / eps)

    def is_affine_on(self, mesh) -> bool:
        """Whether the target is affine on every element of ``mesh``."""
        if self.smooth:
            return False
        if self.kind is TargetKind.SGN_X:
            x = np.asarray(mesh.coordinates)[:, 0]
            cells = np.asarray(mesh.cells)
            lo, hi = x[cells].min(axis=1), x[cells].max(axis=1)
            return not np.any((lo < 0.0) & (hi > 0.0))
        return True

    def element_values(self, mesh) -> np.ndarray:
        """Per-element values at the element vertices, ``(ne, dim+1)``.

        The value at a vertex is the limit from inside the element, so a
        discontinuity located on a node gives different values on the two
        sides.  It is obtained from two interior samples,
        ``u(v) = 2 u((v + c)/2) - u(c)`` with ``c`` the centroid, which is
        exact whenever ``u`` is affine on the element.
        """
        xs = np.asarray(mesh.coordinates)[:, 0][np.asarray(mesh.cells)]
        if self.kind is TargetKind.CONSTANT_ONE:
            return np.ones(xs.shape)
        c = xs.mean(axis=1, keepdims=True)
        return 2.0 * self(0.5 * (xs + c)) - self(c)

    def describe(self) -> str:
        if self.kind is TargetKind.SINE_PERTURBED:
            return f"sine:{self.amplitude:g}:{self.frequency:g}"
        if self.kind is TargetKind.BOUNDARY_LAYER:
            return f"layer:{self.epsilon:g}"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class P1Space:
    """P1 space on ``mesh`` with the nodes in ``constrained`` held fixed."""

    mesh: object
    constrained: Mapping[int, float]
    problem: Optional[Problem] = None

    def __post_init__(self):
        n = self.mesh.num_vertices
        fixed = {int(k): float(v) for k, v in dict(self.constrained).items()}
        if any(k < 0 or k >= n for k in fixed):
            raise InvalidProblem("constrained node index out of range")
        object.__setattr__(self, "constrained", MappingProxyType(fixed))
        free = tuple(i for i in range(n) if i not in fixed)
        object.__setattr__(self, "free_nodes", free)
        index = np.full(n, -1, dtype=np.int64)
        index[list(free)] = np.arange(len(free))
        index.setflags(write=False)
        object.__setattr__(self, "_free_index", index)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def num_free(self) -> int:
        return len(self.free_nodes)

    @property
    def free_index(self) -> np.ndarray:
        """Map from node index to its position among free nodes, ``-1`` if fixed."""
        return self._free_index

    def lift(self, free_values=None) -> "FEFunction":
        """Full function from free-node values (zeros by default)."""
        coeffs = np.zeros(self.mesh.num_vertices)
        for k, v in self.constrained.items():
            coeffs[k] = v
        if free_values is not None:
            coeffs[list(self.free_nodes)] = np.asarray(free_values, dtype=float)
        return FEFunction(self, coeffs)

    def function(self, coeffs) -> "FEFunction":
        return FEFunction(self, coeffs)

    def interpolate(self, u: TargetFunction) -> "FEFunction":
        """Nodal interpolant of ``u`` on the free nodes."""
        vals = u(np.asarray(self.mesh.coordinates)[:, 0])
        return self.lift(vals[list(self.free_nodes)])

    def locate(self, point):
        """Element index and barycentric coordinates of ``point``.

        A point on a shared edge or node may belong to several elements; one
        of them is returned, and by continuity the choice does not affect
        function values.
        """
        coords = np.asarray(self.mesh.coordinates)
        cells = np.asarray(self.mesh.cells)
        if self.dim == 1:
            x = float(np.ravel(point)[0])
            xs = coords[:, 0]
            a, b = xs[0], xs[-1]
            span = b - a
            if x < a - BARYCENTRIC_TOL * span or x > b + BARYCENTRIC_TOL * span:
                raise OutOfDomain(f"x = {x} is outside [{a}, {b}]")
            e = int(np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(cells) - 1))
            lam1 = (x - xs[e]) / (xs[e + 1] - xs[e])
            return e, np.array([1.0 - lam1, lam1])
        p = np.asarray(point, dtype=float).reshape(2)
        tri = coords[cells]
        v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
        det = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v1[:, 1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0])
        l1 = ((p[0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (p[1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0])) / det
        l2 = ((v1[:, 0] - v0[:, 0]) * (p[1] - v0[:, 1]) - (v1[:, 1] - v0[:, 1]) * (p[0] - v0[:, 0])) / det
        lam = np.stack([1.0 - l1 - l2, l1, l2], axis=1)
        inside = np.all(lam >= -BARYCENTRIC_TOL, axis=1)
        hits = np.flatnonzero(inside)
        if hits.size == 0:
            raise OutOfDomain(f"point {tuple(p)} is outside the mesh")
        e = int(hits[0])
        return e, lam[e]

    def basis_values(self, point) -> np.ndarray:
        """All hat functions evaluated at ``point`` (length ``num_vertices``)."""
        e, lam = self.locate(point)
        out = np.zeros(self.mesh.num_vertices)
        out[np.asarray(self.mesh.cells)[e]] = lam
        return out


@dataclass(frozen=True, eq=False)
class FEFunction:
    """Nodal coefficients of a member of ``space`` (read-only)."""

    space: P1Space
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.space.mesh.num_vertices,):
            raise InvalidProblem(
                f"expected {self.space.mesh.num_vertices} coefficients, got shape {c.shape}")
        for k, v in self.space.constrained.items():
            if c[k] != v:
                raise InvalidProblem(f"coefficient of constrained node {k} must be {v}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def free_values(self) -> np.ndarray:
        return self.coeffs[list(self.space.free_nodes)]

    def with_free_values(self, values) -> "FEFunction":
        return self.space.lift(values)

    def __call__(self, point) -> float:
        return evaluate(self, point)

    def __eq__(self, other):
        return (isinstance(other, FEFunction) and other.space is self.space
                and np.array_equal(other.coeffs, self.coeffs))

    __hash__ = None


def _node_at(mesh, x, tol=1e-12):
    xs = np.asarray(mesh.coordinates)[:, 0]
    hit = np.flatnonzero(np.abs(xs - x) <= tol)
    if hit.size == 0:
        raise InvalidProblem(f"mesh has no node at x = {x}")
    return int(hit[0])


def build_space(mesh, problem) -> P1Space:
    """P1 space for one of the standard boundary-value settings.

    Parameters
    ----------
    mesh : Mesh1D or TriMesh
        Must match the problem's dimension.
    problem : Problem or str
        ``BOUNDARY_1D`` fixes ``u_h(0) = 1`` and ``u_h(1) = 0``; ``JUMP_1D``
        fixes ``u_h(-1) = -1`` and ``u_h(1) = 1``; ``BOUNDARY_2D`` fixes 1 on
        all inflow nodes and 0 on all outflow nodes.

    Returns
    -------
    P1Space

    Raises
    ------
    InvalidProblem
        If the mesh dimension is wrong or a constrained location is not a node.
    """
    problem = Problem(problem) if not isinstance(problem, Problem) else problem
    if problem is Problem.BOUNDARY_2D:
        if not isinstance(mesh, TriMesh):
            raise InvalidProblem("BOUNDARY_2D needs a triangle mesh")
        fixed = {}
        for i, m in enumerate(mesh.markers):
            if m == INFLOW:
                fixed[i] = 1.0
            elif m == OUTFLOW:
                fixed[i] = 0.0
        return P1Space(mesh, fixed, problem)
    if not isinstance(mesh, Mesh1D):
        raise InvalidProblem(f"{problem.name} needs an interval mesh")
    if problem is Problem.BOUNDARY_1D:
        fixed = {_node_at(mesh, 0.0): 1.0, _node_at(mesh, 1.0): 0.0}
    else:
        fixed = {_node_at(mesh, -1.0): -1.0, _node_at(mesh, 1.0): 1.0}
    return P1Space(mesh, fixed, problem)


def evaluate(f: FEFunction, point) -> float:
    """Value of ``f`` at ``point`` by barycentric interpolation.

    Raises
    ------
    OutOfDomain
        If ``point`` lies outside the mesh (beyond a 1e-12 tolerance).
    """
    e, lam = f.space.locate(point)
    nodes = np.asarray(f.space.mesh.cells)[e]
    return float(lam @ f.coeffs[nodes])


@dataclass(frozen=True)
class OvershootReport:
    max_over: float
    max_under: float
    worst_node: int

    @property
    def max_error(self) -> float:
        return max(self.max_over, self.max_under)


def nodal_overshoot(f: FEFunction, u: TargetFunction) -> OvershootReport:
    """Largest nodal excess ``f - u`` and deficit ``u - f`` over the free nodes.

    Constrained nodes are left out: at a node where the boundary condition
    disagrees with the target the error is prescribed, not approximated.
    ``worst_node`` is the node with the largest ``|f - u|``.
    """
    space = f.space
    nodes = np.array(space.free_nodes, dtype=int)
    if nodes.size == 0:
        return OvershootReport(0.0, 0.0, -1)
    uval = u(np.asarray(space.mesh.coordinates)[nodes, 0])
    diff = f.coeffs[nodes] - uval
    over = max(0.0, float(diff.max()))
    under = max(0.0, float((-diff).max()))
    worst = int(nodes[int(np.argmax(np.abs(diff)))])
    return OvershootReport(over, under, worst)
