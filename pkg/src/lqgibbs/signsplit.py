"""Integrals whose integrand depends on the sign of the residual ``r = u - u_h``.

Two regimes are supported.

*Affine mode.*  When the target is affine on every element, so is ``r``.
Element integrals of ``G(r) phi_i`` and ``G'(r) phi_i phi_j`` are then
evaluated by the compiled (or pure-Python) kernels in :mod:`lqgibbs.kernels`,
which integrate exactly across the level line ``r = 0``.

*Smooth mode* (interval meshes only).  For a general target the zeros of
``r`` are located per element by sampling and bisection, and each piece
between zeros is integrated with Gauss panels graded geometrically towards
the zeros, where ``|r|^(q-1)`` loses smoothness.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import kernels
from .errors import Unsupported
from .fespace import FEFunction, P1Space, TargetFunction

ZERO_REL_TOL = 1e-10
ROUNDING_REL_TOL = 16 * np.finfo(float).eps

# smooth-mode quadrature parameters
_SAMPLES = 65
_GRADING = 0.15
_LEVELS = 16
_SMOOTH_PANELS = 4
_GX, _GW = np.polynomial.legendre.leggauss(16)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW


class Sign(enum.IntEnum):
    NEG = -1
    ZERO = 0
    POS = 1


@dataclass(frozen=True)
class SubRegion:
    """A piece of one element on which ``r`` has a fixed sign.

    ``points`` are the vertices (an interval's two endpoints, or a convex
    polygon in counter-clockwise order), shape ``(k, dim)``.
    """

    sign: Sign
    points: np.ndarray

    @property
    def measure(self) -> float:
        p = self.points
        if p.shape[1] == 1:
            return float(abs(p[1, 0] - p[0, 0]))
        x, y = p[:, 0], p[:, 1]
        return float(0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    @property
    def centroid(self) -> np.ndarray:
        p = self.points
        if p.shape[1] == 1:
            return p.mean(axis=0)
        # area-weighted centroid of a fan triangulation from vertex 0
        acc = np.zeros(2)
        total = 0.0
        for k in range(1, len(p) - 1):
            a, b, c = p[0], p[k], p[k + 1]
            area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            acc += area * (a + b + c) / 3.0
            total += area
        return acc / total


@dataclass(frozen=True)
class SignPartition:
    """Sub-regions of every element, indexed like the mesh cells."""

    regions: Tuple[Tuple[SubRegion, ...], ...]

    def __len__(self):
        return len(self.regions)

    def __getitem__(self, e):
        return self.regions[e]

    def measure(self, sign=None) -> float:
        return sum(r.measure for rs in self.regions for r in rs
                   if sign is None or r.sign == sign)

    def zero_elements(self):
        """Indices of elements on which ``r`` vanishes identically."""
        return [e for e, rs in enumerate(self.regions)
                if any(r.sign == Sign.ZERO for r in rs)]


def zero_tolerance(u_values) -> float:
    """Absolute threshold below which an element residual counts as zero."""
    return ZERO_REL_TOL * (1.0 + float(np.max(np.abs(u_values), initial=0.0)))


def _clip(points, values, keep_sign):
    """Part of a convex polygon where ``keep_sign * r >= 0`` (r affine)."""
    out = []
    n = len(points)
    for k in range(n):
        p, q = points[k], points[(k + 1) % n]
        rp, rq = keep_sign * values[k], keep_sign * values[(k + 1) % n]
        if rp >= 0.0:
            out.append(p)
        if (rp > 0.0 and rq < 0.0) or (rp < 0.0 and rq > 0.0):
            t = rp / (rp - rq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.zeros((0, points.shape[1]))


def partition_element(points, rvals, tol: float = 0.0) -> Tuple[SubRegion, ...]:
    """Split one element by the sign of an affine residual.

    Parameters
    ----------
    points : array_like, shape (dim+1, dim)
        Element vertices (counter-clockwise for triangles).
    rvals : array_like, shape (dim+1,)
        Residual at the vertices.
    tol : float
        If every ``|rvals|`` is at most ``tol`` the whole element is a single
        ``ZERO`` region.

    Returns
    -------
    tuple of SubRegion
        Regions with positive measure only; at most one ``POS`` and one
        ``NEG`` region, separated by the line (or point) ``r = 0``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    r = np.asarray(rvals, dtype=float)
    if np.max(np.abs(r)) <= tol:
        return (SubRegion(Sign.ZERO, pts.copy()),)
    if pts.shape[1] == 1:
        x0, x1 = pts[0, 0], pts[1, 0]
        if r[0] * r[1] < 0.0:
            xc = x0 + r[0] / (r[0] - r[1]) * (x1 - x0)
            return (SubRegion(Sign(int(np.sign(r[0]))), np.array([[x0], [xc]])),
                    SubRegion(Sign(int(np.sign(r[1]))), np.array([[xc], [x1]])))
        s = Sign.POS if r.sum() > 0 else Sign.NEG
        return (SubRegion(s, pts.copy()),)
    out = []
    for s in (Sign.POS, Sign.NEG):
        poly = _clip(pts, r, int(s))
        if len(poly) >= 3:
            reg = SubRegion(s, poly)
            if reg.measure > 0.0:
                out.append(reg)
    return tuple(out)


# ------------------------------------------------------------ affine residual

def _element_points(mesh):
    return np.asarray(mesh.coordinates)[np.asarray(mesh.cells)]


def residual_values(f: FEFunction, u: TargetFunction) -> np.ndarray:
    """Per-element vertex values of ``r = u - u_h``, shape ``(ne, dim+1)``.

    Only meaningful when ``u`` is affine on every element.
    """
    mesh = f.space.mesh
    return u.element_values(mesh) - f.coeffs[np.asarray(mesh.cells)]


def _snap(rvals, uvals, rel_tol):
    tol = rel_tol * (1.0 + float(np.max(np.abs(uvals), initial=0.0)))
    out = rvals.copy()
    out[np.max(np.abs(rvals), axis=1) <= tol] = 0.0
    return out


def partition(f: FEFunction, u: TargetFunction, tol=None) -> SignPartition:
    """Sign partition of the residual over the whole mesh (affine targets).

    ``tol`` defaults to ``1e-10 * (1 + max|u|)``.
    """
    mesh = f.space.mesh
    if not u.is_affine_on(mesh):
        raise Unsupported("sign partitions need a target that is affine per element")
    uvals = u.element_values(mesh)
    rv = uvals - f.coeffs[np.asarray(mesh.cells)]
    if tol is None:
        tol = zero_tolerance(uvals)
    pts = _element_points(mesh)
    return SignPartition(tuple(partition_element(pts[e], rv[e], tol) for e in range(len(rv))))


def integrate_signed_power(points, rvals, local_index: int, q: float) -> float:
    """``int_K sgn(r) |r|^(q-1) phi`` on one element with affine ``r``.

    ``phi`` is the hat function of local vertex ``local_index``.  For
    ``q = 1`` the integrand is ``sgn(r) phi``, with ``sgn(0) = 0``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    r = np.asarray(rvals, dtype=float)[None, :]
    if pts.shape[1] == 1:
        vec, _ = kernels.assemble_1d([abs(pts[1, 0] - pts[0, 0])], r, kernels.ODD_POW,
                                     q - 1.0, 0.0, False)
    else:
        e1, e2 = pts[1] - pts[0], pts[2] - pts[0]
        area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        vec, _ = kernels.assemble_2d([area], r, kernels.ODD_POW, q - 1.0, 0.0, False)
    return float(vec[0, local_index])


def _kinds(q, eps):
    """Kernel kinds/exponents for residual and Jacobian, plus Jacobian scale."""
    if eps > 0.0:
        return kernels.ODD_SMOOTH, kernels.SMOOTH_DERIV, q - 2.0, 1.0
    return kernels.ODD_POW, kernels.EVEN_POW, q - 1.0, q - 1.0


def _scatter(space: P1Space, vec, mat):
    cells = np.asarray(space.mesh.cells)
    fi = space.free_index[cells]
    nf = space.num_free
    mask = fi >= 0
    F = np.bincount(fi[mask], weights=vec[mask], minlength=nf)
    if mat is None:
        return F, None
    pair = mask[:, :, None] & mask[:, None, :]
    flat = (fi[:, :, None] * nf + fi[:, None, :])[pair]
    J = np.bincount(flat, weights=mat[pair], minlength=nf * nf).reshape(nf, nf)
    return F, J


def assemble(f: FEFunction, u: TargetFunction, q: float, eps: float = 0.0,
             jacobian: bool = True):
    """Optimality residual and its Jacobian with respect to the free values.

    Parameters
    ----------
    f : FEFunction
        Current approximation ``u_h``.
    u : TargetFunction
    q : float
        Exponent, ``q >= 1``.
    eps : float
        Smoothing width.  With ``eps > 0`` the kernel ``sgn(r)|r|^(q-1)`` is
        replaced by ``r (r^2 + eps^2)^((q-2)/2)``.
    jacobian : bool
        Also return the Jacobian.

    Returns
    -------
    F : ndarray, shape (num_free,)
        ``F_i = int G(u - u_h) phi_i`` over free nodes ``i``.
    J : ndarray, shape (num_free, num_free) or None
        ``dF_i / dc_j = -int G'(u - u_h) phi_i phi_j``.
    """
    space = f.space
    mesh = space.mesh
    rkind, jkind, p, jscale = _kinds(q, eps)
    if u.is_affine_on(mesh):
        uvals = u.element_values(mesh)
        rv = uvals - f.coeffs[np.asarray(mesh.cells)]
        if q == 1.0 and eps == 0.0:
            rv = _snap(rv, uvals, ZERO_REL_TOL)
        elif q < 2.0 and eps == 0.0:
            # the exact kernel is not Lipschitz at r = 0 for q < 2, so an
            # element residual that is pure rounding noise would dominate F
            rv = _snap(rv, uvals, ROUNDING_REL_TOL)
        if mesh.dim == 1:
            vec, _ = kernels.assemble_1d(mesh.measures, rv, rkind, p, eps, False)
            mat = kernels.assemble_1d(mesh.measures, rv, jkind, q - 2.0, eps, True)[1] if jacobian else None
        else:
            vec, _ = kernels.assemble_2d(mesh.measures, rv, rkind, p, eps, False)
            mat = kernels.assemble_2d(mesh.measures, rv, jkind, q - 2.0, eps, True)[1] if jacobian else None
    else:
        if mesh.dim != 1:
            raise Unsupported("non-affine targets are only supported on interval meshes")
        vec, mat = _smooth_assemble(f, u, rkind, p, eps, jkind if jacobian else None, q - 2.0)
    if mat is not None:
        mat = -jscale * mat
    return _scatter(space, vec, mat)


def residual_vector(f: FEFunction, u: TargetFunction, q: float, eps: float = 0.0) -> np.ndarray:
    """``F_i = int sgn(u - u_h)|u - u_h|^(q-1) phi_i`` for every free node ``i``."""
    return assemble(f, u, q, eps, jacobian=False)[0]


def jacobian(f: FEFunction, u: TargetFunction, q: float, eps: float = 0.0) -> np.ndarray:
    """Derivative of :func:`residual_vector` with respect to the free values."""
    return assemble(f, u, q, eps, jacobian=True)[1]


def lq_error(f: FEFunction, u: TargetFunction, q: float) -> float:
    """``||u - u_h||_{L^q}``."""
    mesh = f.space.mesh
    if u.is_affine_on(mesh):
        rv = residual_values(f, u)
        assemble_fn = kernels.assemble_1d if mesh.dim == 1 else kernels.assemble_2d
        vec, _ = assemble_fn(mesh.measures, rv, kernels.EVEN_POW, float(q), 0.0, False)
        total = float(vec.sum())
    else:
        if mesh.dim != 1:
            raise Unsupported("non-affine targets are only supported on interval meshes")
        vec, _ = _smooth_assemble(f, u, kernels.EVEN_POW, float(q), 0.0, None, 0.0)
        total = float(vec.sum())
    return total ** (1.0 / q)


# ---------------------------------------------------------- smooth-target mode

def _np_kernel(s, kind, p, eps):
    if kind == kernels.ODD_POW:
        return np.sign(s) * np.abs(s) ** p
    if kind == kernels.EVEN_POW:
        if p == 0.0:
            return np.ones_like(s)
        if p < 0.0:
            # an exact zero at a quadrature node is a point of measure zero
            a = np.abs(s)
            return np.where(a > 0.0, np.power(np.where(a > 0.0, a, 1.0), p), 0.0)
        return np.abs(s) ** p
    r2 = s * s + eps * eps
    if kind == kernels.ODD_SMOOTH:
        return s * r2 ** (0.5 * p)
    return r2 ** (0.5 * p - 1.0) * ((1.0 + p) * s * s + eps * eps)


def _residual_fn(f: FEFunction, u: TargetFunction):
    xs = np.asarray(f.space.mesh.coordinates)[:, 0]
    c = f.coeffs

    def r(x, e):
        x0, x1 = xs[e], xs[e + 1]
        t = (x - x0) / (x1 - x0)
        return u(x) - (c[e] * (1.0 - t) + c[e + 1] * t)

    return r


def _find_breaks(r, xs):
    """Per element, sorted interior points where ``r`` changes sign."""
    ne = len(xs) - 1
    t = np.linspace(0.0, 1.0, _SAMPLES)
    e_idx = np.repeat(np.arange(ne), _SAMPLES).reshape(ne, _SAMPLES)
    X = xs[:-1, None] + (xs[1:] - xs[:-1])[:, None] * t[None, :]
    R = r(X, e_idx)
    breaks = [[] for _ in range(ne)]
    # exact zeros at interior samples
    ze, zk = np.nonzero(R[:, 1:-1] == 0.0)
    for e, k in zip(ze, zk):
        breaks[e].append(X[e, k + 1])
    be, bk = np.nonzero(R[:, :-1] * R[:, 1:] < 0.0)
    if be.size:
        lo, hi = X[be, bk].copy(), X[be, bk + 1].copy()
        rlo = R[be, bk].copy()
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            rm = r(mid, be)
            left = np.sign(rm) == np.sign(rlo)
            lo = np.where(left, mid, lo)
            rlo = np.where(left, rm, rlo)
            hi = np.where(left, hi, mid)
            if np.all(hi - lo <= 1e-14 * np.maximum(1.0, np.abs(lo))):
                break
        for e, xb in zip(be, 0.5 * (lo + hi)):
            breaks[e].append(xb)
    return [sorted(b) for b in breaks]


def _graded_panels(a, b, toward_a, toward_b):
    """Panel boundaries on ``[a, b]`` refined geometrically towards flagged ends."""
    m = 0.5 * (a + b)
    sig = _GRADING ** np.arange(_LEVELS, -1, -1)
    uniform = np.linspace(0.0, 1.0, _SMOOTH_PANELS // 2 + 1)
    left = a + (m - a) * (np.concatenate([[0.0], sig]) if toward_a else uniform)
    right = b - (b - m) * (np.concatenate([[0.0], sig]) if toward_b else uniform)
    return np.concatenate([left, right[::-1][1:]])


def _smooth_assemble(f, u, rkind, p, eps, jkind, jp):
    xs = np.asarray(f.space.mesh.coordinates)[:, 0]
    ne = len(xs) - 1
    r = _residual_fn(f, u)
    breaks = _find_breaks(r, xs)
    starts, ends, owner = [], [], []
    for e in range(ne):
        pts = [xs[e]] + breaks[e] + [xs[e + 1]]
        for k in range(len(pts) - 1):
            bnd = _graded_panels(pts[k], pts[k + 1], k > 0, k < len(pts) - 2)
            starts.append(bnd[:-1])
            ends.append(bnd[1:])
            owner.append(np.full(len(bnd) - 1, e))
    s0 = np.concatenate(starts)
    s1 = np.concatenate(ends)
    own = np.concatenate(owner)
    keep = s1 > s0
    s0, s1, own = s0[keep], s1[keep], own[keep]
    L = (s1 - s0)[:, None]
    X = s0[:, None] + L * _GX[None, :]
    W = L * _GW[None, :]
    E = np.broadcast_to(own[:, None], X.shape)
    h = (xs[1:] - xs[:-1])[E]
    phi1 = (X - xs[:-1][E]) / h
    phi0 = 1.0 - phi1
    R = r(X, E)
    flat = E.ravel()
    g = W * _np_kernel(R, rkind, p, eps)
    vec = np.stack([np.bincount(flat, (g * phi0).ravel(), ne),
                    np.bincount(flat, (g * phi1).ravel(), ne)], axis=1)
    if jkind is None:
        return vec, None
    gj = W * _np_kernel(R, jkind, jp, eps)
    m00 = np.bincount(flat, (gj * phi0 * phi0).ravel(), ne)
    m01 = np.bincount(flat, (gj * phi0 * phi1).ravel(), ne)
    m11 = np.bincount(flat, (gj * phi1 * phi1).ravel(), ne)
    mat = np.stack([np.stack([m00, m01], axis=1), np.stack([m01, m11], axis=1)], axis=1)
    return vec, mat
