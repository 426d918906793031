"""Pure-Python element kernels (reference implementation and fallback).

All element integrals of an affine residual ``r`` reduce to the moments

    M_k = int_0^1 G(a + t*d) t^k dt,   k = 0..3,

where ``G`` is one of the kernels below.  Intervals give them directly; a
triangle is cut along the level line through its middle vertex into two
triangles whose base is a level line of ``r``, and each of those collapses
to the same 1D integral in the apex-to-base coordinate ``t``.

Kernels (``kind``):

* ``ODD_POW``      sgn(s)|s|^p
* ``EVEN_POW``     |s|^p
* ``ODD_SMOOTH``   s (s^2 + eps^2)^(p/2)
* ``SMOOTH_DERIV`` derivative of ``ODD_SMOOTH`` in ``s``

Power kernels (p > -1) use the exact antiderivative unless the piece stays
well away from ``s = 0``, where Gauss-Legendre is both exact to rounding and
better conditioned.  Smoothed kernels use Gauss panels graded geometrically
from ``s = 0`` outwards, starting at scale ``eps``.
"""
import math

import numpy as np

ODD_POW = 0
EVEN_POW = 1
ODD_SMOOTH = 2
SMOOTH_DERIV = 3

_X20, _W20 = np.polynomial.legendre.leggauss(20)
GL20 = [(0.5 * (x + 1.0), 0.5 * w) for x, w in zip(_X20, _W20)]
_X16, _W16 = np.polynomial.legendre.leggauss(16)
GL16 = [(0.5 * (x + 1.0), 0.5 * w) for x, w in zip(_X16, _W16)]

# pieces with min|s| >= SMOOTH_RATIO * max|s| are integrated by Gauss-Legendre
SMOOTH_RATIO = 0.25
_BINOM = ((1,), (1, 1), (1, 2, 1), (1, 3, 3, 1))

BACKEND = "python"


def kernel(s, kind, p, eps):
    if kind == ODD_POW:
        if s == 0.0:
            return 0.0
        return math.copysign(abs(s) ** p, s)
    if kind == EVEN_POW:
        if p == 0.0:
            return 1.0
        if s == 0.0:
            return 0.0 if p > 0.0 else math.inf
        return abs(s) ** p
    r2 = s * s + eps * eps
    if kind == ODD_SMOOTH:
        return s * r2 ** (0.5 * p)
    return r2 ** (0.5 * p - 1.0) * ((1.0 + p) * s * s + eps * eps)


def _gauss_piece(a, d, t0, t1, kind, p, eps, rule, out):
    L = t1 - t0
    for x, w in rule:
        t = t0 + L * x
        g = w * L * kernel(a + t * d, kind, p, eps)
        out[0] += g
        out[1] += g * t
        out[2] += g * t * t
        out[3] += g * t * t * t


def _exact_piece(a, d, s0, s1, kind, p, out):
    # substitute v = t - t_z with t_z = -a/d the zero of a + t*d
    tz = -a / d
    v0, v1 = s0 / d, s1 / d
    if v0 + v1 > 0:
        sign = (1.0 if d > 0 else -1.0) if kind == ODD_POW else 1.0
        flip = False
    else:
        sign = (-1.0 if d > 0 else 1.0) if kind == ODD_POW else 1.0
        flip = True
        v0, v1 = -v0, -v1
    scale = sign * abs(d) ** p
    I = []
    for j in range(4):
        e = p + j + 1.0
        if flip:
            val = (v0 ** e - v1 ** e) / e
            if j % 2:
                val = -val
        else:
            val = (v1 ** e - v0 ** e) / e
        I.append(scale * val)
    for k in range(4):
        acc = 0.0
        for j in range(k + 1):
            acc += _BINOM[k][j] * tz ** (k - j) * I[j]
        out[k] += acc


def _graded_piece(a, d, t0, t1, s0, s1, kind, p, eps, out):
    if d == 0.0:
        _gauss_piece(a, d, t0, t1, kind, p, eps, GL16, out)
        return
    sigma = 1.0 if s0 + s1 > 0 else -1.0
    lo, hi = sorted((abs(s0), abs(s1)))
    bounds = [lo]
    b = lo
    while True:
        nb = eps if b < eps else 2.0 * b
        if nb >= hi:
            break
        bounds.append(nb)
        b = nb
    bounds.append(hi)
    ts = [(sigma * bb - a) / d for bb in bounds]
    # snap the outer ends onto the piece to avoid rounding drift
    if abs(s0) <= abs(s1):
        ts[0], ts[-1] = t0, t1
    else:
        ts[0], ts[-1] = t1, t0
    for u, v in zip(ts[:-1], ts[1:]):
        if u > v:
            u, v = v, u
        if v > u:
            _gauss_piece(a, d, u, v, kind, p, eps, GL16, out)


def _piece(a, d, t0, t1, s0, s1, kind, p, eps, out):
    if t1 <= t0:
        return
    if kind >= ODD_SMOOTH:
        _graded_piece(a, d, t0, t1, s0, s1, kind, p, eps, out)
        return
    m, M = sorted((abs(s0), abs(s1)))
    if M == 0.0:
        g = kernel(0.0, kind, p, eps)
        if g != 0.0:
            for k in range(4):
                out[k] += g * (t1 ** (k + 1) - t0 ** (k + 1)) / (k + 1)
        return
    if m >= SMOOTH_RATIO * M:
        _gauss_piece(a, d, t0, t1, kind, p, eps, GL20, out)
    else:
        _exact_piece(a, d, s0, s1, kind, p, out)


def moments(a, d, kind, p, eps=0.0):
    """``[M_0, M_1, M_2, M_3]`` for ``G(a + t d)`` on ``[0, 1]``."""
    out = [0.0, 0.0, 0.0, 0.0]
    b = a + d
    if (a > 0.0 and b < 0.0) or (a < 0.0 and b > 0.0):
        tc = -a / d
        _piece(a, d, 0.0, tc, a, 0.0, kind, p, eps, out)
        _piece(a, d, tc, 1.0, 0.0, b, kind, p, eps, out)
    else:
        _piece(a, d, 0.0, 1.0, a, b, kind, p, eps, out)
    return out


def assemble_1d(lengths, rvals, kind, p, eps=0.0, want_matrix=True):
    """Per-interval ``int G(r) phi_i`` (ne, 2) and ``int G(r) phi_i phi_j`` (ne, 2, 2)."""
    lengths = np.asarray(lengths, dtype=float)
    rvals = np.asarray(rvals, dtype=float)
    ne = lengths.shape[0]
    vec = np.zeros((ne, 2))
    mat = np.zeros((ne, 2, 2)) if want_matrix else None
    for e in range(ne):
        h = lengths[e]
        r0, r1 = rvals[e]
        M0, M1, M2, M3 = moments(r0, r1 - r0, kind, p, eps)
        vec[e, 0] = h * (M0 - M1)
        vec[e, 1] = h * M1
        if want_matrix:
            mat[e, 0, 0] = h * (M0 - 2.0 * M1 + M2)
            mat[e, 0, 1] = mat[e, 1, 0] = h * (M1 - M2)
            mat[e, 1, 1] = h * M2
    return vec, mat


def assemble_2d(areas, rvals, kind, p, eps=0.0, want_matrix=True):
    """Per-triangle ``int G(r) lambda_i`` (ne, 3) and ``int G(r) lambda_i lambda_j`` (ne, 3, 3)."""
    areas = np.asarray(areas, dtype=float)
    rvals = np.asarray(rvals, dtype=float)
    ne = areas.shape[0]
    vec = np.zeros((ne, 3))
    mat = np.zeros((ne, 3, 3)) if want_matrix else None
    for e in range(ne):
        r = rvals[e]
        lo, mid, hi = sorted(range(3), key=lambda i: r[i])
        span = r[hi] - r[lo]
        lam = (r[mid] - r[lo]) / span if span > 0.0 else 0.0
        bm = [0.0, 0.0, 0.0]
        bm[lo] += 1.0 - lam
        bm[hi] += lam
        beta = [0.5 * bm[i] for i in range(3)]
        beta[mid] += 0.5
        delta = [-bm[i] for i in range(3)]
        delta[mid] += 1.0
        for apex, sub_area in ((lo, lam * areas[e]), (hi, (1.0 - lam) * areas[e])):
            if sub_area <= 0.0:
                continue
            M0, M1, M2, M3 = moments(r[apex], r[mid] - r[apex], kind, p, eps)
            c = 2.0 * sub_area
            for i in range(3):
                ai = 1.0 if i == apex else 0.0
                vec[e, i] += c * (ai * (M1 - M2) + beta[i] * M2)
                if want_matrix:
                    for j in range(i, 3):
                        aj = 1.0 if j == apex else 0.0
                        v = c * (
                            ai * aj * (M1 - 2.0 * M2 + M3)
                            + (ai * beta[j] + aj * beta[i]) * (M2 - M3)
                            + (beta[i] * beta[j] + delta[i] * delta[j] / 12.0) * M3
                        )
                        mat[e, i, j] += v
                        if j != i:
                            mat[e, j, i] += v
    return vec, mat
