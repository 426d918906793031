# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as ``_kernels_py``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, copysign, fabs, pow

cnp.import_array()

ODD_POW = 0
EVEN_POW = 1
ODD_SMOOTH = 2
SMOOTH_DERIV = 3
BACKEND = "cython"

cdef double SMOOTH_RATIO = 0.25
cdef double GX20[20]
cdef double GW20[20]
cdef double GX16[16]
cdef double GW16[16]

_x, _w = np.polynomial.legendre.leggauss(20)
for _i in range(20):
    GX20[_i] = 0.5 * (_x[_i] + 1.0)
    GW20[_i] = 0.5 * _w[_i]
_x, _w = np.polynomial.legendre.leggauss(16)
for _i in range(16):
    GX16[_i] = 0.5 * (_x[_i] + 1.0)
    GW16[_i] = 0.5 * _w[_i]


cdef inline double _kernel(double s, int kind, double p, double eps) noexcept nogil:
    cdef double r2
    if kind == 0:
        if s == 0.0:
            return 0.0
        return copysign(pow(fabs(s), p), s)
    if kind == 1:
        if p == 0.0:
            return 1.0
        if s == 0.0:
            return 0.0 if p > 0.0 else INFINITY
        return pow(fabs(s), p)
    r2 = s * s + eps * eps
    if kind == 2:
        return s * pow(r2, 0.5 * p)
    return pow(r2, 0.5 * p - 1.0) * ((1.0 + p) * s * s + eps * eps)


cdef void _gauss_piece(double a, double d, double t0, double t1, int kind, double p,
                       double eps, int n20, double* out) noexcept nogil:
    cdef double L = t1 - t0
    cdef double t, g
    cdef int i, n = 20 if n20 else 16
    for i in range(n):
        if n20:
            t = t0 + L * GX20[i]
            g = GW20[i] * L * _kernel(a + t * d, kind, p, eps)
        else:
            t = t0 + L * GX16[i]
            g = GW16[i] * L * _kernel(a + t * d, kind, p, eps)
        out[0] += g
        out[1] += g * t
        out[2] += g * t * t
        out[3] += g * t * t * t


cdef void _exact_piece(double a, double d, double s0, double s1, int kind, double p,
                       double* out) noexcept nogil:
    cdef double tz = -a / d
    cdef double v0 = s0 / d
    cdef double v1 = s1 / d
    cdef double sign, scale, e, val
    cdef double I[4]
    cdef double tzp[4]
    cdef bint flip
    cdef int j
    if v0 + v1 > 0:
        flip = False
        sign = (1.0 if d > 0 else -1.0) if kind == 0 else 1.0
    else:
        flip = True
        sign = (-1.0 if d > 0 else 1.0) if kind == 0 else 1.0
        v0 = -v0
        v1 = -v1
    scale = sign * pow(fabs(d), p)
    for j in range(4):
        e = p + j + 1.0
        if flip:
            val = (pow(v0, e) - pow(v1, e)) / e
            if j % 2:
                val = -val
        else:
            val = (pow(v1, e) - pow(v0, e)) / e
        I[j] = scale * val
    tzp[0] = 1.0
    tzp[1] = tz
    tzp[2] = tz * tz
    tzp[3] = tz * tz * tz
    out[0] += I[0]
    out[1] += tzp[1] * I[0] + I[1]
    out[2] += tzp[2] * I[0] + 2.0 * tzp[1] * I[1] + I[2]
    out[3] += tzp[3] * I[0] + 3.0 * tzp[2] * I[1] + 3.0 * tzp[1] * I[2] + I[3]


cdef void _graded_piece(double a, double d, double t0, double t1, double s0, double s1,
                        int kind, double p, double eps, double* out) noexcept nogil:
    cdef double sigma, lo, hi, b, nb, u, v, tprev, tnext
    cdef bint forward
    if d == 0.0:
        _gauss_piece(a, d, t0, t1, kind, p, eps, 0, out)
        return
    sigma = 1.0 if s0 + s1 > 0 else -1.0
    if fabs(s0) <= fabs(s1):
        lo = fabs(s0)
        hi = fabs(s1)
        forward = True
        tprev = t0
    else:
        lo = fabs(s1)
        hi = fabs(s0)
        forward = False
        tprev = t1
    b = lo
    while True:
        nb = eps if b < eps else 2.0 * b
        if nb >= hi:
            break
        tnext = (sigma * nb - a) / d
        u = tprev if tprev < tnext else tnext
        v = tnext if tprev < tnext else tprev
        if v > u:
            _gauss_piece(a, d, u, v, kind, p, eps, 0, out)
        tprev = tnext
        b = nb
    tnext = t1 if forward else t0
    u = tprev if tprev < tnext else tnext
    v = tnext if tprev < tnext else tprev
    if v > u:
        _gauss_piece(a, d, u, v, kind, p, eps, 0, out)


cdef void _piece(double a, double d, double t0, double t1, double s0, double s1,
                 int kind, double p, double eps, double* out) noexcept nogil:
    cdef double m, M, g
    cdef int k
    if t1 <= t0:
        return
    if kind >= 2:
        _graded_piece(a, d, t0, t1, s0, s1, kind, p, eps, out)
        return
    m = fabs(s0)
    M = fabs(s1)
    if m > M:
        m, M = M, m
    if M == 0.0:
        g = _kernel(0.0, kind, p, eps)
        if g != 0.0:
            for k in range(4):
                out[k] += g * (pow(t1, k + 1) - pow(t0, k + 1)) / (k + 1)
        return
    if m >= SMOOTH_RATIO * M:
        _gauss_piece(a, d, t0, t1, kind, p, eps, 1, out)
    else:
        _exact_piece(a, d, s0, s1, kind, p, out)


cdef void _moments(double a, double d, int kind, double p, double eps, double* out) noexcept nogil:
    cdef double b = a + d
    cdef double tc
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    out[3] = 0.0
    if (a > 0.0 and b < 0.0) or (a < 0.0 and b > 0.0):
        tc = -a / d
        _piece(a, d, 0.0, tc, a, 0.0, kind, p, eps, out)
        _piece(a, d, tc, 1.0, 0.0, b, kind, p, eps, out)
    else:
        _piece(a, d, 0.0, 1.0, a, b, kind, p, eps, out)


def moments(double a, double d, int kind, double p, double eps=0.0):
    cdef double out[4]
    _moments(a, d, kind, p, eps, out)
    return [out[0], out[1], out[2], out[3]]


def assemble_1d(lengths, rvals, int kind, double p, double eps=0.0, bint want_matrix=True):
    cdef double[::1] h = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(rvals, dtype=np.float64)
    cdef Py_ssize_t ne = h.shape[0], e
    vec_arr = np.zeros((ne, 2))
    mat_arr = np.zeros((ne, 2, 2)) if want_matrix else None
    cdef double[:, ::1] vec = vec_arr
    cdef double[:, :, ::1] mat
    if want_matrix:
        mat = mat_arr
    cdef double M[4]
    with nogil:
        for e in range(ne):
            _moments(r[e, 0], r[e, 1] - r[e, 0], kind, p, eps, M)
            vec[e, 0] = h[e] * (M[0] - M[1])
            vec[e, 1] = h[e] * M[1]
            if want_matrix:
                mat[e, 0, 0] = h[e] * (M[0] - 2.0 * M[1] + M[2])
                mat[e, 0, 1] = h[e] * (M[1] - M[2])
                mat[e, 1, 0] = mat[e, 0, 1]
                mat[e, 1, 1] = h[e] * M[2]
    return vec_arr, mat_arr


def assemble_2d(areas, rvals, int kind, double p, double eps=0.0, bint want_matrix=True):
    cdef double[::1] A = np.ascontiguousarray(areas, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(rvals, dtype=np.float64)
    cdef Py_ssize_t ne = A.shape[0], e
    vec_arr = np.zeros((ne, 3))
    mat_arr = np.zeros((ne, 3, 3)) if want_matrix else None
    cdef double[:, ::1] vec = vec_arr
    cdef double[:, :, ::1] mat
    if want_matrix:
        mat = mat_arr
    cdef double M[4]
    cdef double bm[3]
    cdef double beta[3]
    cdef double delta[3]
    cdef int lo, mid, hi, i, j, s, apex, tmp
    cdef double span, lam, sub_area, c, ai, aj, v
    with nogil:
        for e in range(ne):
            # stable sort of three vertex indices by residual value
            lo = 0
            mid = 1
            hi = 2
            if r[e, mid] < r[e, lo]:
                tmp = lo; lo = mid; mid = tmp
            if r[e, hi] < r[e, mid]:
                tmp = mid; mid = hi; hi = tmp
                if r[e, mid] < r[e, lo]:
                    tmp = lo; lo = mid; mid = tmp
            span = r[e, hi] - r[e, lo]
            lam = (r[e, mid] - r[e, lo]) / span if span > 0.0 else 0.0
            for i in range(3):
                bm[i] = 0.0
            bm[lo] += 1.0 - lam
            bm[hi] += lam
            for i in range(3):
                beta[i] = 0.5 * bm[i]
                delta[i] = -bm[i]
            beta[mid] += 0.5
            delta[mid] += 1.0
            for s in range(2):
                if s == 0:
                    apex = lo
                    sub_area = lam * A[e]
                else:
                    apex = hi
                    sub_area = (1.0 - lam) * A[e]
                if sub_area <= 0.0:
                    continue
                _moments(r[e, apex], r[e, mid] - r[e, apex], kind, p, eps, M)
                c = 2.0 * sub_area
                for i in range(3):
                    ai = 1.0 if i == apex else 0.0
                    vec[e, i] += c * (ai * (M[1] - M[2]) + beta[i] * M[2])
                    if want_matrix:
                        for j in range(i, 3):
                            aj = 1.0 if j == apex else 0.0
                            v = c * (ai * aj * (M[1] - 2.0 * M[2] + M[3])
                                     + (ai * beta[j] + aj * beta[i]) * (M[2] - M[3])
                                     + (beta[i] * beta[j] + delta[i] * delta[j] / 12.0) * M[3])
                            mat[e, i, j] += v
                            if j != i:
                                mat[e, j, i] += v
    return vec_arr, mat_arr
