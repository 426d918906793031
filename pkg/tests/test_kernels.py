"""Element kernels against independent quadrature oracles, for every backend."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from lqgibbs import kernels

BACKENDS = [kernels.python_backend]
if kernels.compiled_backend() is not None:
    BACKENDS.append(kernels.compiled_backend())

K = kernels.python_backend


def _ids(mods):
    return [m.BACKEND for m in mods]


def _g(s, kind, p, eps):
    s = mpmath.mpf(s)
    if kind == K.ODD_POW:
        return mpmath.sign(s) * abs(s) ** p if s != 0 else mpmath.mpf(0)
    if kind == K.EVEN_POW:
        return abs(s) ** p if s != 0 else mpmath.mpf(0)
    r2 = s * s + mpmath.mpf(eps) ** 2
    if kind == K.ODD_SMOOTH:
        return s * r2 ** (mpmath.mpf(p) / 2)
    return r2 ** (mpmath.mpf(p) / 2 - 1) * ((1 + p) * s * s + mpmath.mpf(eps) ** 2)


def _oracle(a, d, kind, p, eps, k):
    """Moment ``k`` by tanh-sinh quadrature after removing endpoint singularities.

    Every sub-interval that ends at a zero of ``s`` is halved and each half
    touching the zero is mapped by ``t = c + sign * w**m``, which turns
    ``|s|^p`` with ``p > -1`` into a bounded integrand.
    """
    with mpmath.workdps(30):
        a_, d_ = mpmath.mpf(a), mpmath.mpf(d)
        cuts = [mpmath.mpf(0), mpmath.mpf(1)]
        if d != 0 and 0 < -a / d < 1:
            cuts.insert(1, -a_ / d_)
        m = max(1, math.ceil(2.0 / (1.0 + p))) if p < 0 else 1

        def f(t):
            return _g(a_ + t * d_, kind, p, eps) * t ** k

        def zero_at(t):
            return abs(a_ + t * d_) <= mpmath.mpf(10) ** -25 * (abs(a_) + abs(d_))

        total = mpmath.mpf(0)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            mid = (lo + hi) / 2
            for c, e, sgn in ((lo, mid, 1), (hi, mid, -1)):
                L = abs(e - c)
                if zero_at(c) and m > 1:
                    # s vanishes at c, so s(c + v) = v d without cancellation
                    total += mpmath.quad(
                        lambda w: (_g(sgn * w ** m * d_, kind, p, eps)
                                   * (c + sgn * w ** m) ** k * m * w ** (m - 1)),
                        [0, L ** (1.0 / m)])
                else:
                    total += mpmath.quad(f, [min(c, e), max(c, e)])
        if eps > 0 and len(cuts) == 3:
            # the smoothed kernels vary on the scale eps around the zero
            tz, w = cuts[1], mpmath.mpf(eps) / abs(d_)
            pts = sorted({mpmath.mpf(0), mpmath.mpf(1), tz}
                         | {x for x in (tz - w, tz + w, tz - 10 * w, tz + 10 * w) if 0 < x < 1})
            total = mpmath.quad(f, pts)
        return float(total)


residual_pair = st.tuples(st.floats(-3, 3), st.floats(-3, 3))


@pytest.mark.parametrize("mod", BACKENDS, ids=_ids(BACKENDS))
@pytest.mark.parametrize("kind,p", [(K.ODD_POW, 0.5), (K.ODD_POW, 0.05), (K.ODD_POW, 2.0),
                                    (K.EVEN_POW, 1.5), (K.EVEN_POW, -0.5), (K.EVEN_POW, -0.9)])
@settings(max_examples=15)
@given(residual_pair)
def test_power_moments_match_mpmath(mod, kind, p, ad):
    a, b = ad
    d = b - a
    got = mod.moments(a, d, kind, p, 0.0)
    if a == 0.0 and d == 0.0 and p < 0.0:
        # |r|^p with r identically zero: the integral diverges
        assert all(g == math.inf for g in got)
        return
    for k in range(4):
        ref = _oracle(a, d, kind, p, 0.0, k)
        assert got[k] == pytest.approx(ref, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("mod", BACKENDS, ids=_ids(BACKENDS))
@pytest.mark.parametrize("kind", [K.ODD_SMOOTH, K.SMOOTH_DERIV])
@pytest.mark.parametrize("eps", [1e-2, 1e-6])
@settings(max_examples=10)
@given(residual_pair)
def test_smooth_moments_match_mpmath(mod, kind, eps, ad):
    a, b = ad
    d = b - a
    p = -0.6 if kind == K.SMOOTH_DERIV else 0.4
    got = mod.moments(a, d, kind, p, eps)
    for k in range(4):
        ref = _oracle(a, d, kind, p, eps, k)
        assert got[k] == pytest.approx(ref, rel=1e-9, abs=1e-11)


@pytest.mark.parametrize("mod", BACKENDS, ids=_ids(BACKENDS))
def test_exact_zero_residual(mod):
    assert list(mod.moments(0.0, 0.0, K.ODD_POW, 0.5)) == [0.0, 0.0, 0.0, 0.0]
    assert list(mod.moments(0.0, 0.0, K.EVEN_POW, 0.0)) == pytest.approx([1, 1 / 2, 1 / 3, 1 / 4])


def _gf(s, kind, p, eps):
    if kind == K.ODD_POW:
        return math.copysign(abs(s) ** p, s) if s != 0 else 0.0
    if kind == K.EVEN_POW:
        return abs(s) ** p if s != 0 else 0.0
    return s * (s * s + eps * eps) ** (p / 2)


def _tri_oracle(r, kind, p, eps, i, j=None):
    def integrand(y, x):
        lam = (1.0 - x - y, x, y)
        s = r[0] * lam[0] + r[1] * lam[1] + r[2] * lam[2]
        v = _gf(s, kind, p, eps) * lam[i]
        return v * lam[j] if j is not None else v
    val, _ = dblquad(integrand, 0.0, 1.0, 0.0, lambda x: 1.0 - x, epsabs=1e-12, epsrel=1e-11)
    return val


TRI_CASES = [
    ((0.3, -0.7, 0.5), K.ODD_POW, 0.5, 0.0),
    ((0.3, 0.1, 0.9), K.ODD_POW, 1.0, 0.0),
    ((1.0, -1.0, 0.0), K.EVEN_POW, 1.5, 0.0),
    ((-0.2, 0.4, 0.4), K.ODD_POW, 0.25, 0.0),
    ((0.3, -0.7, 0.5), K.ODD_SMOOTH, 0.3, 1e-2),
]


@pytest.mark.parametrize("mod", BACKENDS, ids=_ids(BACKENDS))
@pytest.mark.parametrize("r,kind,p,eps", TRI_CASES)
def test_triangle_integrals_match_dblquad(mod, r, kind, p, eps):
    area = 0.37
    vec, mat = mod.assemble_2d([area], [r], kind, p, eps)
    for i in range(3):
        assert vec[0, i] == pytest.approx(2 * area * _tri_oracle(r, kind, p, eps, i), rel=1e-7, abs=1e-10)
        for j in range(3):
            ref = 2 * area * _tri_oracle(r, kind, p, eps, i, j)
            assert mat[0, i, j] == pytest.approx(ref, rel=1e-7, abs=1e-10)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
@settings(max_examples=50)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.sampled_from([(K.ODD_POW, 0.3, 0.0), (K.EVEN_POW, -0.4, 0.0),
                        (K.ODD_SMOOTH, 0.2, 1e-4), (K.SMOOTH_DERIV, -0.8, 1e-4)]))
def test_backends_agree(r, case):
    kind, p, eps = case
    py, cy = BACKENDS
    v1, m1 = py.assemble_2d([0.5], [r], kind, p, eps)
    v2, m2 = cy.assemble_2d([0.5], [r], kind, p, eps)
    scale = max(1e-300, np.abs(v1).max(), np.abs(m1).max())
    assert np.abs(v1 - v2).max() <= 1e-13 * scale
    assert np.abs(m1 - m2).max() <= 1e-13 * scale
    w1, n1 = py.assemble_1d([0.3], [r[:2]], kind, p, eps)
    w2, n2 = cy.assemble_1d([0.3], [r[:2]], kind, p, eps)
    np.testing.assert_allclose(w2, w1, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(n2, n1, rtol=1e-13, atol=1e-300)


def test_backend_selection_reports_name():
    assert kernels.BACKEND in ("cython", "python")
    assert math.isfinite(kernels.moments(0.5, -1.0, kernels.ODD_POW, 0.5)[0])
