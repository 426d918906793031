"""Acceptance checks, one per criterion, each printing a single PASS/FAIL line.

Run under pytest (lines are printed even with output capture on) or
directly with ``python3 tests/test_acceptance.py``.
"""
import math

import numpy as np
import pytest
import scipy.linalg

from lqgibbs.certify import CertVerdict, certify_family_jump, certify_l1, verify_witness
from lqgibbs.experiments import reproduce
from lqgibbs.fespace import Problem, TargetFunction, build_space
from lqgibbs.mesh import Pattern, criss_cross_mesh, interval_mesh, jump_mesh, structured_square_mesh
from lqgibbs.signsplit import assemble, partition, residual_vector
from lqgibbs.solver import SolverOptions, solve_l2, solve_lq
from lqgibbs.theory import (alpha_mesh1_l1, alpha_mesh1_lq, alpha_mesh2_l1,
                            alpha_two_element_l1, alpha_two_element_lq, jump_family,
                            theta_schedule)

ONE = TargetFunction.constant_one()
SGN = TargetFunction.sgn_x()


def _check(results):
    """``results`` is a list of ``(label, value, expected, tol)``."""
    bad = [(lab, v, e, t) for lab, v, e, t in results if not abs(v - e) <= t]
    worst = max(results, key=lambda r: abs(r[1] - r[2]) / r[3])
    detail = f"worst {worst[0]}={worst[1]:.10g} vs {worst[2]:.10g} (tol {worst[3]:g})"
    if bad:
        detail = "; ".join(f"{lab}={v:.10g} expected {e:.10g}+-{t:g}" for lab, v, e, t in bad)
    return not bad, detail


# ------------------------------------------------------------------ criteria

def criterion_1():
    return _check([
        ("alpha_mesh1_l1", alpha_mesh1_l1(), 1.3200, 5e-4),
        ("alpha_mesh2_l1", alpha_mesh2_l1(), 1.2723, 5e-4),
        ("alpha_mesh1_lq(2)", alpha_mesh1_lq(2.0), 1.5, 1e-10),
    ])


def _brute_force_l2_alpha(h, step=1e-5):
    """Grid minimiser of the exact L^2 error on the two-element mesh."""
    alpha = np.arange(1.0, 2.0 + step / 2, step)
    a = 1.0 - alpha          # residual at the free node; 0 at x = 0 and 1 at x = 1
    err = (1.0 - h) * a * a / 3.0 + h * (a * a + a + 1.0) / 3.0
    return float(alpha[np.argmin(err)])


def criterion_2():
    brute = _brute_force_l2_alpha(0.5)
    return _check([
        ("alpha_two_element_l1(0.75)", alpha_two_element_l1(0.75), math.sqrt(1.5), 1e-12),
        ("alpha_two_element_lq(0.5,2)", alpha_two_element_lq(0.5, 2.0), 1.25, 1e-10),
        ("brute-force L2 line search", brute, alpha_two_element_lq(0.5, 2.0), 1e-5),
    ])


def criterion_3():
    t = reproduce("fig1")
    q2, q12 = t.column("u_h_q2")[1:4], t.column("u_h_q1.2")[1:4]
    res = [(f"q=2 node{k + 1}", v, e, 5e-3) for k, (v, e) in enumerate(zip(q2, (1.018, 0.929, 1.268)))]
    res += [(f"q=1.2 node{k + 1}", v, e, 5e-3) for k, (v, e) in enumerate(zip(q12, (1.000, 0.992, 1.088)))]
    return _check(res)


def criterion_4():
    t = reproduce("fig10")
    rows = {(r[0], r[1]): r[2:] for r in t.rows}
    res = []
    for q, expected in ((2.0, (1.417, 1.357, 1.357)), (1.1, (1.297, 1.092, 1.092))):
        for name, v, e in zip(("mesh2", "mesh3", "mesh4"), rows[("lq", q)], expected):
            res.append((f"{name} q={q}", v, e, 1e-2))
    ok, detail = _check(res)
    m2, m3, m4 = (v - 1.0 for v in rows[("extrapolated", 1.0)])
    limit_ok = m2 >= 0.25 and m3 < 0.1 and m4 < 0.1
    detail += f"; q->1 overshoot mesh2={m2:.4f} (>=0.25) mesh3={m3:.2e} mesh4={m4:.2e} (<0.1)"
    return ok and limit_ok, detail


def criterion_5():
    res = []
    for k in range(4):
        space = build_space(structured_square_mesh(Pattern.MESH1, k), Problem.BOUNDARY_2D)
        res.append((f"refine {k}", float(solve_l2(space, ONE).free_values.max()), 1.5, 1e-6))
    return _check(res)


def criterion_6():
    t = reproduce("fig3el")
    rows = {(r[0], r[1]): r for r in t.rows}
    h = t.header
    ext, q2 = rows[("extrapolated", 1.0)], rows[("lq", 2.0)]
    col = {name: h.index(name) for name in h}
    return _check([
        ("(0.1,0.45,0.45) u1", ext[col["h2_0.45_u1"]], 0.9931, 5e-3),
        ("(0.1,0.45,0.45) u2", ext[col["h2_0.45_u2"]], 1.0247, 5e-3),
        ("(0.1,0.5,0.4) overshoot", ext[col["h2_0.5_err"]], 0.0, 1e-3),
        ("q=2 error (0.1,0.45,0.45)", q2[col["h2_0.45_err"]], 0.278481, 1e-3),
        ("q=2 error (0.1,0.5,0.4)", q2[col["h2_0.5_err"]], 0.251309, 1e-3),
    ])


def criterion_7():
    failures = []
    certified = 0
    worst_defect = 0.0

    def expect(label, space, res, verdict):
        nonlocal certified, worst_defect
        if res.verdict is not verdict:
            failures.append(f"{label}: {res.verdict.name}")
            return
        if verdict is CertVerdict.CERTIFIED:
            defect, sup = verify_witness(space, res.witness)
            worst_defect = max(worst_defect, defect, sup - 1.0)
            if defect > 1e-9 or sup > 1.0 + 1e-9:
                failures.append(f"{label}: re-verification defect {defect:.2e} sup {sup:.12g}")
            certified += 1

    hs = [round(0.05 * k, 2) for k in range(1, 20)]
    for h in hs:
        space = build_space(interval_mesh([0.0, 1.0 - h, 1.0]), Problem.BOUNDARY_1D)
        a = alpha_two_element_l1(h)
        expect(f"two-element h={h}", space, certify_l1(space, space.lift([a]), ONE), CertVerdict.CERTIFIED)
        for d in (-0.05, 0.05):
            expect(f"two-element h={h} alpha{d:+}", space,
                   certify_l1(space, space.lift([a + d]), ONE), CertVerdict.NOT_OPTIMAL)
    for h in hs:
        space = build_space(jump_mesh(h), Problem.JUMP_1D)
        for beta in np.linspace(-1.0, 1.0, 11):
            expect(f"jump h={h} beta={beta:.1f}", space, certify_family_jump(h, float(beta)),
                   CertVerdict.CERTIFIED)
        sol = jump_family(h, 0.0)
        expect(f"jump h={h} gamma+0.1", space, certify_family_jump(h, 0.0, sol.gamma + 0.1),
               CertVerdict.NOT_OPTIMAL)
    for pattern in (Pattern.MESH3, Pattern.MESH4):
        space = build_space(structured_square_mesh(pattern), Problem.BOUNDARY_2D)
        expect(f"{pattern.value} all-ones", space,
               certify_l1(space, space.lift(np.ones(space.num_free)), ONE), CertVerdict.CERTIFIED)
    space = build_space(structured_square_mesh(Pattern.MESH1), Problem.BOUNDARY_2D)
    expect("mesh1 alpha=1", space, certify_l1(space, space.lift([1.0]), ONE), CertVerdict.NOT_OPTIMAL)
    detail = (f"{certified} certificates re-verified (worst defect {worst_defect:.1e}, tol 1e-9)"
              if not failures else "; ".join(failures[:5]))
    return not failures, detail


def _property_jacobian():
    space = build_space(criss_cross_mesh(2), Problem.BOUNDARY_2D)
    rng = np.random.default_rng(11)
    worst = 0.0
    for q, eps in ((3.0, 0.0), (1.5, 1e-2), (1.2, 1e-3)):
        for _ in range(5):
            x = rng.uniform(0.2, 1.8, space.num_free)
            _, J = assemble(space.lift(x), ONE, q, eps)
            Jfd = np.empty_like(J)
            for j in range(x.size):
                e = np.zeros_like(x)
                e[j] = 1e-6
                Jfd[:, j] = (residual_vector(space.lift(x + e), ONE, q, eps)
                             - residual_vector(space.lift(x - e), ONE, q, eps)) / 2e-6
            worst = max(worst, np.abs(J - Jfd).max() / np.abs(Jfd).max())
    return worst


def _property_partition():
    space = build_space(criss_cross_mesh(3), Problem.BOUNDARY_2D)
    rng = np.random.default_rng(12)
    worst = 0.0
    for p in rng.uniform(0, 1, (200, 2)):
        worst = max(worst, abs(space.basis_values(p).sum() - 1.0))
    for _ in range(20):
        part = partition(space.lift(rng.uniform(-0.5, 2.0, space.num_free)), ONE)
        for e, regions in enumerate(part.regions):
            worst = max(worst, abs(sum(r.measure for r in regions) - space.mesh.areas[e]))
    return worst


def _property_projection():
    worst = 0.0
    for mesh in (structured_square_mesh(Pattern.MESH2), criss_cross_mesh(3),
                 interval_mesh([0.0, 0.1, 0.55, 1.0])):
        space = build_space(mesh, Problem.BOUNDARY_2D if mesh.dim == 2 else Problem.BOUNDARY_1D)
        d = mesh.dim
        n = mesh.num_vertices
        M, b = np.zeros((n, n)), np.zeros(n)
        local = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
        for cell, meas in zip(mesh.cells, mesh.measures):
            M[np.ix_(cell, cell)] += meas * local
            b[cell] += meas / (d + 1)
        fr, fx = list(space.free_nodes), sorted(space.constrained)
        g = np.array([space.constrained[k] for k in fx])
        ref = scipy.linalg.solve(M[np.ix_(fr, fr)], b[fr] - M[np.ix_(fr, fx)] @ g)
        got = solve_lq(space, ONE, SolverOptions(q_target=2.0)).coeffs.free_values
        worst = max(worst, np.abs(got - ref).max())
    return worst


def _property_odd():
    worst = 0.0
    for inner in ([0.3], [0.2, 0.5], [0.1, 0.3, 0.2]):
        xs = np.cumsum(inner) / (sum(inner) + 1.0)
        mesh = interval_mesh(np.concatenate([[-1.0], -xs[::-1], [0.0], xs, [1.0]]))
        space = build_space(mesh, Problem.JUMP_1D)
        for q in (1.2, 1.5, 2.0, 3.0):
            c = solve_lq(space, SGN, SolverOptions(q_target=q)).coeffs.coeffs
            worst = max(worst, np.abs(c + c[::-1]).max())
    return worst


def _property_theta():
    rng = np.random.default_rng(13)
    failures = 0
    for _ in range(1000):
        h = rng.uniform(0.01, 1.0, int(rng.integers(2, 12)))
        h[-1] = rng.uniform(0.001, 1.0) * h[:-1].min()
        failures += not theta_schedule(h).feasible
    return failures


def criterion_8():
    jac, part, proj, odd, theta = (_property_jacobian(), _property_partition(),
                                   _property_projection(), _property_odd(), _property_theta())
    ok = jac <= 1e-5 and part <= 1e-13 and proj <= 1e-12 and odd <= 1e-9 and theta == 0
    detail = (f"jacobian rel err {jac:.1e} (<=1e-5), unity/measure {part:.1e} (<=1e-13), "
              f"q=2 vs projection {proj:.1e} (<=1e-12), oddness {odd:.1e} (<=1e-9), "
              f"theta infeasible {theta}/1000")
    return ok, detail


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


def _line(k, ok, detail):
    return f"ACCEPTANCE criterion {k}: {'PASS' if ok else 'FAIL'} | {detail}"


@pytest.mark.parametrize("k", range(1, len(CRITERIA) + 1))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    status = 0
    for k, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        print(_line(k, ok, detail))
        status |= not ok
    raise SystemExit(status)
