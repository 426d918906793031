"""Dual-witness certification of L^1-best approximations.

A candidate ``u_h`` is L^1-optimal exactly when some ``psi`` with
``|psi| <= 1``, equal to ``sgn(u - u_h)`` off the agreement set, annihilates
every free hat function.  The sign part is fixed by the partition; on the
agreement set we search for a discontinuous piecewise-affine ``psi0`` by a
small linear program that minimises ``max |psi0|``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize, root

from .fespace import FEFunction, P1Space, Problem, TargetFunction, build_space
from .mesh import OUTFLOW, INFLOW, TriMesh, jump_mesh
from .signsplit import Sign, SignPartition, partition, partition_element
from .theory import jump_family

FEAS_TOL = 1e-9
# subdivision levels tried for psi0, keyed by vertices per element
MAX_LEVEL = {2: 5, 3: 3}


class CertVerdict(enum.Enum):
    CERTIFIED = "CERTIFIED"
    NOT_OPTIMAL = "NOT_OPTIMAL"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class PsiWitness:
    """``psi = sgn(r)`` on sign regions and piecewise-affine ``psi0`` on agreement elements.

    ``zero_values`` maps an element index to a list of ``(points, values)``
    pairs: a sub-interval or sub-triangle of that element and the values of
    ``psi0`` at its vertices.
    """

    partition: SignPartition
    zero_values: Dict[int, list]

    @property
    def sup_norm(self) -> float:
        vals = [1.0 for rs in self.partition.regions for r in rs if r.sign != Sign.ZERO]
        vals += [float(np.max(np.abs(v))) for ps in self.zero_values.values() for _, v in ps]
        return max(vals, default=0.0)


@dataclass(frozen=True)
class CertificateResult:
    verdict: CertVerdict
    witness: Optional[PsiWitness] = None
    violated_node: Optional[int] = None
    margin: float = float("nan")
    fixed_part: Optional[np.ndarray] = field(default=None, repr=False)

    def __bool__(self):
        return self.verdict is CertVerdict.CERTIFIED


# ------------------------------------------------------------------ helpers

def _local_mass(points) -> np.ndarray:
    """Mass matrix of the P1 basis on one interval or triangle."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 1:
        h = abs(pts[1, 0] - pts[0, 0])
        return h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    a, b, c = pts
    area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return area / 12.0 * (np.ones((3, 3)) + np.eye(3))


def _barycentric(points, x) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 1:
        t = (x[0] - pts[0, 0]) / (pts[1, 0] - pts[0, 0])
        return np.array([1.0 - t, t])
    T = np.column_stack([pts[1] - pts[0], pts[2] - pts[0]])
    l12 = np.linalg.solve(T, np.asarray(x, dtype=float) - pts[0])
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


def _fixed_contribution(space: P1Space, part: SignPartition) -> np.ndarray:
    """``c_i = int_{r>0} phi_i - int_{r<0} phi_i`` via measure times centroid value."""
    mesh = space.mesh
    cells = np.asarray(mesh.cells)
    coords = np.asarray(mesh.coordinates)
    c = np.zeros(mesh.num_vertices)
    for e, regions in enumerate(part.regions):
        pts = coords[cells[e]]
        for reg in regions:
            if reg.sign == Sign.ZERO:
                continue
            lam = _barycentric(pts, reg.centroid)
            c[cells[e]] += int(reg.sign) * reg.measure * lam
    return c


def _quadrature_points(region_points):
    """Points and weights exact for quadratics on an interval or convex polygon."""
    p = np.asarray(region_points, dtype=float)
    if p.shape[1] == 1:
        a, b = p[0, 0], p[1, 0]
        g = 0.5 / np.sqrt(3.0)
        mid, h = 0.5 * (a + b), abs(b - a)
        return np.array([[mid - g * (b - a)], [mid + g * (b - a)]]), np.array([0.5 * h, 0.5 * h])
    pts, wts = [], []
    for k in range(1, len(p) - 1):
        a, b, c = p[0], p[k], p[k + 1]
        area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        for m in (0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)):
            pts.append(m)
            wts.append(area / 3.0)
    return np.array(pts), np.array(wts)


def verify_witness(space: P1Space, witness: PsiWitness) -> Tuple[float, float]:
    """Recompute ``max_i |int psi phi_i|`` over free nodes and ``sup|psi|``.

    Uses edge-midpoint (2D) or two-point Gauss (1D) quadrature on every
    sub-region, independent of the centroid and mass-matrix formulas used to
    build the witness.
    """
    mesh = space.mesh
    cells = np.asarray(mesh.cells)
    coords = np.asarray(mesh.coordinates)
    acc = np.zeros(mesh.num_vertices)
    for e, regions in enumerate(witness.partition.regions):
        verts = coords[cells[e]]
        for reg in regions:
            if reg.sign == Sign.ZERO:
                pieces = witness.zero_values[e]
            else:
                pieces = [(reg.points, None)]
            for sub, vals in pieces:
                xs, ws = _quadrature_points(sub)
                for x, w in zip(xs, ws):
                    lam = _barycentric(verts, x)
                    psi = float(int(reg.sign)) if vals is None else float(_barycentric(sub, x) @ vals)
                    acc[cells[e]] += w * psi * lam
    return float(np.max(np.abs(acc[np.asarray(space.free_nodes, dtype=int)]), initial=0.0)), witness.sup_norm


# ----------------------------------------------------------------- certifier

def certify_l1(space: P1Space, f: FEFunction, u: TargetFunction) -> CertificateResult:
    """Decide whether ``f`` is an L^1-best approximation of ``u``.

    Parameters
    ----------
    space : P1Space
    f : FEFunction
        Candidate, with constrained values already imposed.
    u : TargetFunction
        Must be affine on every element.

    Returns
    -------
    CertificateResult
        ``CERTIFIED`` comes with a witness re-checked to 1e-9.
        ``NOT_OPTIMAL`` is reported when some free node's forced sign
        contribution exceeds what any ``|psi0| <= 1`` on the agreement set
        could cancel; with a null agreement set that is just ``c_i != 0``.
        ``UNDECIDED`` means the affine ``psi0`` class was too small, which
        proves nothing.
    """
    part = partition(f, u)
    mesh = space.mesh
    cells = np.asarray(mesh.cells)
    coords = np.asarray(mesh.coordinates)
    free = np.asarray(space.free_nodes)
    row_of = {int(n): k for k, n in enumerate(free)}
    c_all = _fixed_contribution(space, part)
    c = c_all[free]

    zero_elems = part.zero_elements()
    # capacity: the largest |int_Z psi0 phi_i| any |psi0| <= 1 can produce
    capacity = np.zeros(mesh.num_vertices)
    for e in zero_elems:
        capacity[cells[e]] += mesh.measures[e] / (mesh.cells.shape[1])
    excess = np.abs(c) - capacity[free]
    if excess.size and np.max(excess) > FEAS_TOL:
        k = int(np.argmax(excess))
        return CertificateResult(CertVerdict.NOT_OPTIMAL, violated_node=int(free[k]),
                                 margin=-float(excess[k]), fixed_part=c_all)

    if not zero_elems:
        wit = PsiWitness(part, {})
        return _finish(space, wit, 0.0, c_all)

    cells_z = [(e, coords[cells[e]]) for e in zero_elems]
    layout = [(e, sub) for e, verts in cells_z for sub in _subdivide(verts, 0)]
    t, pieces, duals = _solve_lp(space, c, row_of, layout)
    if pieces is None:
        # the continuous optimum of max|psi0| equals 1 / min{N(y) : c.y = -1},
        # N(y) = int_Z |sum_i y_i phi_i|; an optimal psi0 is +-1 off the zero
        # set of the minimising combination, so cut the elements along it
        y = _dual_direction(space, cells_z, c, row_of, duals)
        if y is not None:
            t, pieces, _ = _solve_lp(space, c, row_of, _dual_split(space, cells_z, y, row_of))
    if pieces is None:
        for level in range(1, MAX_LEVEL[cells.shape[1]] + 1):
            layout = [(e, sub) for e, verts in cells_z for sub in _subdivide(verts, level)]
            t, pieces, _ = _solve_lp(space, c, row_of, layout)
            if pieces is not None:
                break
    if pieces is None:
        return CertificateResult(CertVerdict.UNDECIDED, margin=1.0 - t, fixed_part=c_all)
    return _finish(space, PsiWitness(part, pieces), t, c_all)


def _subdivide(points, level):
    """Split an interval into ``2**level`` pieces or a triangle into ``4**level``."""
    pieces = [np.asarray(points, dtype=float)]
    for _ in range(level):
        nxt = []
        for p in pieces:
            if p.shape[0] == 2:
                m = 0.5 * (p[0] + p[1])
                nxt += [np.array([p[0], m]), np.array([m, p[1]])]
            else:
                a, b, c = p
                ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
                nxt += [np.array([a, ab, ca]), np.array([ab, b, bc]),
                        np.array([ca, bc, c]), np.array([ab, bc, ca])]
        pieces = nxt
    return pieces


def _abs_integral(space, cells_z, y, row_of):
    """``N(y) = int_Z |v|`` and its gradient for ``v = sum_k y_k phi_{free k}``."""
    cells = np.asarray(space.mesh.cells)
    val = 0.0
    grad = np.zeros(len(y))
    for e, verts in cells_z:
        rows = [row_of.get(int(n)) for n in cells[e]]
        w = np.array([0.0 if k is None else y[k] for k in rows])
        for reg in partition_element(verts, w, 0.0):
            if reg.sign == Sign.ZERO:
                continue
            lam = reg.measure * int(reg.sign) * _barycentric(verts, reg.centroid)
            val += float(lam @ w)
            for a, k in enumerate(rows):
                if k is not None:
                    grad[k] += lam[a]
    return val, grad


def _dual_direction(space, cells_z, c, row_of, duals):
    """Minimiser of ``N(y)`` on the hyperplane ``c.y = -1`` (``None`` on failure).

    Only rows whose hat function meets the agreement set take part; the
    others carry no ``psi0`` freedom and were settled by the capacity test.
    """
    cells = np.asarray(space.mesh.cells)
    act = sorted({row_of[int(n)] for e, _ in cells_z for n in cells[e] if int(n) in row_of})
    ca = c[act]
    nc = float(ca @ ca)
    if nc == 0.0:
        return None
    # parametrise the hyperplane as y0 + Z z with Z spanning c-perp
    E = np.zeros((len(c), len(act)))
    E[act, np.arange(len(act))] = 1.0
    y0 = -E @ ca / nc
    Z = E @ null_space(ca[None, :])
    starts = [np.zeros(Z.shape[1])]
    if duals:
        yd = np.zeros(len(c))
        for k, v in duals.items():
            yd[k] = v
        yd = E @ (E.T @ yd)
        if c @ yd != 0.0:
            yd = -yd / (c @ yd)
            starts.append(Z.T @ (yd - y0))
    best = None
    for z0 in starts:
        def fun(z):
            v, g = _abs_integral(space, cells_z, y0 + Z @ z, row_of)
            return v, Z.T @ g
        res = minimize(fun, z0, jac=True, method="BFGS", options={"gtol": 1e-14, "maxiter": 500})
        if best is None or res.fun < best.fun:
            best = res
    z = best.x
    # BFGS stalls near sqrt(eps) in the gradient; finish on the stationarity equation
    pol = root(lambda zz: fun(zz)[1], z, method="hybr", options={"xtol": 1e-15})
    if np.all(np.isfinite(pol.x)) and np.linalg.norm(fun(pol.x)[1]) < np.linalg.norm(fun(z)[1]):
        z = pol.x
    return y0 + Z @ z


def _dual_split(space, cells_z, y, row_of):
    """Cut every agreement element along the zero line of ``sum_i y_i phi_i``."""
    cells = np.asarray(space.mesh.cells)
    layout = []
    for e, verts in cells_z:
        v = np.array([0.0 if row_of.get(int(n)) is None else y[row_of[int(n)]]
                      for n in cells[e]])
        for reg in partition_element(verts, v, 0.0):
            pts = reg.points
            if pts.shape[1] == 1:
                layout.append((e, pts[np.argsort(pts[:, 0])]))
            else:
                layout += [(e, np.array([pts[0], pts[k], pts[k + 1]]))
                           for k in range(1, len(pts) - 1)]
    return layout


def _solve_lp(space, c, row_of, layout):
    """Minimise ``max|psi0|`` over discontinuous affine pieces given by ``layout``.

    Returns ``(t, pieces, duals)``; ``pieces`` is ``None`` when the optimum
    exceeds one (``t = inf`` if the LP itself is infeasible).  ``duals`` maps
    constraint rows to the equality multipliers, when available.
    """
    cells = np.asarray(space.mesh.cells)
    nloc = cells.shape[1]
    ndof = nloc * len(layout)
    A = np.zeros((len(c), ndof))
    for z, (e, sub) in enumerate(layout):
        verts = np.asarray(space.mesh.coordinates)[cells[e]]
        lam = np.array([_barycentric(verts, x) for x in sub])   # lam[k, a] = phi_a(s_k)
        block = _local_mass(sub) @ lam                          # block[b, a]
        for a, node in enumerate(cells[e]):
            k = row_of.get(int(node))
            if k is not None:
                A[k, z * nloc:(z + 1) * nloc] += block[:, a]
    active = np.nonzero(np.any(A != 0.0, axis=1))[0]
    Aa = A[active]
    A_eq = np.hstack([Aa, np.zeros((Aa.shape[0], 1))])
    eye = np.eye(ndof)
    ones = np.ones((ndof, 1))
    A_ub = np.vstack([np.hstack([eye, -ones]), np.hstack([-eye, -ones])])
    cost = np.zeros(ndof + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * ndof), A_eq=A_eq, b_eq=-c[active],
                  bounds=[(None, None)] * ndof + [(0.0, None)], method="highs")
    if res.status != 0:
        return float("inf"), None, None
    duals = None
    if getattr(res, "eqlin", None) is not None:
        duals = {int(k): float(y) for k, y in zip(active, res.eqlin.marginals)}
    psi = res.x[:ndof]
    # minimum-norm correction so the equality holds to rounding, not LP tolerance
    if Aa.size:
        corr, *_ = np.linalg.lstsq(Aa, -c[active] - Aa @ psi, rcond=None)
        psi = psi + corr
    t = float(np.max(np.abs(psi)))
    if t > 1.0 + FEAS_TOL:
        return t, None, duals
    pieces: Dict[int, list] = {}
    for z, (e, sub) in enumerate(layout):
        pieces.setdefault(e, []).append((sub, psi[z * nloc:(z + 1) * nloc].copy()))
    return t, pieces, duals


def _finish(space, witness, t, c_all) -> CertificateResult:
    defect, sup = verify_witness(space, witness)
    if defect > FEAS_TOL or sup > 1.0 + FEAS_TOL:
        return CertificateResult(CertVerdict.UNDECIDED, witness=None, margin=1.0 - t,
                                 fixed_part=c_all)
    return CertificateResult(CertVerdict.CERTIFIED, witness=witness, margin=1.0 - t,
                             fixed_part=c_all)


def certify_family_jump(h: float, beta: float, gamma: Optional[float] = None) -> CertificateResult:
    """Certify the jump-discontinuity candidate ``jump_family(h, beta)``.

    ``gamma`` overrides the value at ``x = h`` to test perturbed candidates.
    """
    sol = jump_family(h, beta)
    space = build_space(jump_mesh(h), Problem.JUMP_1D)
    coeffs = np.array(sol.coefficients())
    if gamma is not None:
        coeffs[3] = gamma
    return certify_l1(space, space.function(coeffs), TargetFunction.sgn_x())


# ------------------------------------------------------------- area check

@dataclass(frozen=True)
class NodeAreaReport:
    """Area balance at a free node sharing an edge with the outflow boundary."""

    node: int
    point: Tuple[float, float]
    outflow_area: float
    remaining_area: float
    flag: bool


def area_heuristic_2d(mesh: TriMesh, rel_tol: float = 1e-12) -> List[NodeAreaReport]:
    """Per-node comparison of outflow-touching and remaining triangle areas.

    For every non-inflow, non-outflow node joined by an edge to an outflow
    node, ``flag`` is true when the triangles around it that touch the
    outflow boundary have total area no larger than the other triangles
    around it.  Flagged nodes are predicted to lose their overshoot as
    ``q -> 1``.  Equality counts as flagged (within ``rel_tol``).
    """
    cells = np.asarray(mesh.cells)
    markers = mesh.markers
    areas = np.asarray(mesh.areas)
    is_out = np.array([m == OUTFLOW for m in markers])
    touches = is_out[cells].any(axis=1)
    reports = []
    for i, m in enumerate(markers):
        if m in (OUTFLOW, INFLOW):
            continue
        around = np.nonzero((cells == i).any(axis=1))[0]
        if not touches[around].any():
            continue
        a_out = float(areas[around][touches[around]].sum())
        a_rest = float(areas[around][~touches[around]].sum())
        flag = a_out <= a_rest + rel_tol * (a_out + a_rest)
        x, y = mesh.coordinates[i]
        reports.append(NodeAreaReport(i, (float(x), float(y)), a_out, a_rest, bool(flag)))
    return reports
