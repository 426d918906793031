"""Figure and table reproduction as plain CSV tables.

Every figure id maps to a builder returning a :class:`Table`.  Builders that
run several independent sweeps hand them to a thread pool whose size is
capped by the ``LQGIBBS_THREADS`` environment variable; results are always
collected in submission order so the output does not depend on scheduling.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .errors import InvalidProblem, NonConvergence, Unsupported
from .fespace import P1Space, Problem, TargetFunction, build_space, nodal_overshoot
from .mesh import (Pattern, criss_cross_mesh, interval_mesh, parse_mesh, structured_square_mesh,
                   uniform_interval_mesh)
from .solver import SolverOptions, SweepRow, _row, extrapolate_to_l1, solve_l2, solve_lq
from .theory import (alpha_mesh1_l1, alpha_mesh1_lq, alpha_two_element_l1,
                     alpha_two_element_lq)

NA = "NA"
SIG_DIGITS = 12


@dataclass(frozen=True)
class Table:
    """A CSV-ready table; ``None`` and NaN cells are written as ``NA``."""

    name: str
    header: Tuple[str, ...]
    rows: Tuple[tuple, ...]

    def column(self, name: str) -> list:
        k = self.header.index(name)
        return [r[k] for r in self.rows]


def format_cell(v) -> str:
    if v is None:
        return NA
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return NA
        return format(float(v), f".{SIG_DIGITS}g")
    return str(v)


def write_csv(table: Table, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([format_cell(v) for v in row])


def worker_count() -> int:
    """Pool size: ``LQGIBBS_THREADS`` if set (at least 1), else up to 4."""
    env = os.environ.get("LQGIBBS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def ordered_map(fn: Callable, items: Sequence) -> list:
    """``[fn(x) for x in items]`` on a thread pool, results in input order."""
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def tolerant_sweep(space: P1Space, u: TargetFunction, qs: Sequence[float],
                   opts: Optional[SolverOptions] = None) -> List[Optional[SweepRow]]:
    """Like :func:`lqgibbs.solver.sweep_q` but a failed exponent yields ``None``.

    The next exponent is warm-started from the last one that converged.
    """
    out: List[Optional[SweepRow]] = []
    f, q_prev = None, 2.0
    for q in qs:
        q = float(q)
        try:
            if f is None and q == 2.0:
                g = solve_l2(space, u)
            else:
                o = SolverOptions(q_target=q) if opts is None else _retarget(opts, q)
                g = solve_lq(space, u, o, initial=f, initial_q=q_prev).coeffs
        except NonConvergence:
            out.append(None)
            continue
        f, q_prev = g, q
        out.append(_row(q, g, u))
    return out


def _retarget(opts: SolverOptions, q: float) -> SolverOptions:
    return SolverOptions(q_target=q, eps_schedule=opts.eps_schedule, newton_tol=opts.newton_tol,
                         max_iters=opts.max_iters, damping=opts.damping,
                         max_halvings=opts.max_halvings, polish_iters=opts.polish_iters)


def _extrapolated(rows: Sequence[Optional[SweepRow]]):
    try:
        return extrapolate_to_l1([r for r in rows if r is not None])
    except InvalidProblem:
        return None


def _grid(a: float, b: float, step: float) -> List[float]:
    n = int(round(abs(b - a) / step))
    sgn = 1.0 if b >= a else -1.0
    return [round(a + sgn * k * step, 10) for k in range(n + 1)]


STUDY_Q = _grid(2.0, 1.1, 0.1)              # 2.0, 1.9, ..., 1.1
NEAR_ONE = [1.05, 1.02, 1.01, 1.005, 1.002, 1.001]
_ONE = TargetFunction.constant_one()


def _get(row: Optional[SweepRow], attr: str):
    return None if row is None else getattr(row, attr)


# ------------------------------------------------------------------ figures

def fig1() -> Table:
    """Nodal values on the uniform four-element mesh for ``q = 2`` and ``q = 1.2``."""
    mesh = uniform_interval_mesh(4)
    space = build_space(mesh, Problem.BOUNDARY_1D)
    f2 = solve_l2(space, _ONE)
    f12 = solve_lq(space, _ONE, SolverOptions(1.2)).coeffs
    xs = mesh.coordinates[:, 0]
    rows = tuple((float(x), float(a), float(b)) for x, a, b in zip(xs, f2.coeffs, f12.coeffs))
    return Table("fig1", ("x", "u_h_q2", "u_h_q1.2"), rows)


_THEORY_Q = [1.0, 1.001, 1.01] + _grid(1.02, 2.0, 0.02)[:-1] + _grid(2.0, 20.0, 0.5)


def fig2() -> Table:
    """Two-element overshoot against ``q`` for ``h`` in 0.25, 0.5, 0.75 (closed form)."""
    hs = (0.25, 0.5, 0.75)
    rows = []
    for q in _THEORY_Q:
        vals = [alpha_two_element_l1(h) if q == 1.0 else alpha_two_element_lq(h, q) for h in hs]
        rows.append((q, *vals))
    return Table("fig2", ("q", "alpha_h0.25", "alpha_h0.5", "alpha_h0.75"), tuple(rows))


def fig5() -> Table:
    """Criss-cross centre value: closed form next to the numerical solve, same ``q`` grid."""
    space = build_space(structured_square_mesh(Pattern.MESH1), Problem.BOUNDARY_2D)
    qs = [q for q in _THEORY_Q if q > 1.0]
    down = [q for q in qs if q <= 2.0][::-1]
    up = [q for q in qs if q > 2.0]
    numeric = {}
    for sweep in ordered_map(lambda ql: tolerant_sweep(space, _ONE, ql), [down, up]):
        numeric.update({r.q: r.max_value for r in sweep if r is not None})
    rows = []
    for q in _THEORY_Q:
        th = alpha_mesh1_l1() if q == 1.0 else alpha_mesh1_lq(q)
        rows.append((q, th, numeric.get(q)))
    return Table("fig5", ("q", "alpha_theory", "alpha_solver"), tuple(rows))


def fig7(max_refine: int = 10) -> Table:
    """``max u_h`` at ``q = 2`` on criss-cross meshes with ``4 n^2`` triangles."""
    def one(n):
        mesh = criss_cross_mesh(n)
        f = solve_l2(build_space(mesh, Problem.BOUNDARY_2D), _ONE)
        return (n, mesh.num_elements, float(f.coeffs.max()))
    rows = ordered_map(one, list(range(1, max_refine + 1)))
    return Table("fig7", ("n", "elements", "max_u_h"), tuple(rows))


def fig9_meshes() -> Dict[str, object]:
    """Uniform and last-element-doubled meshes with 5 and 100 elements."""
    def doubled(n):
        h = 1.0 / (n + 1)
        return interval_mesh([k * h for k in range(n)] + [1.0])
    return {
        "uniform5": uniform_interval_mesh(5),
        "uniform100": uniform_interval_mesh(100),
        "nonuniform5": doubled(5),
        "nonuniform100": doubled(100),
    }


FIG9_Q = _grid(2.0, 1.2, 0.1)


def fig9() -> Table:
    """Maximal nodal error for ``u = 1 + 0.1 sin(2 pi x)`` on four meshes."""
    u = TargetFunction.sine_perturbed(0.1, 1.0)
    meshes = fig9_meshes()

    def one(name):
        return tolerant_sweep(build_space(meshes[name], Problem.BOUNDARY_1D), u, FIG9_Q)
    sweeps = ordered_map(one, list(meshes))
    rows = tuple((q, *[_get(s[k], "max_error") for s in sweeps]) for k, q in enumerate(FIG9_Q))
    return Table("fig9", ("q", *meshes), rows)


def _sweep_with_limit(space, qs):
    rows = tolerant_sweep(space, _ONE, qs)
    return rows, _extrapolated(rows)


def fig10() -> Table:
    """Overshoot on Meshes 2 to 4 as ``q`` decreases, plus a ``q -> 1`` extrapolation."""
    pats = (Pattern.MESH2, Pattern.MESH3, Pattern.MESH4)
    qs = STUDY_Q + NEAR_ONE

    def one(p):
        return _sweep_with_limit(build_space(structured_square_mesh(p), Problem.BOUNDARY_2D), qs)
    res = ordered_map(one, list(pats))
    rows = [("lq", q, *[_get(r[0][k], "max_value") for r in res]) for k, q in enumerate(qs)]
    rows.append(("extrapolated", 1.0,
                 *[None if r[1] is None else float(r[1].free_values.max()) for r in res]))
    return Table("fig10", ("kind", "q", "mesh2", "mesh3", "mesh4"), tuple(rows))


FIG3EL_MESHES = {"h2_0.45": (0.1, 0.45, 0.45), "h2_0.5": (0.1, 0.5, 0.4)}


def fig3el() -> Table:
    """Three-element meshes: interior nodal values and maximal nodal error."""
    qs = _grid(2.0, 1.2, 0.1) + [1.1] + NEAR_ONE

    def one(h):
        xs = np.concatenate([[0.0], np.cumsum(h)])
        xs[-1] = 1.0
        space = build_space(interval_mesh(xs), Problem.BOUNDARY_1D)
        return _sweep_with_limit(space, qs)
    res = ordered_map(one, list(FIG3EL_MESHES.values()))
    header = ["kind", "q"]
    for name in FIG3EL_MESHES:
        header += [f"{name}_u1", f"{name}_u2", f"{name}_err"]
    rows = []
    for k, q in enumerate(qs):
        row = ["lq", q]
        for sweep, _ in res:
            r = sweep[k]
            if r is None:
                row += [None, None, None]
            else:
                u1, u2 = r.coeffs.free_values
                row += [float(u1), float(u2), r.max_error]
        rows.append(tuple(row))
    row = ["extrapolated", 1.0]
    for _, f in res:
        if f is None:
            row += [None, None, None]
        else:
            u1, u2 = f.free_values
            row += [float(u1), float(u2), nodal_overshoot(f, _ONE).max_error]
    rows.append(tuple(row))
    return Table("fig3el", tuple(header), tuple(rows))


def load_unstructured(name: str):
    """One of the bundled meshes ``"a"``, ``"b"`` or ``"c"``."""
    text = resources.files("lqgibbs").joinpath("data", f"mesh_{name}.lqmesh").read_text()
    return parse_mesh(text)


FIG12_Q = _grid(2.0, 1.3, 0.1)


def fig12() -> Table:
    """``max u_h`` on the bundled unstructured meshes A, B and C."""
    names = ("a", "b", "c")

    def one(n):
        return tolerant_sweep(build_space(load_unstructured(n), Problem.BOUNDARY_2D), _ONE, FIG12_Q)
    res = ordered_map(one, list(names))
    rows = tuple((q, *[_get(s[k], "max_value") for s in res]) for k, q in enumerate(FIG12_Q))
    return Table("fig12", ("q", "mesh_a", "mesh_b", "mesh_c"), rows)


FIGURES: Dict[str, Callable[[], Table]] = {
    "fig1": fig1,
    "fig2": fig2,
    "fig5": fig5,
    "fig7": fig7,
    "fig9": fig9,
    "fig10": fig10,
    "fig3el": fig3el,
    "fig12": fig12,
}


def reproduce(figure_id: str) -> Table:
    """Build the table for ``figure_id``.

    Raises
    ------
    Unsupported
        For an unknown id; the message lists the known ones.
    """
    try:
        builder = FIGURES[figure_id]
    except KeyError:
        raise Unsupported(f"unknown figure id {figure_id!r}; known ids: {', '.join(FIGURES)}")
    return builder()
