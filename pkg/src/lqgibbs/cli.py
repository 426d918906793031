"""Command-line front end (``lqgibbs``).

Exit status: 0 on success, 2 when the nonlinear solver does not converge,
3 for malformed arguments, bad input files or invalid problem data.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import experiments
from .certify import area_heuristic_2d, certify_l1
from .errors import LqGibbsError, NonConvergence, ParseError
from .fespace import P1Space, Problem, TargetFunction, build_space
from .mesh import (Mesh1D, Pattern, format_mesh, interval_mesh, jump_mesh, load_mesh, save_mesh,
                   structured_square_mesh, two_element_mesh, uniform_interval_mesh)
from .solver import SolverOptions, SweepRow, solve_l2, solve_lq, sweep_q
from .theory import (alpha_mesh1_l1, alpha_mesh2_l1, alpha_two_element_l1,
                     check_no_overshoot_l1, jump_family, theta_schedule)

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_INVALID = 3
RANGE_TOL = 1e-12


class _Parser(argparse.ArgumentParser):
    """Argument errors become :class:`ParseError` so they map to exit 3."""

    def error(self, message):
        raise ParseError(message)


# ---------------------------------------------------------------- parsing

def parse_q_list(text: str) -> List[float]:
    """Parse ``a:b:step`` (endpoints inclusive within 1e-12), a comma list, or one value.

    >>> parse_q_list("2:1.5:0.25")
    [2.0, 1.75, 1.5]
    """
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise ParseError("q step must be positive")
            sgn = 1.0 if b >= a else -1.0
            out = []
            k = 0
            while True:
                q = a + sgn * k * step
                if sgn * (q - b) > RANGE_TOL:
                    break
                out.append(round(q, 12))
                k += 1
            return out
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ParseError(f"bad q specification {text!r}: {exc}") from None


def parse_target(text: str) -> TargetFunction:
    """``const1``, ``sgnx``, ``sine:A:K`` or ``layer:EPS``."""
    parts = text.split(":")
    try:
        if parts[0] == "const1" and len(parts) == 1:
            return TargetFunction.constant_one()
        if parts[0] == "sgnx" and len(parts) == 1:
            return TargetFunction.sgn_x()
        if parts[0] == "sine" and len(parts) == 3:
            return TargetFunction.sine_perturbed(float(parts[1]), float(parts[2]))
        if parts[0] == "layer" and len(parts) == 2:
            return TargetFunction.boundary_layer(float(parts[1]))
    except ValueError as exc:
        raise ParseError(f"bad target {text!r}: {exc}") from None
    raise ParseError(f"unknown target {text!r}; use const1, sgnx, sine:A:K or layer:EPS")


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ParseError(f"expected a list of numbers, got {text!r}") from None


def resolve_mesh(spec: str):
    """Mesh from a pattern name, a 1D shorthand or a file path.

    Accepted forms: ``mesh1`` .. ``mesh4`` (optionally ``mesh1@k`` for
    ``k`` refinements), ``mesh_a`` / ``mesh_b`` / ``mesh_c``,
    ``uniform:N``, ``breaks:x0,x1,...``, ``two:h``, ``jump:h`` or a path
    to an ``.lqmesh`` file.
    """
    name, _, arg = spec.partition(":")
    base, _, ref = spec.partition("@")
    try:
        if base in {p.value for p in Pattern}:
            return structured_square_mesh(Pattern(base), int(ref) if ref else 0)
        if spec in ("mesh_a", "mesh_b", "mesh_c"):
            return experiments.load_unstructured(spec[-1])
        if name == "uniform" and arg:
            return uniform_interval_mesh(int(arg))
        if name == "breaks" and arg:
            return interval_mesh(_floats(arg))
        if name == "two" and arg:
            return two_element_mesh(float(arg))
        if name == "jump" and arg:
            return jump_mesh(float(arg))
    except ValueError as exc:
        if isinstance(exc, LqGibbsError):
            raise
        raise ParseError(f"bad mesh specification {spec!r}: {exc}") from None
    path = Path(spec)
    if not path.exists():
        raise ParseError(f"no such mesh file or pattern: {spec!r}")
    return load_mesh(path)


def _problem_for(mesh, name: Optional[str]) -> Problem:
    if name:
        try:
            return Problem(name)
        except ValueError:
            raise ParseError(f"unknown problem {name!r}; use "
                             + ", ".join(p.value for p in Problem)) from None
    if isinstance(mesh, Mesh1D):
        return Problem.JUMP_1D if mesh.domain[0] < 0 else Problem.BOUNDARY_1D
    return Problem.BOUNDARY_2D


def _default_target(problem: Problem) -> TargetFunction:
    return TargetFunction.sgn_x() if problem is Problem.JUMP_1D else TargetFunction.constant_one()


def _space_and_target(args):
    mesh = resolve_mesh(args.mesh)
    problem = _problem_for(mesh, args.problem)
    space = build_space(mesh, problem)
    u = parse_target(args.target) if args.target else _default_target(problem)
    return space, u


def _open_out(path: Optional[str]):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


# ---------------------------------------------------------------- commands

def cmd_gen_mesh(args) -> int:
    mesh = structured_square_mesh(Pattern(args.pattern), args.refine)
    if args.output in (None, "-"):
        sys.stdout.write(format_mesh(mesh))
    else:
        save_mesh(mesh, args.output)
    return EXIT_OK


def _verdict_line(h: Sequence[float]) -> str:
    verdict = check_no_overshoot_l1(h)
    return f"{verdict.value}, M={theta_schedule(h).M}"


def cmd_mesh_check(args) -> int:
    if args.h is not None:
        print(_verdict_line(_floats(args.h)))
        return EXIT_OK
    mesh = resolve_mesh(args.mesh)
    if isinstance(mesh, Mesh1D):
        print(_verdict_line(list(mesh.lengths)))
        return EXIT_OK
    print(f"valid triangle mesh: {mesh.num_vertices} vertices, {mesh.num_elements} triangles")
    print("node,x,y,outflow_area,remaining_area,flag")
    for r in area_heuristic_2d(mesh):
        cells = [str(r.node)] + [experiments.format_cell(v) for v in
                                 (r.point[0], r.point[1], r.outflow_area, r.remaining_area)]
        print(",".join(cells + [str(r.flag).lower()]))
    return EXIT_OK


def _write_nodal(space: P1Space, coeffs, out) -> None:
    coords = np.asarray(space.mesh.coordinates)
    cols = ["node", "x"] + (["y"] if coords.shape[1] == 2 else []) + ["u_h", "free"]
    out.write(",".join(cols) + "\n")
    free = set(int(i) for i in space.free_nodes)
    for i, (xy, v) in enumerate(zip(coords, coeffs)):
        vals = [str(i)] + [experiments.format_cell(float(c)) for c in xy]
        vals += [experiments.format_cell(float(v)), "1" if i in free else "0"]
        out.write(",".join(vals) + "\n")


def cmd_solve(args) -> int:
    space, u = _space_and_target(args)
    q = float(args.q)
    if q == 2.0:
        f = solve_l2(space, u)
        note = "direct L2 solve"
    else:
        rep = solve_lq(space, u, SolverOptions(q))
        f = rep.coeffs
        note = f"residual {rep.residual_norm:.3e}" + (" (rounding floor)" if rep.floor_limited else "")
    out, close = _open_out(args.output)
    try:
        _write_nodal(space, f.coeffs, out)
    finally:
        if close:
            out.close()
    print(f"q={q:g}: {note}", file=sys.stderr)
    return EXIT_OK


SWEEP_HEADER = ("q", "alpha", "max_overshoot", "max_error")


def _sweep_rows(rows: Sequence[SweepRow]):
    return tuple((r.q, r.max_value, r.max_overshoot, r.max_error) for r in rows)


def cmd_sweep(args) -> int:
    space, u = _space_and_target(args)
    qs = parse_q_list(args.q)
    status = EXIT_OK
    if args.keep_going:
        rows = experiments.tolerant_sweep(space, u, qs)
        data = tuple((q,) + (r[1:] if r is not None else (None, None, None))
                     for q, r in zip(qs, [None if x is None else _sweep_rows([x])[0]
                                          for x in rows]))
    else:
        try:
            data = _sweep_rows(sweep_q(space, u, qs))
        except NonConvergence as exc:
            data = _sweep_rows(exc.partial or [])
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_NONCONVERGENCE
    out, close = _open_out(args.output)
    try:
        experiments.write_csv(experiments.Table("sweep", SWEEP_HEADER, data), out)
    finally:
        if close:
            out.close()
    return status


def _theory_candidate(name: str):
    """Mesh, problem, target and nodal values of a named closed-form candidate."""
    key, _, rest = name.partition(":")
    params = _floats(rest.replace(":", " ")) if rest else []
    if key == "two-element" and len(params) == 1:
        h = params[0]
        mesh = two_element_mesh(h)
        return mesh, Problem.BOUNDARY_1D, [1.0, alpha_two_element_l1(h), 0.0]
    if key == "jump" and len(params) == 2:
        h, beta = params
        return jump_mesh(h), Problem.JUMP_1D, list(jump_family(h, beta).coefficients())
    if key in ("mesh1", "mesh2", "mesh3", "mesh4", "mesh1-ones", "mesh2-ones") and not params:
        pat = Pattern(key[:5])
        mesh = structured_square_mesh(pat)
        space = build_space(mesh, Problem.BOUNDARY_2D)
        vals = space.lift(np.ones(space.num_free)).coeffs.copy()
        if key == "mesh1":
            vals[mesh.find_vertex((0.5, 0.5))] = alpha_mesh1_l1()
        elif key == "mesh2":
            vals[mesh.find_vertex((0.5, 0.0))] = alpha_mesh2_l1()
        return mesh, Problem.BOUNDARY_2D, list(vals)
    raise ParseError(f"unknown theory candidate {name!r}; use two-element:H, jump:H:BETA, "
                     "mesh1, mesh2, mesh3, mesh4, mesh1-ones or mesh2-ones")


def cmd_certify(args) -> int:
    if args.from_theory:
        mesh, problem, vals = _theory_candidate(args.from_theory)
        space = build_space(mesh, problem)
        u = parse_target(args.target) if args.target else _default_target(problem)
    else:
        if not args.mesh or not args.coeffs:
            raise ParseError("certify needs --from-theory NAME or both --mesh and --coeffs")
        space, u = _space_and_target(args)
        vals = _floats(Path(args.coeffs).read_text())
        if len(vals) == space.num_free:
            vals = list(space.lift(np.array(vals)).coeffs)
    nv = space.mesh.num_vertices
    if len(vals) != nv:
        raise ParseError(f"expected {nv} or {space.num_free} coefficients, got {len(vals)}")
    res = certify_l1(space, space.function(np.array(vals)), u)
    line = f"{res.verdict.value} margin={res.margin:.6g}"
    if res.violated_node is not None:
        line += f" node={res.violated_node}"
    print(line)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    table = experiments.reproduce(args.figure)
    out, close = _open_out(args.output)
    try:
        experiments.write_csv(table, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


# ------------------------------------------------------------------ driver

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lqgibbs", description="L^q best approximation by P1 finite elements.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-mesh", help="write one of the structured square meshes")
    g.add_argument("--pattern", required=True, choices=[x.value for x in Pattern])
    g.add_argument("--refine", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_mesh)

    m = sub.add_parser("mesh-check", help="no-overshoot conditions or 2D area balance")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--h", help="comma-separated element lengths")
    src.add_argument("--mesh")
    m.set_defaults(func=cmd_mesh_check)

    def common(sp):
        sp.add_argument("--mesh", required=True)
        sp.add_argument("--problem", choices=[x.value for x in Problem])
        sp.add_argument("--target")
        sp.add_argument("-o", "--output")

    s = sub.add_parser("solve", help="one L^q best approximation")
    common(s)
    s.add_argument("--q", required=True, type=float)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="continuation over decreasing q")
    common(w)
    w.add_argument("--q", required=True, help="a:b:step or comma list, decreasing")
    w.add_argument("--keep-going", action="store_true",
                   help="write NA for exponents that fail instead of stopping")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("certify", help="L^1 optimality certificate for a candidate")
    c.add_argument("--mesh")
    c.add_argument("--problem", choices=[x.value for x in Problem])
    c.add_argument("--target")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--coeffs", help="file with all nodal values or free values only")
    src.add_argument("--from-theory", dest="from_theory")
    c.set_defaults(func=cmd_certify)

    r = sub.add_parser("reproduce", help="CSV table for a figure of the study")
    r.add_argument("figure")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reproduce)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one command and return its exit status."""
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (LqGibbsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:  # pragma: no cover - console entry point
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
