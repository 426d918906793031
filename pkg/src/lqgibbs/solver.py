"""Best approximation in L^q by smoothed Newton with continuation.

For ``q = 2`` the optimality system is linear and one solve gives the
projection.  For other ``q`` we walk from ``q = 2`` towards the target
exponent, warm-starting each stage from the previous one.  Within a stage
the kernel ``sgn(r)|r|^(q-1)`` is first replaced by the smooth
``r (r^2 + eps^2)^((q-2)/2)`` for a decreasing sequence of ``eps``, and a
final polishing phase drives the exact residual to tolerance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import InvalidProblem, NonConvergence
from .fespace import FEFunction, P1Space, TargetFunction, nodal_overshoot
from .signsplit import assemble

log = logging.getLogger(__name__)

DOWN_FACTOR = 0.7
UP_FACTOR = 1.4
POLISH_JAC_EPS = 1e-12
EPS_FLOOR = 1e-14
STEP_REL_TOL = 128 * np.finfo(float).eps


def q_path(q_start: float, q_target: float, snap: float = 1e-3) -> List[float]:
    """Continuation exponents from ``q_start`` (exclusive) to ``q_target``.

    ``q - 1`` shrinks by 0.7 per step going down and grows by 1.4 going up,
    until the next step would come within ``snap`` of (or pass) the target,
    which is then the last entry.
    """
    path = []
    q = q_start
    if q_target < q_start:
        while True:
            q = 1.0 + DOWN_FACTOR * (q - 1.0)
            if q - q_target <= snap:
                break
            path.append(q)
    elif q_target > q_start:
        while True:
            q = 1.0 + UP_FACTOR * (q - 1.0)
            if q_target - q <= snap:
                break
            path.append(q)
    path.append(q_target)
    return path


@dataclass(frozen=True)
class SolverOptions:
    """Settings for :func:`solve_lq`.

    ``q_path=None`` uses :func:`q_path` from 2.  ``polish_iters`` bounds the
    frozen-Jacobian iterations on the exact residual at the end of a stage.
    """

    q_target: float
    q_path: Optional[Tuple[float, ...]] = None
    eps_schedule: Tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-6)
    newton_tol: float = 1e-10
    max_iters: int = 50
    damping: float = 0.5
    max_halvings: int = 30
    polish_iters: int = 20

    def __post_init__(self):
        if not self.q_target > 1.0:
            raise InvalidProblem("q_target must exceed 1")
        if self.q_path is not None:
            path = tuple(float(q) for q in self.q_path)
            if not path or path[0] != 2.0:
                raise InvalidProblem("q_path must start at 2")
            if any(q <= 1.0 for q in path):
                raise InvalidProblem("q_path entries must exceed 1")
            object.__setattr__(self, "q_path", path)
        if any(e < 0 for e in self.eps_schedule):
            raise InvalidProblem("eps_schedule entries must be non-negative")

    def path(self) -> Tuple[float, ...]:
        if self.q_path is not None:
            p = list(self.q_path[1:])
            if not p or p[-1] != self.q_target:
                p.append(self.q_target)
            return tuple(p)
        return tuple(q_path(2.0, self.q_target))


@dataclass
class SolveReport:
    coeffs: FEFunction
    residual_norm: float
    stages: List[Tuple[float, float, int]] = field(default_factory=list)
    converged: bool = False
    floor_limited: bool = False

    @property
    def q(self) -> float:
        return self.stages[-1][0] if self.stages else 2.0


def _norm(F) -> float:
    return float(np.max(np.abs(F))) if F.size else 0.0


def _step_floor(f) -> float:
    """Newton corrections below this are rounding noise in the coefficients."""
    return STEP_REL_TOL * (1.0 + float(np.max(np.abs(f.coeffs))))


class _Result(NamedTuple):
    f: FEFunction
    nrm: float
    iters: int
    J: Optional[np.ndarray]
    at_floor: bool = False


def _assemble(f, u, q, eps, jac_eps):
    if jac_eps is None or jac_eps == eps:
        return assemble(f, u, q, eps)
    F, _ = assemble(f, u, q, eps, jacobian=False)
    return F, assemble(f, u, q, jac_eps)[1]


def _newton(f, u, q, eps, opts, jac_eps=None) -> _Result:
    """Damped Newton on the (possibly smoothed) residual.

    ``jac_eps`` optionally takes the Jacobian from a different smoothing
    width than the residual.  Stops with ``at_floor`` set when the Newton
    correction is at rounding level, since no further progress is possible.
    """
    space = f.space
    F, J = _assemble(f, u, q, eps, jac_eps)
    nrm = _norm(F)
    for it in range(opts.max_iters):
        if nrm <= opts.newton_tol:
            return _Result(f, nrm, it, J)
        if not (np.all(np.isfinite(J)) and np.isfinite(nrm)):
            raise NonConvergence(f"non-finite Jacobian at q={q}, eps={eps}", stage=(q, eps))
        dc = scipy.linalg.lu_solve(scipy.linalg.lu_factor(J, check_finite=False), -F)
        if _norm(dc) <= _step_floor(f):
            return _Result(f, nrm, it, J, True)
        x = f.free_values
        step = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = space.lift(x + step * dc)
            Ft, Jt = _assemble(trial, u, q, eps, jac_eps)
            nt = _norm(Ft)
            if nt < nrm:
                break
            step *= opts.damping
        else:
            raise NonConvergence(f"line search failed at q={q}, eps={eps} (|F|={nrm:.3e})",
                                 stage=(q, eps))
        f, F, J, nrm = trial, Ft, Jt, nt
    if nrm <= opts.newton_tol:
        return _Result(f, nrm, opts.max_iters, J)
    raise NonConvergence(f"Newton did not converge at q={q}, eps={eps} (|F|={nrm:.3e})",
                         stage=(q, eps))


def _polish(f, u, q, J, opts) -> _Result:
    """Frozen-Jacobian iterations on the exact residual.

    The best iterate seen is kept, since max|F| need not decrease
    monotonically under a frozen Jacobian.
    """
    space = f.space
    F, _ = assemble(f, u, q, 0.0, jacobian=False)
    nrm = _norm(F)
    best, best_nrm = f, nrm
    lu = scipy.linalg.lu_factor(J, check_finite=False)
    for it in range(opts.polish_iters):
        if best_nrm <= opts.newton_tol:
            return _Result(best, best_nrm, it, J)
        f = space.lift(f.free_values + scipy.linalg.lu_solve(lu, -F))
        F, _ = assemble(f, u, q, 0.0, jacobian=False)
        nrm = _norm(F)
        if not np.isfinite(nrm) or nrm > 1e3 * best_nrm:
            break
        if nrm < best_nrm:
            best, best_nrm = f, nrm
    return _Result(best, best_nrm, opts.polish_iters, J)


def solve_l2(space: P1Space, u: TargetFunction) -> FEFunction:
    """Constrained L^2 projection of ``u`` (one linear solve)."""
    f0 = space.lift()
    if space.num_free == 0:
        return f0
    F, J = assemble(f0, u, 2.0)
    return space.lift(scipy.linalg.solve(J, -F, assume_a="sym"))


def _solve_stage(f, u, q, opts, stages) -> _Result:
    if q == 2.0:
        F, J = assemble(f, u, 2.0)
        f = f.space.lift(f.free_values + scipy.linalg.solve(J, -F))
        stages.append((q, 0.0, 1))
        return _Result(f, _norm(assemble(f, u, 2.0, jacobian=False)[0]), 1, J)
    J = None
    for eps in opts.eps_schedule:
        f, _, it, J, _ = _newton(f, u, q, eps, opts)
        stages.append((q, eps, it))
    if J is None:
        J = assemble(f, u, q, 0.0)[1]
    res = _polish(f, u, q, J, opts)
    stages.append((q, 0.0, res.iters))
    # Where the optimum has r = 0 on whole elements (or r decays below
    # rounding level) the exact residual is only Hoelder continuous and the
    # polish stalls at the smoothing scale: keep shrinking eps.
    eps = opts.eps_schedule[-1] if opts.eps_schedule else 1e-6
    while res.nrm > opts.newton_tol and eps > EPS_FLOOR:
        eps *= 1e-2
        log.debug("q=%g: polish stalled at |F|=%.3e, extending schedule to eps=%g",
                  q, res.nrm, eps)
        sm = _newton(res.f, u, q, eps, opts)
        stages.append((q, eps, sm.iters))
        res = _polish(sm.f, u, q, sm.J, opts)
        stages.append((q, 0.0, res.iters))
    if res.nrm > opts.newton_tol:
        # Last resort: Newton on the exact residual.  The exact Jacobian is
        # unbounded where r vanishes for q < 2, so a barely smoothed one is used.
        res = _newton(res.f, u, q, 0.0, opts, jac_eps=POLISH_JAC_EPS)
        stages.append((q, 0.0, res.iters))
    return res


def solve_lq(space: P1Space, u: TargetFunction, opts: SolverOptions,
             initial: Optional[FEFunction] = None, initial_q: float = 2.0) -> SolveReport:
    """L^q-best approximation of ``u`` in ``space``.

    Parameters
    ----------
    space : P1Space
    u : TargetFunction
    opts : SolverOptions
    initial : FEFunction, optional
        Converged solution at exponent ``initial_q`` to continue from.  By
        default the L^2 projection is used with ``initial_q = 2``.
    initial_q : float

    Returns
    -------
    SolveReport
        ``stages`` lists ``(q, eps, iterations)``, with ``eps = 0`` for work
        on the exact residual.  ``floor_limited`` is set when the residual
        could not reach ``newton_tol`` because the remaining Newton
        correction was below rounding level.

    Raises
    ------
    NonConvergence
        If a stage fails; ``stage`` holds its ``(q, eps)``.
    """
    stages: List[Tuple[float, float, int]] = []
    if initial is None:
        f = solve_l2(space, u)
        path = opts.path()
        stages.append((2.0, 0.0, 1))
    else:
        f = initial
        path = tuple(q_path(initial_q, opts.q_target)) if initial_q != opts.q_target else (opts.q_target,)
    if space.num_free == 0:
        return SolveReport(f, 0.0, stages, True)
    res = _Result(f, _norm(assemble(f, u, 2.0, jacobian=False)[0]), 0, None)
    for q in path:
        if q == 2.0 and initial is None:
            continue
        res = _solve_stage(res.f, u, q, opts, stages)
        log.debug("q=%g done, |F|=%.3e", q, res.nrm)
    converged = res.nrm <= opts.newton_tol or res.at_floor
    return SolveReport(res.f, res.nrm, stages, converged, res.at_floor and res.nrm > opts.newton_tol)


@dataclass(frozen=True)
class SweepRow:
    q: float
    coeffs: FEFunction
    max_overshoot: float
    max_value: float
    max_error: float


def _row(q, f, u):
    rep = nodal_overshoot(f, u)
    free = f.free_values
    return SweepRow(q, f, rep.max_over, float(free.max()) if free.size else float("nan"),
                    rep.max_error)


def sweep_q(space: P1Space, u: TargetFunction, q_list: Sequence[float],
            opts: Optional[SolverOptions] = None) -> List[SweepRow]:
    """Solve for each exponent in ``q_list``, warm-starting from the previous one.

    ``q_list`` must be sorted in decreasing order.  On failure the
    :class:`NonConvergence` raised carries the finished rows in ``partial``.
    """
    qs = [float(q) for q in q_list]
    if any(b > a for a, b in zip(qs, qs[1:])):
        raise InvalidProblem("q_list must be sorted in decreasing order")
    rows: List[SweepRow] = []
    f, q_prev = None, 2.0
    for q in qs:
        o = SolverOptions(q_target=q) if opts is None else _with_target(opts, q)
        try:
            if f is None:
                if q == 2.0:
                    f = solve_l2(space, u)
                else:
                    f = solve_lq(space, u, o).coeffs
            elif q != q_prev:
                f = solve_lq(space, u, o, initial=f, initial_q=q_prev).coeffs
        except NonConvergence as exc:
            exc.partial = rows
            raise
        q_prev = q
        rows.append(_row(q, f, u))
    return rows


def _with_target(opts: SolverOptions, q: float) -> SolverOptions:
    return SolverOptions(q_target=q, eps_schedule=opts.eps_schedule, newton_tol=opts.newton_tol,
                         max_iters=opts.max_iters, damping=opts.damping,
                         max_halvings=opts.max_halvings, polish_iters=opts.polish_iters)


def extrapolate_to_l1(rows: Sequence[SweepRow], q_max: float = 1.3, order: int = 1) -> FEFunction:
    """Extrapolate nodal values of a sweep to ``q = 1``.

    The ``order + 1`` rows with the smallest exponents (all ``<= q_max``) are
    fitted by a polynomial in ``q - 1`` of degree ``order`` through those
    points, node by node, and evaluated at ``q - 1 = 0``.  The result is a
    candidate for :func:`lqgibbs.certify.certify_l1`, not a certified optimum.
    """
    pool = sorted((r for r in rows if r.q <= q_max), key=lambda r: r.q)
    if len(pool) < 3:
        raise InvalidProblem(f"need at least 3 sweep rows with q <= {q_max}")
    use = pool[:order + 1]
    x = np.array([r.q - 1.0 for r in use])
    Y = np.array([r.coeffs.free_values for r in use])
    # Lagrange weights at x = 0
    w = np.array([np.prod([xj / (xj - xi) for j, xj in enumerate(x) if j != i])
                  for i, xi in enumerate(x)])
    space = use[0].coeffs.space
    return space.lift(w @ Y)
