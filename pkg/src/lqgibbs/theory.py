"""Closed-form and root-finding results for the model problems.

All scalar roots are found by bisection on known brackets: speed is
irrelevant at this scale and bisection cannot wander out of the bracket.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

from scipy.optimize import bisect

from .errors import DomainError, NumericalError, PreconditionError

ROOT_TOL = 1e-13
THETA_THRESHOLD = 1.0 - 1.0 / math.sqrt(2.0)


def _root(g: Callable[[float], float], lo: float, hi: float, widen_to: Optional[float] = None) -> float:
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if glo * ghi > 0.0 and widen_to is not None:
        hi = widen_to
        ghi = g(hi)
    if ghi == 0.0:
        return hi
    if glo * ghi > 0.0:
        raise NumericalError(f"no sign change on [{lo}, {hi}]")
    return bisect(g, lo, hi, xtol=ROOT_TOL, rtol=1e-15, maxiter=400)


def _check_h(h):
    if not 0.0 < h < 1.0:
        raise DomainError(f"h must lie in (0, 1), got {h}")


def _pow_frac(base: float, expo: float) -> float:
    """``base ** expo`` for ``base >= 0``, stable when ``expo`` is tiny."""
    if base <= 0.0:
        return 0.0 if expo > 0.0 else 1.0
    return math.exp(expo * math.log(base))


# ------------------------------------------------------------- two elements

def alpha_two_element_l1(h: float) -> float:
    """Free nodal value of the L^1-best approximation on ``(0, 1-h), (1-h, 1)``.

    >>> alpha_two_element_l1(0.25)
    1.0
    """
    _check_h(h)
    return 1.0 if h <= 0.5 else math.sqrt(2.0 * h)


def two_element_lq_equation(alpha: float, h: float, q: float) -> float:
    """Optimality equation for the two-element mesh, zero at the L^q solution."""
    d = alpha - 1.0
    return (-(1.0 - h) * alpha * alpha * q * _pow_frac(d, q - 1.0)
            - h * (alpha * q + 1.0) * _pow_frac(d, q) + h)


def alpha_two_element_lq(h: float, q: float) -> float:
    """Free nodal value of the L^q-best approximation (``1 < q``) on the two-element mesh.

    Parameters
    ----------
    h : float
        Length of the last element, in ``(0, 1)``.
    q : float
        Exponent, ``q > 1``.

    Returns
    -------
    float
        The root ``alpha > 1`` of the optimality equation, to 1e-13.

    Raises
    ------
    DomainError
        If ``h`` or ``q`` is out of range.
    """
    _check_h(h)
    if not q > 1.0:
        raise DomainError(f"q must exceed 1, got {q}")
    # the equation equals h > 0 at alpha = 1 and -2q(2 - h) < 0 at alpha = 2
    return _root(lambda a: two_element_lq_equation(a, h, q), 1.0, 2.0, widen_to=4.0)


# ------------------------------------------------------------------ Mesh 1/2

def mesh1_l1_polynomial(alpha: float) -> float:
    return 2.0 * alpha ** 3 - 5.0 * alpha + 2.0


def mesh2_l1_polynomial(alpha: float) -> float:
    return -3.0 * alpha ** 3 + 8.0 * alpha - 4.0


def mesh1_lq_equation(alpha: float, q: float) -> float:
    poly = 4.0 * alpha ** 3 * q + 4.0 * (1.0 - q) * alpha ** 2 + (q - 6.0) * alpha + 2.0
    return _pow_frac(alpha - 1.0, q - 1.0) * poly - alpha * (q + 4.0) + 2.0


def alpha_mesh1_l1() -> float:
    """Centre value of the L^1-best approximation on the criss-cross square."""
    return _root(mesh1_l1_polynomial, 1.0, 2.0)


def alpha_mesh2_l1() -> float:
    """Overshoot at ``(0.5, 0)`` of an L^1-best approximation on Mesh 2."""
    return _root(mesh2_l1_polynomial, 1.0, 2.0)


def alpha_mesh1_lq(q: float) -> float:
    """Centre value of the L^q-best approximation on the criss-cross square, ``q > 1``."""
    if not q > 1.0:
        raise DomainError(f"q must exceed 1, got {q}")
    # equals -q - 2 at alpha = 1 and 16 q at alpha = 2
    return _root(lambda a: mesh1_lq_equation(a, q), 1.0, 2.0, widen_to=4.0)


# ------------------------------------------------------- graded 1D meshes

class Verdict(enum.Enum):
    SUFFICIENT_GRADED = "SUFFICIENT_GRADED"
    SUFFICIENT_MINLAST = "SUFFICIENT_MINLAST"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class ThetaSchedule:
    """Backward recursion over element lengths ``h_1..h_N`` (1-based indices).

    ``theta[i - 1]`` is ``theta_i`` or ``None`` where the recursion broke
    down (``theta_i^2 < 0``) or was not reached.  ``conditions`` maps each
    index ``i = max(M, 1) .. N-1`` that needs checking to whether
    ``h_i >= (2(1 - theta_{i+1})^2 - 1) h_{i+1}`` holds.
    """

    h: Tuple[float, ...]
    theta_sq: Tuple[Optional[float], ...]
    theta: Tuple[Optional[float], ...]
    M: int
    conditions: Dict[int, bool]
    broken_at: Optional[int]

    @property
    def feasible(self) -> bool:
        return all(self.conditions.values())


def theta_schedule(h: Sequence[float]) -> ThetaSchedule:
    """Evaluate the grading recursion for element lengths ``h``.

    ``theta_N = 0`` and, for ``i = N-1 .. 1``,
    ``theta_i^2 = (1 - (2(1 - theta_{i+1})^2 - 1) h_{i+1} / h_i) / 2``.
    The recursion stops at the first ``i`` with ``theta_i^2 < 0``; that is
    data, not an error.
    """
    hs = tuple(float(x) for x in h)
    N = len(hs)
    if N < 2 or any(x <= 0.0 for x in hs):
        raise DomainError("need at least two positive element lengths")
    sq: list = [None] * N
    th: list = [None] * N
    sq[N - 1] = 0.0
    th[N - 1] = 0.0
    broken = None
    for i in range(N - 1, 0, -1):          # 1-based i, element index i-1
        nxt = th[i]                         # theta_{i+1}
        coef = 2.0 * (1.0 - nxt) ** 2 - 1.0
        val = 0.5 * (1.0 - coef * hs[i] / hs[i - 1])
        sq[i - 1] = val
        if val < 0.0:
            broken = i
            break
        th[i - 1] = math.sqrt(val)
    M = max([i for i in range(1, N) if th[i - 1] is not None and th[i - 1] >= THETA_THRESHOLD],
            default=0)
    conditions = {}
    for i in range(max(M, 1), N):
        if sq[i - 1] is None:
            break
        # h_i >= (2(1 - theta_{i+1})^2 - 1) h_{i+1}  <=>  theta_i^2 >= 0
        conditions[i] = sq[i - 1] >= 0.0
    return ThetaSchedule(hs, tuple(sq), tuple(th), M, conditions, broken)


def check_no_overshoot_l1(h: Sequence[float]) -> Verdict:
    """Which sufficient condition (if any) guarantees an L^1 solution without overshoot.

    ``UNKNOWN`` means neither condition holds; since both are only
    sufficient, it does not imply that an overshoot must occur.
    """
    hs = [float(x) for x in h]
    if len(hs) < 2 or any(x <= 0.0 for x in hs):
        raise DomainError("need at least two positive element lengths")
    if hs[-1] <= min(hs[:-1]):
        return Verdict.SUFFICIENT_MINLAST
    if theta_schedule(hs).feasible:
        return Verdict.SUFFICIENT_GRADED
    return Verdict.UNKNOWN


def interior_overshoot_value(h_prev: float, h_last: float, earlier: Sequence[float] = ()) -> float:
    """L^1 value at the last interior node when the last element is the largest.

    Requires ``h_last > h_prev > 0`` and ``h_prev <= h_i`` for all
    ``earlier`` element lengths.

    >>> round(interior_overshoot_value(1.0, 2.0), 6)
    1.154701
    """
    if not h_last > h_prev > 0.0:
        raise PreconditionError("need h_last > h_prev > 0")
    if any(h_prev > x for x in earlier):
        raise PreconditionError("h_prev must not exceed any earlier element length")
    return math.sqrt(2.0 * h_last / (h_last + h_prev))


# --------------------------------------------------------- jump discontinuity

@dataclass(frozen=True)
class JumpSolution:
    """Nodal values at ``-h``, ``0`` and ``h`` on the mesh ``-1 < -h < 0 < h < 1``."""

    alpha: float
    beta: float
    gamma: float

    def coefficients(self) -> Tuple[float, float, float, float, float]:
        return (-1.0, self.alpha, self.beta, self.gamma, 1.0)


def jump_family(h: float, beta: float) -> JumpSolution:
    """The L^1-best approximation of ``sgn(x)`` with prescribed value ``beta`` at 0.

    Raises
    ------
    DomainError
        If ``h`` is outside ``(0, 1)`` or ``|beta| > 1``.
    """
    _check_h(h)
    if abs(beta) > 1.0:
        raise DomainError(f"|beta| must not exceed 1, got {beta}")
    if h <= 0.5:
        return JumpSolution(-1.0, float(beta), 1.0)
    s = math.sqrt(2.0 * h)
    return JumpSolution(-s - beta * (s - 1.0), float(beta), s - beta * (s - 1.0))
