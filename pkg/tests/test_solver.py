import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from lqgibbs.errors import InvalidProblem, NonConvergence
from lqgibbs.experiments import load_unstructured
from lqgibbs.fespace import Problem, TargetFunction, build_space
from lqgibbs.mesh import Pattern, criss_cross_mesh, interval_mesh, jump_mesh, structured_square_mesh
from lqgibbs.signsplit import lq_error, residual_vector
from lqgibbs.solver import (SolverOptions, extrapolate_to_l1, q_path, solve_l2, solve_lq,
                            sweep_q)
from lqgibbs.theory import alpha_two_element_lq

ONE = TargetFunction.constant_one()
SGN = TargetFunction.sgn_x()


def _mass_projection(space):
    """Constrained L^2 projection of u = 1 from the textbook P1 mass matrix."""
    mesh = space.mesh
    n = mesh.num_vertices
    M = np.zeros((n, n))
    b = np.zeros(n)
    d = mesh.dim
    local = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    for cell, meas in zip(mesh.cells, mesh.measures):
        M[np.ix_(cell, cell)] += meas * local
        b[cell] += meas / (d + 1)
    free = list(space.free_nodes)
    fixed = sorted(space.constrained)
    g = np.array([space.constrained[k] for k in fixed])
    rhs = b[free] - M[np.ix_(free, fixed)] @ g
    return scipy.linalg.solve(M[np.ix_(free, free)], rhs)


@pytest.mark.parametrize("mesh", [
    structured_square_mesh(Pattern.MESH1), structured_square_mesh(Pattern.MESH2),
    structured_square_mesh(Pattern.MESH4), criss_cross_mesh(4), load_unstructured("a"),
    interval_mesh([0, 0.1, 0.55, 1]), interval_mesh(np.linspace(0, 1, 17)),
], ids=["mesh1", "mesh2", "mesh4", "cc4", "mesh_a", "three", "uniform16"])
def test_q2_equals_linear_projection(mesh):
    space = build_space(mesh, Problem.BOUNDARY_2D if mesh.dim == 2 else Problem.BOUNDARY_1D)
    ref = _mass_projection(space)
    np.testing.assert_allclose(solve_l2(space, ONE).free_values, ref, rtol=0, atol=1e-12)
    via_lq = solve_lq(space, ONE, SolverOptions(q_target=2.0)).coeffs.free_values
    np.testing.assert_allclose(via_lq, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("q", [1.2, 2.0, 4.0])
def test_two_element_solver_matches_closed_form(h, q):
    space = build_space(interval_mesh([0, 1 - h, 1]), Problem.BOUNDARY_1D)
    rep = solve_lq(space, ONE, SolverOptions(q_target=q))
    assert rep.converged
    assert rep.coeffs.free_values[0] == pytest.approx(alpha_two_element_lq(h, q), abs=1e-6)


def _symmetric_jump_mesh(inner):
    xs = np.cumsum(inner) / (sum(inner) + 1.0)
    return interval_mesh(np.concatenate([[-1.0], -xs[::-1], [0.0], xs, [1.0]]))


@settings(max_examples=12)
@given(st.lists(st.floats(0.1, 1.0), min_size=1, max_size=3), st.sampled_from([1.5, 2.0, 3.0, 1.2]))
def test_jump_solutions_are_odd(inner, q):
    space = build_space(_symmetric_jump_mesh(inner), Problem.JUMP_1D)
    c = solve_lq(space, SGN, SolverOptions(q_target=q)).coeffs.coeffs
    assert np.abs(c + c[::-1]).max() <= 1e-9


@pytest.mark.parametrize("q", [1.3, 2.0, 3.0])
def test_jump_mesh_solution_is_odd(q):
    space = build_space(jump_mesh(0.7), Problem.JUMP_1D)
    c = solve_lq(space, SGN, SolverOptions(q_target=q)).coeffs.coeffs
    assert np.abs(c + c[::-1]).max() <= 1e-9


def test_solution_minimises_lq_error():
    space = build_space(structured_square_mesh(Pattern.MESH3), Problem.BOUNDARY_2D)
    f = solve_lq(space, ONE, SolverOptions(q_target=1.5)).coeffs
    assert np.abs(residual_vector(f, ONE, 1.5)).max() <= 1e-10
    base = lq_error(f, ONE, 1.5)
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = space.lift(f.free_values + 1e-3 * rng.normal(size=space.num_free))
        assert lq_error(g, ONE, 1.5) >= base - 1e-14


def test_q_path_steps():
    assert q_path(2.0, 2.0) == [2.0]
    down = q_path(2.0, 1.2)
    assert down[-1] == 1.2 and all(a > b for a, b in zip(down, down[1:]))
    assert down[0] == pytest.approx(1.7)
    up = q_path(2.0, 4.0)
    assert up[-1] == 4.0 and all(a < b for a, b in zip(up, up[1:]))


@pytest.mark.parametrize("kwargs", [dict(q_target=1.0), dict(q_target=1.5, q_path=(1.8, 1.5)),
                                    dict(q_target=1.5, q_path=(2.0, 0.9)),
                                    dict(q_target=1.5, eps_schedule=(-1.0,))])
def test_options_validation(kwargs):
    with pytest.raises(InvalidProblem):
        SolverOptions(**kwargs)


def test_explicit_path_is_used():
    space = build_space(interval_mesh([0, 0.5, 1]), Problem.BOUNDARY_1D)
    rep = solve_lq(space, ONE, SolverOptions(q_target=1.5, q_path=(2.0, 1.8, 1.6)))
    qs = [s[0] for s in rep.stages]
    assert 1.8 in qs and 1.6 in qs and qs[-1] == 1.5


def test_sweep_is_monotone_for_constant_target():
    space = build_space(structured_square_mesh(Pattern.MESH3), Problem.BOUNDARY_2D)
    rows = sweep_q(space, ONE, [2.0, 1.8, 1.5, 1.3])
    vals = [r.max_value for r in rows]
    assert vals[0] == pytest.approx(19 / 14, abs=1e-12)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_sweep_requires_decreasing_q():
    space = build_space(interval_mesh([0, 0.5, 1]), Problem.BOUNDARY_1D)
    with pytest.raises(InvalidProblem):
        sweep_q(space, ONE, [1.5, 2.0])


def test_sweep_failure_carries_partial_rows():
    space = build_space(structured_square_mesh(Pattern.MESH2), Problem.BOUNDARY_2D)
    with pytest.raises(NonConvergence) as exc:
        sweep_q(space, ONE, [2.0, 1.5, 1.02])
    assert [r.q for r in exc.value.partial] == [2.0, 1.5]
    assert exc.value.stage is not None


def test_extrapolation_linear_in_q():
    space = build_space(interval_mesh([0, 0.1, 0.55, 1]), Problem.BOUNDARY_1D)
    rows = sweep_q(space, ONE, [1.2, 1.01, 1.005, 1.002])
    f = extrapolate_to_l1(rows)
    a, b = rows[-1].coeffs.free_values, rows[-2].coeffs.free_values
    np.testing.assert_allclose(f.free_values, a + (a - b) * (0.002 / 0.003), rtol=1e-12)
    with pytest.raises(InvalidProblem):
        extrapolate_to_l1(rows[:2])
