import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lqgibbs.errors import DegenerateElement, InvalidMesh, ParseError, Unsupported
from lqgibbs.experiments import load_unstructured
from lqgibbs.mesh import (INFLOW, INTERIOR, OUTFLOW, Pattern, TriMesh, affine_to_reference,
                          criss_cross_mesh, format_mesh, interval_mesh, load_mesh, parse_mesh,
                          save_mesh, structured_square_mesh)


def test_uniform_interval_mesh():
    m = interval_mesh([0, 0.25, 0.5, 0.75, 1])
    assert m.num_elements == 4
    np.testing.assert_allclose(m.lengths, 0.25)


def test_single_element():
    m = interval_mesh([0, 1])
    assert m.num_elements == 1 and m.lengths[0] == 1.0


def test_three_element_lengths():
    np.testing.assert_allclose(interval_mesh([0, 0.1, 0.55, 1]).lengths, [0.1, 0.45, 0.45])


@pytest.mark.parametrize("bad", [[0, 0.5, 0.5, 1], [1, 0], [0.3], []])
def test_interval_mesh_rejects_bad_breakpoints(bad):
    with pytest.raises(InvalidMesh):
        interval_mesh(bad)


@pytest.mark.parametrize("pattern,ntri,nv", [(Pattern.MESH1, 4, 5), (Pattern.MESH2, 8, 9),
                                             (Pattern.MESH3, 8, 9), (Pattern.MESH4, 8, 9)])
def test_structured_counts(pattern, ntri, nv):
    m = structured_square_mesh(pattern)
    assert m.num_elements == ntri and m.num_vertices == nv
    assert np.all(m.areas > 0)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-15)


def test_mesh1_centre_node():
    m = structured_square_mesh(Pattern.MESH1)
    c = m.find_vertex((0.5, 0.5))
    assert c is not None
    assert m.markers[c] == INTERIOR


def test_mesh2_to_4_share_vertices_differ_in_diagonals():
    meshes = [structured_square_mesh(p) for p in (Pattern.MESH2, Pattern.MESH3, Pattern.MESH4)]
    for m in meshes[1:]:
        np.testing.assert_array_equal(m.coordinates, meshes[0].coordinates)
    edge_sets = [set(m.edges()) for m in meshes]
    assert edge_sets[0] != edge_sets[1] and edge_sets[0] != edge_sets[2]
    for m in meshes:
        for p in ((0.5, 0.0), (0.5, 0.5), (0.5, 1.0)):
            assert m.find_vertex(p) is not None


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_criss_cross_refinement(k):
    m = structured_square_mesh(Pattern.MESH1, k)
    assert m.num_elements == 4 ** (k + 1)
    counts = m.edge_counts()
    assert set(counts.values()) <= {1, 2}
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-14)


def test_refinement_only_for_mesh1():
    with pytest.raises(Unsupported):
        structured_square_mesh(Pattern.MESH3, 1)


def test_markers_follow_x_extent():
    m = criss_cross_mesh(3)
    x = m.coordinates[:, 0]
    for xi, mk in zip(x, m.markers):
        if xi == 0.0:
            assert mk == INFLOW
        elif xi == 1.0:
            assert mk == OUTFLOW


def test_overlapping_triangles_rejected():
    v = [(0, 0), (1, 0), (0, 1), (1, 1)]
    with pytest.raises(InvalidMesh):
        TriMesh.build(v, [(0, 1, 2), (0, 1, 3), (1, 3, 2)])


@pytest.mark.parametrize("pattern", list(Pattern))
def test_round_trip_structured(tmp_path, pattern):
    m = structured_square_mesh(pattern)
    path = tmp_path / "m.lqmesh"
    save_mesh(m, path)
    back = load_mesh(path)
    assert back == m
    np.testing.assert_array_equal(back.coordinates, m.coordinates)
    np.testing.assert_array_equal(back.cells, m.cells)


@given(st.lists(st.floats(1e-3, 10.0), min_size=1, max_size=30),
       st.floats(-5.0, 5.0))
def test_round_trip_interval_bit_exact(lengths, start):
    x = start + np.concatenate([[0.0], np.cumsum(lengths)])
    m = interval_mesh(x)
    back = parse_mesh(format_mesh(m))
    assert np.array_equal(back.breakpoints, m.breakpoints)


def test_bundled_mesh_has_seven_outflow_neighbours():
    m = load_unstructured("a")
    assert m.num_vertices == 54
    out = {i for i, mk in enumerate(m.markers) if mk == OUTFLOW}
    near = set()
    for a, b in m.edges():
        if a in out and b not in out and m.markers[b] == INTERIOR:
            near.add(b)
        if b in out and a not in out and m.markers[a] == INTERIOR:
            near.add(a)
    assert len(near) == 7


def _text(m):
    return format_mesh(m).splitlines()


def test_parse_rejects_clockwise_triangle():
    lines = _text(structured_square_mesh(Pattern.MESH2))
    a, b, c = lines[2 + 9].split()
    lines[2 + 9] = f"{a} {c} {b}"
    with pytest.raises(ParseError, match="orientation") as exc:
        parse_mesh("\n".join(lines))
    assert exc.value.line == 12


@pytest.mark.parametrize("mutate,line", [
    (lambda L: ["lqmesh 2 2"] + L[1:], 1),
    (lambda L: L[:1] + ["9 x"] + L[2:], 2),
    (lambda L: L[:3] + ["0.5"] + L[4:], 4),
    (lambda L: L[:-1], 0),
    (lambda L: L[:-1] + ["Z"], 28),
    (lambda L: L + ["extra"], 29),
])
def test_parse_errors_carry_line(mutate, line):
    lines = mutate(_text(structured_square_mesh(Pattern.MESH2)))
    with pytest.raises(ParseError) as exc:
        parse_mesh("\n".join(lines))
    if line:
        assert exc.value.line == line


def test_affine_map_to_reference():
    tri = np.array([[0.2, 0.1], [1.0, 0.3], [0.4, 0.9]])
    A = affine_to_reference(tri)
    np.testing.assert_allclose(A(tri), [[0, 0], [1, 0], [0, 1]], atol=1e-14)
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    assert A.jacobian_abs == pytest.approx(area / 0.5, rel=1e-14)
    np.testing.assert_allclose(A.inverse(A(tri)), tri, atol=1e-14)


def test_affine_map_degenerate():
    with pytest.raises(DegenerateElement):
        affine_to_reference([[0, 0], [1, 1], [2, 2]])
