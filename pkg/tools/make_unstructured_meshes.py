"""Write the three hand-made meshes A, B and C to ``src/lqgibbs/data``.

Each mesh is a column-wise triangulation of the unit square with nine rows
of nodes.  The interior nodes next to the outflow boundary ``x = 1`` sit on
a final column whose distance to the boundary controls the area balance
checked by ``lqgibbs.certify.area_heuristic_2d``:

* Mesh A alternates: nodes 1, 4 and 7 sit close to the boundary, nodes
  2, 3, 5 and 6 sit far from it.
* Mesh B puts every such node at ``x = 0.8``; Mesh C at ``x = 0.9``.

Interior nodes away from the boundary get a small deterministic jitter and
the quad diagonals alternate, so no mesh is a tensor grid.

Run from the repository root: ``python3 tools/make_unstructured_meshes.py``.
"""
from pathlib import Path

import numpy as np

from lqgibbs.certify import area_heuristic_2d
from lqgibbs.mesh import TriMesh, save_mesh

ROWS = 9
LEFT_COLUMNS = (0.0, 0.18, 0.37, 0.55)
JITTER = 0.025


def build(last_column):
    ys = np.linspace(0.0, 1.0, ROWS)
    columns = [np.full(ROWS, x) for x in LEFT_COLUMNS] + [np.asarray(last_column), np.ones(ROWS)]
    verts, index = [], {}
    for j, xs in enumerate(columns):
        for k in range(ROWS):
            x, y = xs[k], ys[k]
            interior = 0 < j < len(LEFT_COLUMNS) and 0 < k < ROWS - 1
            if interior:
                # deterministic, sign-alternating perturbation
                x += JITTER * np.sin(3.1 * j + 1.7 * k)
                y += JITTER * np.cos(2.3 * j + 0.9 * k)
            index[j, k] = len(verts)
            verts.append((x, y))
    tris = []
    for j in range(len(columns) - 1):
        for k in range(ROWS - 1):
            a, b = index[j, k], index[j + 1, k]
            c, d = index[j + 1, k + 1], index[j, k + 1]
            if (j + k) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return TriMesh.build(np.array(verts), np.array(tris))


def main():
    near, far = 0.9, 0.7
    a_col = np.array([0.8, near, far, far, near, far, far, near, 0.8])
    meshes = {
        "mesh_a": build(a_col),
        "mesh_b": build(np.full(ROWS, 0.8)),
        "mesh_c": build(np.full(ROWS, 0.9)),
    }
    out = Path(__file__).resolve().parents[1] / "src" / "lqgibbs" / "data"
    out.mkdir(parents=True, exist_ok=True)
    for name, m in meshes.items():
        save_mesh(m, out / f"{name}.lqmesh")
        flags = [(r.point, round(r.outflow_area, 4), round(r.remaining_area, 4), r.flag)
                 for r in area_heuristic_2d(m)]
        print(name, m.num_vertices, m.num_elements)
        for f in flags:
            print("   ", f)


if __name__ == "__main__":
    main()
