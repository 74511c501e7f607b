import csv
import json

import numpy as np

from polyxfem import output
from polyxfem.enrichment import CrackGeometry
from polyxfem.material import NeoHookeanCompressible
from polyxfem.mesh import Domain, structured_quad_mesh
from polyxfem.solver import LoadProgram, Model, Support, newton_solve


def read_legacy_vtk(path):
    """Minimal legacy POLYDATA reader: points, polygons and data blocks."""
    tok = open(path).read().split("\n")
    assert tok[0] == "# vtk DataFile Version 3.0"
    assert tok[2] == "ASCII" and tok[3] == "DATASET POLYDATA"
    words = " ".join(tok[4:]).split()
    i = 0
    assert words[i] == "POINTS"
    n = int(words[i + 1])
    i += 3
    pts = np.array(words[i:i + 3 * n], float).reshape(n, 3)
    i += 3 * n
    assert words[i] == "POLYGONS"
    nc, size = int(words[i + 1]), int(words[i + 2])
    i += 3
    conn = np.array(words[i:i + size], int)
    i += size
    polys, k = [], 0
    while k < size:
        polys.append(conn[k + 1:k + 1 + conn[k]])
        k += conn[k] + 1
    assert len(polys) == nc
    return pts, polys, words[i:]


def small_state():
    m = structured_quad_mesh(Domain.rectangle(0, 0, 2, 2), 5, 5)
    model = Model(m, NeoHookeanCompressible.from_engineering(1e3, 0.3),
                  CrackGeometry(np.array([[0.0, 1.0], [1.0, 1.0]])))
    st = newton_solve(model, [LoadProgram("displacement", "top", 0.05, 2)],
                      [Support("bottom", "y"), Support("corner_bl", "x")])
    return model, st.u


def test_vtk_golden_header(tmp_path):
    p = tmp_path / "tri.vtk"
    output.write_vtk(p, np.array([[0, 0], [1, 0], [0, 1.0]]), [np.array([0, 1, 2])], {"a": [1.5]}, title="t")
    assert p.read_text().splitlines()[:6] == ["# vtk DataFile Version 3.0", "t", "ASCII", "DATASET POLYDATA",
                                              "POINTS 3 double", "0 0 0"]
    pts, polys, rest = read_legacy_vtk(p)
    assert len(polys) == 1 and list(polys[0]) == [0, 1, 2]
    assert rest[:2] == ["CELL_DATA", "1"]


def test_state_vtk_splits_cut_elements(tmp_path):
    model, u = small_state()
    p = tmp_path / "s.vtk"
    output.write_state_vtk(p, model, u, 2)
    pts, polys, rest = read_legacy_vtk(p)
    n_split = int(model.emap.split.sum())
    assert len(polys) == model.mesh.n_elements + n_split
    assert "von_mises" in rest and "displacement" in rest
    # every polygon keeps positive area in the deformed configuration
    for r in polys:
        x, y = pts[r, 0], pts[r, 1]
        assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_element_fields_uniform_under_homogeneous_stretch():
    m = structured_quad_mesh(Domain.rectangle(0, 0, 1, 1), 3, 3)
    model = Model(m, NeoHookeanCompressible.from_engineering(1e3, 0.3))
    u = np.zeros(model.n_dofs)
    u[1::2][: m.n_nodes] = 0.1 * m.nodes[:, 1]
    f = output.element_fields(model, u)
    assert np.allclose(f["sigma_yy"], f["sigma_yy"][0])
    assert (f["von_mises"] > 0).all()


def test_csv_and_json(tmp_path):
    output.write_csv(tmp_path / "a.csv", [[1, 0.5], [2, np.float64(0.25)]], ["step", "J"])
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows == [["step", "J"], ["1", "0.5"], ["2", "0.25"]]
    output.write_json(tmp_path / "a.json", {"x": np.arange(2), "y": np.float64(1.5)})
    assert json.loads((tmp_path / "a.json").read_text()) == {"x": [0, 1], "y": 1.5}
