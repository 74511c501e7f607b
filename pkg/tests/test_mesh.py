import io

import numpy as np
import pytest

from polyxfem import mesh as pm
from polyxfem.basis import polygon_area


def unit_voronoi(n=60, seed=0):
    return pm.generate_voronoi_mesh(pm.Domain.rectangle(0, 0, 1, 1), n, 30, seed)


def test_voronoi_mesh_tiles_domain():
    m = unit_voronoi()
    pm.validate_mesh(m)
    assert np.isclose(m.areas().sum(), 1.0, rtol=1e-12)
    assert (m.areas() > 0).all()
    assert pm.hanging_nodes(m) == []
    assert abs(m.n_elements - 60) <= 3


def test_voronoi_mesh_deterministic():
    a, b = unit_voronoi(seed=3), unit_voronoi(seed=3)
    assert np.array_equal(a.nodes, b.nodes)
    assert all(np.array_equal(x, y) for x, y in zip(a.elements, b.elements))


def test_boundary_sets_rectangle():
    m = unit_voronoi()
    for name, coord, val in (("bottom", 1, 0.0), ("right", 0, 1.0), ("top", 1, 1.0), ("left", 0, 0.0)):
        nodes = m.node_set(name)
        assert len(nodes) >= 2
        assert np.allclose(m.nodes[nodes, coord], val)
    assert np.allclose(m.nodes[m.node_set("corner_tr")[0]], [1.0, 1.0])
    # the edge sets cover the whole perimeter
    total = sum(np.linalg.norm(np.diff(m.nodes[m.edge_set(s)], axis=1), axis=2).sum()
                for s in ("bottom", "right", "top", "left"))
    assert np.isclose(total, 4.0)


def test_structured_quad_mesh_counts():
    m = pm.structured_quad_mesh(pm.Domain.rectangle(0, 0, 2, 2), 49, 49)
    assert m.n_elements == 49 * 49
    assert m.n_nodes == 50 * 50
    assert np.allclose(m.areas(), (2 / 49) ** 2)


def test_quad_mesh_with_hole_clips_cells():
    d = pm.Domain.rectangle(0, 0, 4, 6, holes=[(2.8, 4.2, 0.5)])
    m = pm.structured_quad_mesh(d, 20, 30)
    pm.validate_mesh(m)
    assert np.isclose(m.areas().sum(), d.area, rtol=1e-9)
    hole = m.node_set("hole0")
    assert np.allclose(np.hypot(*(m.nodes[hole] - [2.8, 4.2]).T), 0.5, rtol=1e-3)


def test_refined_mesh_embeds_structured_zone():
    d = pm.Domain.rectangle(0, 0, 2, 2)
    h = 1.0 / 9.5
    spec = pm.RefinementSpec((0.0, 1 - 2.5 * h, 1 + 3 * h, 1 + 2.5 * h), h)
    crack = np.array([[0.0, 1.0], [1.0, 1.0]])
    m = pm.build_refined_mesh(d, 200, spec, crack, 30, 0)
    pm.validate_mesh(m)
    assert pm.hanging_nodes(m) == []
    assert np.isclose(m.areas().sum(), 4.0, rtol=1e-12)
    (x0, y0, x1, y1), nx, ny = pm.refinement_box(spec, d)
    inside = [e for e in range(m.n_elements)
              if np.all((m.ring(e) >= [x0 - 1e-12, y0 - 1e-12]) & (m.ring(e) <= [x1 + 1e-12, y1 + 1e-12]))]
    quads = [e for e in inside if len(m.elements[e]) == 4 and np.isclose(m.areas()[e], h * h)]
    assert len(quads) == nx * ny


def test_crack_outside_zone_rejected():
    d = pm.Domain.rectangle(0, 0, 2, 2)
    with pytest.raises(ValueError, match="margin"):
        pm.check_crack_in_zone(np.array([[0, 1], [1, 1]]), (0, 0.8, 0.5, 1.2), 0.1, d)
    pm.check_crack_in_zone(np.array([[0, 1], [1, 1]]), (0, 0.7, 1.3, 1.3), 0.1, d)


def test_refinement_spec_validation():
    with pytest.raises(ValueError):
        pm.RefinementSpec((0, 0, 1, 1), 0.0)
    with pytest.raises(ValueError):
        pm.RefinementSpec((1, 0, 0, 1), 0.1)


def test_mesh_text_round_trip():
    m = unit_voronoi(20)
    buf = io.StringIO()
    pm.write_mesh(m, buf)
    buf.seek(0)
    r = pm.read_mesh(buf)
    assert np.array_equal(r.nodes, m.nodes)
    assert all(np.array_equal(a, b) for a, b in zip(r.elements, m.elements))
    assert set(r.boundary_sets) == set(m.boundary_sets)


def test_read_mesh_rejects_bad_header():
    with pytest.raises(ValueError, match="line 1"):
        pm.read_mesh(io.StringIO("MESH 2\n"))


def test_validate_rejects_clockwise():
    m = pm.PolyMesh(np.array([[0, 0], [1, 0], [0, 1]], float), [np.array([0, 2, 1])])
    with pytest.raises(ValueError, match="counter-clockwise"):
        pm.validate_mesh(m)


def test_invalid_seed_counts():
    d = pm.Domain.rectangle(0, 0, 1, 1)
    with pytest.raises(ValueError):
        pm.generate_voronoi_mesh(d, 0)
    with pytest.raises(ValueError):
        pm.generate_voronoi_mesh(pm.Domain.rectangle(0, 0, 1e-6, 1e-6), 1000)


def test_elements_counter_clockwise_everywhere():
    m = unit_voronoi(40, 5)
    assert all(polygon_area(m.ring(e)) > 0 for e in range(m.n_elements))
