import numpy as np
import pytest

from polyxfem import enrichment as en
from polyxfem.basis import polygon_area
from polyxfem.mesh import Domain, structured_quad_mesh


@pytest.fixture(scope="module")
def grid():
    m = structured_quad_mesh(Domain.rectangle(0, 0, 2, 2), 9, 9)
    crack = en.CrackGeometry(np.array([[0.0, 1.0], [1.0, 1.0]]))
    return m, crack, en.classify(m, crack)


def test_classification_counts(grid):
    m, crack, em = grid
    assert len(em.tip_nodes) == 4
    assert len(em.heaviside_nodes) == 8
    assert em.n_dofs == 2 * m.n_nodes + 2 * 8 + 2 * 4
    assert em.split.sum() == 4
    assert len(em.tip_elements) == 1
    tip_e = em.tip_elements[0]
    ring = m.ring(tip_e)
    assert ring[:, 0].min() < 1.0 < ring[:, 0].max()
    # standard block first, enriched blocks after
    assert em.std_dof.max() == 2 * m.n_nodes - 2
    assert em.heav_dof[em.heav_dof >= 0].min() >= 2 * m.n_nodes


def test_element_kinds(grid):
    m, _, em = grid
    kinds = np.array(em.element_kind)
    assert (kinds == en.ElementKind.TIP).sum() == 1
    assert (kinds == en.ElementKind.SPLIT).sum() == 4
    assert (kinds == en.ElementKind.BLENDING).sum() > 0


def test_heaviside_sign(grid):
    _, crack, _ = grid
    H = en.heaviside(np.array([[0.5, 1.2], [0.5, 0.8], [1.5, 1.3]]), crack)
    assert H[0] == -H[1]
    assert abs(H[0]) == 1


def test_tip_branch_gradient_and_discontinuity(grid):
    _, crack, _ = grid
    X = np.array([[1.3, 1.2], [0.7, 0.6], [1.1, 0.95]])
    A, Ax, Ay = en.tip_branch(X, crack)
    h = 1e-6
    fx = (en.tip_branch(X + [h, 0], crack)[0] - en.tip_branch(X - [h, 0], crack)[0]) / (2 * h)
    fy = (en.tip_branch(X + [0, h], crack)[0] - en.tip_branch(X - [0, h], crack)[0]) / (2 * h)
    assert np.allclose(fx, Ax, rtol=1e-6) and np.allclose(fy, Ay, rtol=1e-6)
    up, dn = en.tip_branch(np.array([[0.5, 1 + 1e-12], [0.5, 1 - 1e-12]]), crack)[0]
    assert np.isclose(up, np.sqrt(0.5)) and np.isclose(dn, -np.sqrt(0.5))


def test_crack_geometry_frame():
    c = en.CrackGeometry(np.array([[0.0, 0.0], [1.0, 1.0]]))
    assert np.allclose(c.tip, [1, 1])
    assert np.allclose(c.tangent, [np.sqrt(0.5)] * 2)
    assert np.isclose(c.length, np.sqrt(2))
    r, th = c.polar(np.array([[1.0, 2.0]]))
    assert np.isclose(r[0], 1.0) and np.isclose(th[0], np.pi / 4)


def test_shifted_enrichment_vanishes_at_nodes(grid, rng):
    m, crack, em = grid
    u = rng.normal(size=em.n_dofs)
    un = u[: 2 * m.n_nodes].reshape(-1, 2)
    for e in np.flatnonzero(em.split).tolist() + list(em.tip_elements):
        ring = m.elements[e]
        for k, nd in enumerate(ring):
            # pull the evaluation point slightly into the element so it is interior
            c = m.ring(e).mean(0)
            X = m.nodes[nd] + 1e-9 * (c - m.nodes[nd])
            ux = en.xfem_displacement(m, em, crack, e, X[None], u)[0]
            assert np.allclose(ux, un[nd], atol=1e-6)


def test_enriched_quadrature_covers_element(grid):
    m, crack, em = grid
    for e in np.flatnonzero(em.split).tolist() + list(em.tip_elements):
        X, w, side = en.element_quadrature(m, em, crack, e)
        assert np.isclose(w.sum(), polygon_area(m.ring(e)), rtol=1e-12)
        if em.split[e]:
            assert set(np.unique(side)) == {-1.0, 1.0}


def test_classify_rejects_degenerate_cracks():
    m = structured_quad_mesh(Domain.rectangle(0, 0, 2, 2), 4, 4)
    with pytest.raises(ValueError, match="node"):
        en.classify(m, en.CrackGeometry(np.array([[0.0, 1.0], [0.75, 1.0]])))
    with pytest.raises(ValueError, match="edge"):
        en.classify(m, en.CrackGeometry(np.array([[0.0, 0.75], [1.0, 0.75]])))
    with pytest.raises(ValueError, match="outside"):
        en.classify(m, en.CrackGeometry(np.array([[0.0, 0.7], [2.5, 0.7]])))


def test_no_crack_is_standard():
    m = structured_quad_mesh(Domain.rectangle(0, 0, 1, 1), 3, 3)
    em = en.classify(m, None)
    assert em.n_dofs == 2 * m.n_nodes


def test_jacobian_F_matches_element_gradients(grid, rng):
    m, crack, em = grid
    u = 1e-2 * rng.normal(size=em.n_dofs)
    for e in [em.tip_elements[0], int(np.flatnonzero(em.split)[0])]:
        X = m.ring(e).mean(0) + [0.0, 0.3 * (2 / 9)]
        *_, F = en.xfem_jacobians(m, em, crack, e, X, u, reference="physical")
        B, G, F2 = en.build_B_G(m, em, crack, e, X, u)
        assert np.allclose(F, F2, rtol=1e-12, atol=1e-13)


def test_ramp_is_partition_on_tip_nodes():
    N = np.array([[0.2, 0.3, 0.5]])
    dN = np.ones((1, 3, 2))
    R, dR = en.ramp(N, dN, np.array([True, False, True]))
    assert np.isclose(R[0], 0.7) and np.allclose(dR[0], 2.0)
