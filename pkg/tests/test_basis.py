import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_points_in, random_star_polygon
from polyxfem import basis

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_partition_of_unity_and_linear_completeness(rng):
    for n in range(3, 11):
        ring = random_star_polygon(rng, n)
        x = random_points_in(rng, ring, 50)
        ev = basis.mean_value_grad(ring, x)
        assert np.allclose(ev.values.sum(1), 1.0, atol=1e-12)
        assert np.allclose(ev.values @ ring, x, atol=1e-12)
        assert np.allclose(ev.grads.sum(1), 0.0, atol=1e-10)
        # sum_i grad N_i x_i^T = I
        G = np.einsum("pnd,ne->pde", ev.grads, ring)
        assert np.allclose(G, np.eye(2), atol=1e-10)


def test_kronecker_delta_and_edge_linearity(rng):
    ring = random_star_polygon(rng, 7)
    ev = basis.mean_value_shape(ring, ring)
    assert np.allclose(ev.values, np.eye(7), atol=1e-14)
    t = np.linspace(0.1, 0.9, 5)
    mid = ring[2] + t[:, None] * (ring[3] - ring[2])
    v = basis.mean_value_shape(ring, mid).values
    assert np.allclose(v[:, 2], 1 - t) and np.allclose(v[:, 3], t)
    assert np.allclose(np.delete(v, [2, 3], axis=1), 0.0)


def test_values_positive_inside_convex_polygon(rng):
    ring = basis.reference_polygon(6)
    v = basis.mean_value_shape(ring, random_points_in(rng, ring, 200)).values
    assert (v > 0).all()


def test_square_centre_values_are_quarter():
    # mean value coordinates are not bilinear, but symmetry fixes the centre
    v = basis.mean_value_shape(SQUARE, [[0.5, 0.5]]).values
    assert np.allclose(v, 0.25)


def test_gradients_match_central_differences(rng):
    h = 1e-6
    for n in (3, 5, 8, 10):
        ring = random_star_polygon(rng, n)
        x = random_points_in(rng, ring, 20, margin=0.05)
        g = basis.mean_value_grad(ring, x).grads
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            fd = (basis.mean_value_shape(ring, x + e, False).values - basis.mean_value_shape(ring, x - e, False).values)
            fd /= 2 * h
            assert np.max(np.abs(fd - g[..., d])) <= 1e-6 * np.max(np.abs(g))


def test_gradient_on_boundary_rejected():
    with pytest.raises(ValueError, match="boundary"):
        basis.mean_value_grad(SQUARE, [[0.5, 0.0]])


def test_outside_point_rejected():
    with pytest.raises(ValueError, match="outside"):
        basis.mean_value_shape(SQUARE, [[1.5, 0.5]])


def test_quadrature_integrates_polynomials_exactly(rng):
    ring = random_star_polygon(rng, 8)
    area = basis.polygon_area(ring)
    for order in (1, 2, 3, 5, 7):
        sch = basis.triangulate_quadrature(ring, order)
        assert np.isclose(sch.area, area, rtol=1e-13)
    sch = basis.triangulate_quadrature(SQUARE, 3)
    x, y = sch.points.T
    assert np.isclose(sch.weights @ (x ** 2 * y), 1.0 / 6.0, rtol=1e-13)
    assert np.isclose(sch.weights @ (x ** 3), 0.25, rtol=1e-13)


def test_collapsed_rule_integrates_over_triangle():
    pts, w = basis.collapsed_rule(5)
    assert np.isclose(w.sum(), 0.5)
    assert np.isclose(w @ pts[:, 0], 1.0 / 6.0)


def test_ear_clip_nonconvex():
    L = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], float)
    tris = basis.ear_clip(L)
    assert len(tris) == 4
    assert np.isclose(sum(basis.polygon_area(L[list(t)]) for t in tris), 3.0)
    # the fan from the centroid is used when the centroid sees the whole boundary
    fan = basis.triangulate(L)
    assert all(basis.polygon_area(t) > 0 for t in fan)
    assert np.isclose(sum(basis.polygon_area(t) for t in fan), 3.0)


def test_gradient_correction_restores_divergence_identity(rng):
    ring = random_star_polygon(rng, 9)
    sch = basis.triangulate_quadrature(ring, 1)
    raw = basis.mean_value_grad(ring, sch.points, check_inside=False)
    cor = basis.correct_gradients(ring, sch, raw)
    lhs = np.einsum("q,qnd->nd", sch.weights, cor.grads)
    assert np.allclose(lhs, basis.boundary_shape_integral(ring), atol=1e-14)
    raw_lhs = np.einsum("q,qnd->nd", sch.weights, raw.grads)
    assert not np.allclose(raw_lhs, basis.boundary_shape_integral(ring), atol=1e-8)


def test_reference_polygon_ccw_unit_circle():
    for n in range(3, 11):
        r = basis.reference_polygon(n)
        assert basis.polygon_area(r) > 0
        assert np.allclose(np.hypot(*r.T), 1.0)


def test_reference_quadrature_recovers_area():
    ring = basis.reference_polygon(6) * 2.0 + 1.0
    X, w, _ = basis.reference_quadrature(ring, 3)
    assert np.isclose(w.sum(), basis.polygon_area(ring))
    assert np.allclose(w @ X / w.sum(), basis.polygon_centroid(ring))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 10), seed=st.integers(0, 2 ** 31 - 1))
def test_property_reproduces_affine_fields(n, seed):
    rng = np.random.default_rng(seed)
    ring = random_star_polygon(rng, n)
    x = random_points_in(rng, ring, 5)
    A, b = rng.normal(size=(2, 2)), rng.normal(size=2)
    u = ring @ A.T + b
    ev = basis.mean_value_grad(ring, x)
    assert np.allclose(ev.values @ u, x @ A.T + b, atol=1e-10)
    assert np.allclose(np.einsum("pnd,ne->ped", ev.grads, u), A, atol=1e-8)
