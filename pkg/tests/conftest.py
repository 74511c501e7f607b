import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_star_polygon(rng, n):
    """Star-shaped (often non-convex) polygon, counter-clockwise, about the origin."""
    ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    # keep angular gaps below pi so the origin stays in the kernel
    while np.max(np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))) > 0.9 * np.pi:
        ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    r = rng.uniform(0.5, 1.0, n)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def random_points_in(rng, ring, n, margin=1e-3):
    from polyxfem.basis import point_in_polygon
    from shapely.geometry import Point, Polygon

    poly = Polygon(ring)
    lo, hi = ring.min(0), ring.max(0)
    out = []
    while len(out) < n:
        p = rng.uniform(lo, hi, (4 * n, 2))
        ok = point_in_polygon(ring, p)
        for q in p[ok]:
            if poly.exterior.distance(Point(q)) > margin:
                out.append(q)
    return np.array(out[:n])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
