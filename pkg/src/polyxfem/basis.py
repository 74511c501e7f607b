"""Mean value shape functions on polygons, sub-triangle quadrature and
gradient correction.

All routines take the polygon ring as an ``(n, 2)`` array of counter-clockwise
vertex coordinates.  Point arguments are ``(2,)`` or ``(P, 2)`` arrays; the
returned arrays always carry a leading point axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

VERTEX_TOL = 1e-12


@dataclass
class ShapeEval:
    """Shape function values and (optionally) gradients at a set of points.

    ``values`` has shape ``(P, n)`` and ``grads`` shape ``(P, n, 2)``.
    """

    values: np.ndarray
    grads: np.ndarray | None = None
    corrected: bool = False


@dataclass
class QuadratureScheme:
    """Physical quadrature points and weights over one element."""

    points: np.ndarray
    weights: np.ndarray
    triangle_order: int

    @property
    def area(self) -> float:
        return float(self.weights.sum())


def polygon_area(ring) -> float:
    """Signed shoelace area (positive for counter-clockwise rings)."""
    v = np.asarray(ring, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(ring) -> np.ndarray:
    v = np.asarray(ring, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def polygon_diameter(ring) -> float:
    v = np.asarray(ring, dtype=float)
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def point_in_polygon(ring, pts, tol=1e-12) -> np.ndarray:
    """Inclusive point-in-polygon test (boundary points count as inside)."""
    v = np.asarray(ring, dtype=float)
    p = np.atleast_2d(np.asarray(pts, dtype=float))
    inside = np.zeros(len(p), dtype=bool)
    on_edge = np.zeros(len(p), dtype=bool)
    scale = polygon_diameter(v)
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        ab = b - a
        ap = p - a
        cross = ab[0] * ap[:, 1] - ab[1] * ap[:, 0]
        t = (ap @ ab) / (ab @ ab)
        on_edge |= (np.abs(cross) <= tol * scale * np.linalg.norm(ab)) & (t >= -tol) & (t <= 1 + tol)
        cond = (a[1] > p[:, 1]) != (b[1] > p[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[0] + (p[:, 1] - a[1]) * ab[0] / ab[1]
        inside ^= cond & (p[:, 0] < xint)
    return inside | on_edge


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def _edge_limit(v, p, tol):
    """Detect points lying on a polygon edge (or vertex).

    Returns ``(mask, values)`` where ``values`` holds the linear edge
    interpolation for the masked points.
    """
    n = len(v)
    P = len(p)
    mask = np.zeros(P, dtype=bool)
    vals = np.zeros((P, n))
    scale = polygon_diameter(v)
    for i in range(n):
        j = (i + 1) % n
        a, b = v[i], v[j]
        ab = b - a
        L2 = ab @ ab
        ap = p - a
        t = (ap @ ab) / L2
        dist = np.abs(ab[0] * ap[:, 1] - ab[1] * ap[:, 0]) / np.sqrt(L2)
        hit = (~mask) & (dist <= tol * scale) & (t >= -tol) & (t <= 1 + tol)
        if hit.any():
            tt = np.clip(t[hit], 0.0, 1.0)
            vals[hit, i] = 1.0 - tt
            vals[hit, j] = tt
            mask |= hit
    return mask, vals


def _mv_core(v, p, with_grad):
    """Mean value weights for points strictly away from the boundary."""
    d = v[None, :, :] - p[:, None, :]  # (P, n, 2)
    dn = np.roll(d, -1, axis=1)
    r = np.sqrt((d ** 2).sum(-1))
    rn = np.roll(r, -1, axis=1)
    A = d[..., 0] * dn[..., 1] - d[..., 1] * dn[..., 0]
    D = (d * dn).sum(-1)
    s = r * rn + D
    # tan(alpha_i / 2) = sin / (1 + cos); stable for alpha -> 0
    t = A / s
    tp = np.roll(t, 1, axis=1)
    w = (tp + t) / r
    W = w.sum(1, keepdims=True)
    N = w / W
    if not with_grad:
        return N, None
    # derivatives w.r.t. the evaluation point x (d = v - x)
    dr = -d / r[..., None]
    drn = np.roll(dr, -1, axis=1)
    dA = -np.stack([dn[..., 1] - d[..., 1], d[..., 0] - dn[..., 0]], axis=-1)
    dD = -(d + dn)
    ds = dr * rn[..., None] + r[..., None] * drn + dD
    dt = (dA * s[..., None] - A[..., None] * ds) / (s ** 2)[..., None]
    dtp = np.roll(dt, 1, axis=1)
    dw = (dtp + dt) / r[..., None] - (w / r)[..., None] * dr
    dW = dw.sum(1, keepdims=True)
    dN = (dw - N[..., None] * dW) / W[..., None]
    return N, dN


def mean_value_shape(ring, x, check_inside=True) -> ShapeEval:
    """Mean value shape function values at one or many points."""
    v = np.asarray(ring, dtype=float)
    p = _as_points(x)
    if check_inside and not point_in_polygon(v, p, tol=1e-9).all():
        raise ValueError("evaluation point outside polygon")
    on_bd, bd_vals = _edge_limit(v, p, VERTEX_TOL)
    vals = np.empty((len(p), len(v)))
    vals[on_bd] = bd_vals[on_bd]
    inner = ~on_bd
    if inner.any():
        vals[inner], _ = _mv_core(v, p[inner], False)
    return ShapeEval(values=vals)


def mean_value_grad(ring, x, check_inside=True) -> ShapeEval:
    """Mean value values and raw (analytic) gradients.

    Points on the polygon boundary are rejected; gradients are only needed at
    interior quadrature points.
    """
    v = np.asarray(ring, dtype=float)
    p = _as_points(x)
    if check_inside and not point_in_polygon(v, p, tol=1e-9).all():
        raise ValueError("evaluation point outside polygon")
    on_bd, _ = _edge_limit(v, p, VERTEX_TOL)
    if on_bd.any():
        raise ValueError("gradient requested on the polygon boundary")
    N, dN = _mv_core(v, p, True)
    return ShapeEval(values=N, grads=dN)


# ---------------------------------------------------------------- quadrature


def _sym_points(groups):
    pts, wts = [], []
    for w, (a, b, c) in groups:
        perms = {(a, b, c), (b, c, a), (c, a, b)}
        for p in sorted(perms):
            pts.append(p[1:])
            wts.append(w)
    return np.array(pts), 0.5 * np.array(wts)


# symmetric positive rules: (weight, barycentric triple)
_TRI_TABLES = {
    1: [(1.0, (1 / 3, 1 / 3, 1 / 3))],
    2: [(1 / 3, (2 / 3, 1 / 6, 1 / 6))],
    4: [
        (0.223381589678011, (0.108103018168070, 0.445948490915965, 0.445948490915965)),
        (0.109951743655322, (0.816847572980459, 0.091576213509771, 0.091576213509771)),
    ],
    5: [
        (0.225, (1 / 3, 1 / 3, 1 / 3)),
        (0.132394152788506, (0.059715871789770, 0.470142064105115, 0.470142064105115)),
        (0.125939180544827, (0.797426985353087, 0.101286507323456, 0.101286507323456)),
    ],
}


@lru_cache(maxsize=None)
def collapsed_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Conical-product Gauss rule collapsing at the first triangle vertex.

    Exact for total degree ``order`` and accurate for ``1/sqrt(r)``
    integrands singular at that vertex.
    """
    n = (order + 3) // 2
    g, w = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    s, t = np.meshgrid(g, g, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    s, t, ws, wt = s.ravel(), t.ravel(), ws.ravel(), wt.ravel()
    return np.column_stack([s * (1.0 - t), s * t]), ws * wt * s


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Positive-weight rule on the unit triangle, exact for degree ``order``.

    Reference coordinates ``(k, 2)`` are for the map
    ``v0 + a (v1 - v0) + b (v2 - v0)``; weights sum to 1/2.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    for deg in sorted(_TRI_TABLES):
        if deg >= order:
            return _sym_points(_TRI_TABLES[deg])
    return collapsed_rule(order)


def map_triangle_rule(tri, order: int, collapsed: bool = False):
    """Map the reference rule onto a physical triangle ``(3, 2)``."""
    tri = np.asarray(tri, dtype=float)
    ref, w = collapsed_rule(order) if collapsed else triangle_rule(order)
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    jac = e1[0] * e2[1] - e1[1] * e2[0]
    pts = tri[0] + ref[:, :1] * e1 + ref[:, 1:] * e2
    return pts, w * abs(jac)


def is_star_shaped_from(ring, c, tol=1e-12) -> bool:
    v = np.asarray(ring, dtype=float)
    d = v - c
    dn = np.roll(d, -1, axis=0)
    cross = d[:, 0] * dn[:, 1] - d[:, 1] * dn[:, 0]
    return bool((cross > tol * polygon_diameter(v) ** 2).all())


def ear_clip(ring) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation of a simple counter-clockwise polygon."""
    v = np.asarray(ring, dtype=float)
    idx = list(range(len(v)))
    tris = []
    scale = polygon_diameter(v) ** 2

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = v[i0], v[i1], v[i2]
            if cross(a, b, c) <= 1e-14 * scale:
                continue
            ok = True
            for m in idx:
                if m in (i0, i1, i2):
                    continue
                p = v[m]
                if (cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0):
                    ok = False
                    break
            if ok:
                tris.append((i0, i1, i2))
                idx.pop(k)
                clipped = True
                break
        guard += 1
        if not clipped or guard > 10 * len(v):
            # degenerate remainder (collinear runs): fan what is left
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
            return [t for t in tris if abs(cross(v[t[0]], v[t[1]], v[t[2]])) > 0]
    tris.append(tuple(idx))
    return tris


def triangulate(ring, apex=None) -> list[np.ndarray]:
    """Split a polygon into triangles ``(3, 2)``.

    Fans from ``apex`` (default: the centroid) when the polygon is star-shaped
    with respect to it, otherwise falls back to ear clipping.  Fan triangles
    carry the apex as their first vertex.
    """
    v = np.asarray(ring, dtype=float)
    c = polygon_centroid(v) if apex is None else np.asarray(apex, dtype=float)
    if apex is not None:
        tris = []
        n = len(v)
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            area2 = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
            if area2 > 1e-14 * polygon_diameter(v) ** 2:
                tris.append(np.array([c, a, b]))
        return tris
    if len(v) == 3:
        return [v.copy()]
    if is_star_shaped_from(v, c):
        return [np.array([c, v[i], v[(i + 1) % len(v)]]) for i in range(len(v))]
    return [v[list(t)] for t in ear_clip(v)]


def triangulate_quadrature(ring, order: int = 3, apex=None) -> QuadratureScheme:
    """Quadrature by sub-triangulation of the physical polygon."""
    tris = triangulate(ring, apex=apex)
    pts, wts = [], []
    for tri in tris:
        p, w = map_triangle_rule(tri, order, collapsed=apex is not None)
        pts.append(p)
        wts.append(w)
    return QuadratureScheme(np.vstack(pts), np.concatenate(wts), order)


# --------------------------------------------------------- gradient correction


def boundary_shape_integral(ring, n_gauss: int = 2) -> np.ndarray:
    """``oint N_i n ds`` for every vertex function, shape ``(n, 2)``.

    Mean value functions are linear along edges, so an edge Gauss rule with
    two points is exact.
    """
    v = np.asarray(ring, dtype=float)
    n = len(v)
    g, w = np.polynomial.legendre.leggauss(n_gauss)
    t = 0.5 * (g + 1.0)
    w = 0.5 * w
    out = np.zeros((n, 2))
    for i in range(n):
        j = (i + 1) % n
        e = v[j] - v[i]
        normal = np.array([e[1], -e[0]])  # outward for CCW, scaled by length
        out[i] += normal * np.dot(w, 1.0 - t)
        out[j] += normal * np.dot(w, t)
    return out


def gradient_correction(ring, weights, raw_grads, n_gauss: int = 2) -> np.ndarray:
    """Constant per-function correction vector, shape ``(n, 2)``.

    ``raw_grads`` are the raw gradients ``(P, n, 2)`` at the quadrature points
    with ``weights`` ``(P,)``.  Adding the returned vector to each raw
    gradient makes ``sum_q w_q grad_q = oint N n ds`` hold exactly.
    """
    area = float(np.sum(weights))
    if area <= 0.0:
        raise ValueError("zero element area")
    bnd = boundary_shape_integral(ring, n_gauss)
    vol = np.einsum("q,qnd->nd", weights, raw_grads)
    return (bnd - vol) / area


def correct_gradients(ring, scheme: QuadratureScheme, raw: ShapeEval) -> ShapeEval:
    corr = gradient_correction(ring, scheme.weights, raw.grads)
    return ShapeEval(values=raw.values, grads=raw.grads + corr[None], corrected=True)


# ----------------------------------------------------- canonical n-gon mapping


def reference_polygon(n: int) -> np.ndarray:
    """Canonical n-gon: vertices on the unit circle, counter-clockwise."""
    ang = 2.0 * np.pi * np.arange(n) / n
    if n == 4:
        ang = ang + np.pi / 4.0
    else:
        ang = ang + np.pi / 2.0
    return np.column_stack([np.cos(ang), np.sin(ang)])


def reference_quadrature(ring, order: int = 3):
    """Two-level scheme: triangulate the canonical n-gon, map through the
    isoparametric mean value map.  Returns physical points, weights and the
    reference-space shape evaluation.
    """
    v = np.asarray(ring, dtype=float)
    ref = reference_polygon(len(v))
    sch = triangulate_quadrature(ref, order)
    ev = mean_value_grad(ref, sch.points, check_inside=False)
    X = ev.values @ v
    J0 = np.einsum("pnd,ne->pde", ev.grads, v)  # J0[a, b] = dX_b / dxi_a
    det = J0[:, 0, 0] * J0[:, 1, 1] - J0[:, 0, 1] * J0[:, 1, 0]
    return X, sch.weights * np.abs(det), ev
