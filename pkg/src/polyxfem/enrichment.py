"""Crack geometry, enrichment classification and XFEM kinematics.

Enrichment functions are always evaluated at undeformed coordinates ``X``.
Each element carries a list of *element functions*: the standard mean value
function of every ring node, the shifted Heaviside function ``N_j (H - H_j)``
of Heaviside nodes and the ramped, shifted tip function
``N_k (A - A_k) R`` of tip nodes.  Each element function owns two DOFs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import split as shapely_split

from . import basis
from .mesh import PolyMesh


class NodeKind(enum.IntEnum):
    STANDARD = 0
    HEAVISIDE = 1
    TIP = 2


class ElementKind(enum.IntEnum):
    STANDARD = 0
    SPLIT = 1
    TIP = 2
    BLENDING = 3


STD, HEAV, TIPF = 0, 1, 2  # element function kinds


@dataclass
class CrackGeometry:
    """Piecewise-linear crack in undeformed coordinates; the tip is the last
    vertex."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 2:
            raise ValueError("a crack needs at least two vertices")
        if (np.linalg.norm(np.diff(v, axis=0), axis=1) <= 0).any():
            raise ValueError("zero-length crack segment")
        if len(v) > 2 and not LineString(v).is_simple:
            raise ValueError("crack polyline is self-intersecting")
        self.vertices = v

    @property
    def tip(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def tangent(self) -> np.ndarray:
        d = self.vertices[-1] - self.vertices[-2]
        return d / np.linalg.norm(d)

    @property
    def normal(self) -> np.ndarray:
        t = self.tangent
        return np.array([-t[1], t[0]])

    @property
    def tip_frame(self) -> np.ndarray:
        """Rows are the unit tangent and normal at the tip."""
        return np.vstack([self.tangent, self.normal])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def linestring(self, extend_start: float = 0.0) -> LineString:
        v = self.vertices.copy()
        if extend_start:
            d = v[0] - v[1]
            v[0] = v[0] + extend_start * d / np.linalg.norm(d)
        return LineString(v)

    def closest(self, x):
        """Closest crack points, segment normals and distances for ``(P, 2)``."""
        p = np.atleast_2d(np.asarray(x, dtype=float))
        best_d = np.full(len(p), np.inf)
        best_pt = np.zeros_like(p)
        best_n = np.zeros_like(p)
        for a, b in zip(self.vertices[:-1], self.vertices[1:]):
            ab = b - a
            t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
            q = a + t[:, None] * ab
            d = np.linalg.norm(p - q, axis=1)
            n = np.array([-ab[1], ab[0]]) / np.linalg.norm(ab)
            better = d < best_d
            best_d[better] = d[better]
            best_pt[better] = q[better]
            best_n[better] = n
        return best_pt, best_n, best_d

    def polar(self, X):
        """Tip polar coordinates ``(r, theta)`` with ``theta`` in ``(-pi, pi]``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rel = X - self.tip
        xl = rel @ self.tangent
        yl = rel @ self.normal
        return np.hypot(xl, yl), np.arctan2(yl, xl)


def heaviside(x, crack: CrackGeometry) -> np.ndarray:
    """Step function: +1 where ``(x - x*) . n > 0``, else -1."""
    p = np.atleast_2d(np.asarray(x, dtype=float))
    q, n, _ = crack.closest(p)
    s = np.einsum("pi,pi->p", p - q, n)
    return np.where(s > 0.0, 1.0, -1.0)


def tip_branch(X, crack: CrackGeometry):
    """Single near-tip branch ``A = sqrt(r) sin(theta/2)`` and its gradient.

    Returns ``(A, dA/dX, dA/dY)`` as arrays over the input points.
    """
    r, th = crack.polar(X)
    if (r <= 0).any():
        raise ValueError("tip branch gradient is unbounded at the crack tip")
    sr = np.sqrt(r)
    A = sr * np.sin(0.5 * th)
    gl_x = -np.sin(0.5 * th) / (2.0 * sr)
    gl_y = np.cos(0.5 * th) / (2.0 * sr)
    g = gl_x[:, None] * crack.tangent + gl_y[:, None] * crack.normal
    return A, g[:, 0], g[:, 1]


def ramp(values, grads, tip_mask):
    """Ramp ``R = sum_{k in K} N_k`` over the tip-enriched ring nodes."""
    mask = np.asarray(tip_mask, dtype=bool)
    R = values[:, mask].sum(1)
    dR = grads[:, mask].sum(1) if grads is not None else None
    return R, dR


# ------------------------------------------------------------ classification


@dataclass
class EnrichmentMap:
    node_kind: np.ndarray  # (n_nodes,) NodeKind
    element_kind: np.ndarray  # (n_elements,) ElementKind
    split: np.ndarray  # (n_elements,) bool, fully cut by the crack
    tip_elements: np.ndarray  # indices of elements containing the tip
    std_dof: np.ndarray  # (n_nodes,) first standard DOF
    heav_dof: np.ndarray  # (n_nodes,) first Heaviside DOF or -1
    tip_dof: np.ndarray  # (n_nodes,) first tip DOF or -1
    n_dofs: int
    node_H: np.ndarray  # (n_nodes,) H(x_j) for Heaviside nodes
    node_A: np.ndarray  # (n_nodes,) A(X_k) for tip nodes
    sub_polygons: dict = field(default_factory=dict)  # elem -> list of (ring, H)

    @property
    def heaviside_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_kind == NodeKind.HEAVISIDE)

    @property
    def tip_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_kind == NodeKind.TIP)

    def element_functions(self, ring):
        """List of ``(local vertex, kind, first global DOF)`` for an element."""
        out = []
        for loc, nd in enumerate(ring):
            out.append((loc, STD, int(self.std_dof[nd])))
            if self.heav_dof[nd] >= 0:
                out.append((loc, HEAV, int(self.heav_dof[nd])))
            if self.tip_dof[nd] >= 0:
                out.append((loc, TIPF, int(self.tip_dof[nd])))
        return out

    def element_dofs(self, ring) -> np.ndarray:
        f = self.element_functions(ring)
        return np.array([[d, d + 1] for _, _, d in f], dtype=int).ravel()


def _split_polygon(ring, line: LineString):
    poly = Polygon(ring)
    pieces = [g for g in shapely_split(poly, line).geoms if g.area > 1e-14 * poly.area]
    return pieces


def classify(mesh: PolyMesh, crack: CrackGeometry | None) -> EnrichmentMap:
    """Node/element enrichment classification and DOF layout."""
    nn, ne = mesh.n_nodes, mesh.n_elements
    node_kind = np.zeros(nn, dtype=int)
    element_kind = np.zeros(ne, dtype=int)
    split = np.zeros(ne, dtype=bool)
    tip_elems = []
    sub_polys = {}
    node_H = np.zeros(nn)
    node_A = np.zeros(nn)
    if crack is not None:
        h = np.sqrt(np.median(mesh.areas()))
        cut_line = crack.linestring(extend_start=1e-6 * h)
        line = crack.linestring()
        scale = np.ptp(mesh.nodes, axis=0).max()
        _, _, dist = crack.closest(mesh.nodes)
        if (dist <= 1e-12 * scale).any():
            raise ValueError("crack passes through a mesh node; shift the crack or the mesh")
        tip_pt = Point(crack.tip)
        polys = [Polygon(mesh.ring(e)) for e in range(ne)]
        tree = shapely.STRtree(polys)
        for e in tree.query(line):
            e = int(e)
            poly = polys[e]
            if poly.boundary.distance(tip_pt) <= 1e-12 * scale:
                raise ValueError("crack tip lies on an element edge; shift the crack")
            if poly.contains(tip_pt):
                tip_elems.append(e)
                continue
            if not poly.intersects(line):
                continue
            pieces = _split_polygon(mesh.ring(e), cut_line)
            if len(pieces) >= 2:
                split[e] = True
                subs = []
                for pc in pieces:
                    c = np.array(pc.representative_point().coords[0])
                    subs.append((basis_ring(pc), float(heaviside(c, crack)[0])))
                sub_polys[e] = subs
        if not tip_elems and crack is not None:
            inside = [e for e in range(ne) if polys[e].covers(tip_pt)]
            if not inside:
                raise ValueError("crack tip lies outside the mesh")
        tip_nodes = set()
        for e in tip_elems:
            tip_nodes.update(int(i) for i in mesh.elements[e])
        heav_nodes = set()
        for e in np.flatnonzero(split):
            heav_nodes.update(int(i) for i in mesh.elements[e])
        heav_nodes -= tip_nodes
        for i in heav_nodes:
            node_kind[i] = NodeKind.HEAVISIDE
        for i in tip_nodes:
            node_kind[i] = NodeKind.TIP
        if heav_nodes:
            idx = np.array(sorted(heav_nodes))
            node_H[idx] = heaviside(mesh.nodes[idx], crack)
        if tip_nodes:
            idx = np.array(sorted(tip_nodes))
            node_A[idx] = tip_branch(mesh.nodes[idx], crack)[0]
        is_tip = node_kind == NodeKind.TIP
        for e, ring in enumerate(mesh.elements):
            nt = int(is_tip[ring].sum())
            if e in tip_elems:
                element_kind[e] = ElementKind.TIP
            elif split[e]:
                element_kind[e] = ElementKind.SPLIT
            elif 0 < nt < len(ring):
                element_kind[e] = ElementKind.BLENDING
    std = np.arange(nn) * 2
    heav = -np.ones(nn, dtype=int)
    tipd = -np.ones(nn, dtype=int)
    nxt = 2 * nn
    # enriched blocks are appended after the standard block, node by node
    for i in range(nn):
        if node_kind[i] == NodeKind.HEAVISIDE:
            heav[i] = nxt
            nxt += 2
        elif node_kind[i] == NodeKind.TIP:
            tipd[i] = nxt
            nxt += 2
    return EnrichmentMap(node_kind, element_kind, split, np.array(sorted(tip_elems), dtype=int), std, heav, tipd,
                         nxt, node_H, node_A, sub_polys)


def basis_ring(poly: Polygon) -> np.ndarray:
    poly = shapely.geometry.polygon.orient(poly, 1.0)
    return np.asarray(poly.exterior.coords)[:-1]


# ----------------------------------------------------- element functions


@dataclass
class ElementData:
    """Quadrature data of one element in the undeformed configuration."""

    elem: int
    points: np.ndarray  # (Q, 2) undeformed quadrature points
    weights: np.ndarray  # (Q,) undeformed area weights
    dofs: np.ndarray  # (2m,) global DOFs, two per element function
    phi: np.ndarray  # (Q, m) element function values
    dphi: np.ndarray  # (Q, m, 2) gradients w.r.t. X
    N: np.ndarray  # (Q, n) vertex shape values
    dN: np.ndarray  # (Q, n, 2) vertex shape gradients (corrected if enabled)
    side: np.ndarray  # (Q,) Heaviside value of each point's region


def element_quadrature(mesh: PolyMesh, emap: EnrichmentMap, crack, e, order_std=3, order_enr=7):
    """Quadrature points, weights and the Heaviside side of each point."""
    ring = mesh.ring(e)
    enriched = (emap.node_kind[mesh.elements[e]] != NodeKind.STANDARD).any()
    if crack is not None and e in set(emap.tip_elements.tolist()):
        fan = _tip_fan_ring(ring, crack)
        if fan is not None:
            sch = basis.triangulate_quadrature(fan, order_enr, apex=crack.tip)
            side = heaviside(sch.points, crack)
            return sch.points, sch.weights, side
    if emap.split[e]:
        pts, wts, side = [], [], []
        for sub, H in emap.sub_polygons[e]:
            sch = basis.triangulate_quadrature(sub, order_enr)
            pts.append(sch.points)
            wts.append(sch.weights)
            side.append(np.full(len(sch.weights), H))
        return np.vstack(pts), np.concatenate(wts), np.concatenate(side)
    sch = basis.triangulate_quadrature(ring, order_enr if enriched else order_std)
    if crack is not None and enriched:
        Hc = heaviside(basis.polygon_centroid(ring), crack)[0]
    else:
        Hc = 1.0
    return sch.points, sch.weights, np.full(len(sch.weights), Hc)


def _tip_fan_ring(ring, crack: CrackGeometry):
    """Element ring with the crack entry point inserted, for a fan from the tip.

    Returns ``None`` when the element is not star-shaped about the tip.
    """
    tip = crack.tip
    if not basis.is_star_shaped_from(ring, tip):
        return None
    line = crack.linestring()
    n = len(ring)
    out = []
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        out.append(a)
        inter = LineString([a, b]).intersection(line)
        if inter.is_empty:
            continue
        pts = [np.array(p.coords[0]) for p in getattr(inter, "geoms", [inter]) if p.geom_type == "Point"]
        for p in sorted(pts, key=lambda p: np.linalg.norm(p - a)):
            if np.linalg.norm(p - a) > 1e-12 and np.linalg.norm(p - b) > 1e-12:
                out.append(p)
    return np.array(out)


def element_functions_at(mesh, emap, crack, e, X, side=None, grad_correction=None, values_only=False):
    """Evaluate all element functions of element ``e`` at undeformed points.

    ``side`` overrides the Heaviside value per point (used for points on or
    near the crack); ``grad_correction`` is an ``(n, 2)`` constant added to
    the raw vertex gradients.  ``values_only`` allows points on the element
    boundary; the returned gradients are then zero.
    Returns ``(N, dN, phi, dphi)``.
    """
    ring_ids = mesh.elements[e]
    ring = mesh.nodes[ring_ids]
    if values_only:
        N = basis.mean_value_shape(ring, X, check_inside=False).values
        dN = np.zeros(N.shape + (2,))
    else:
        ev = basis.mean_value_grad(ring, X, check_inside=False)
        N, dN = ev.values, ev.grads
    if grad_correction is not None:
        dN = dN + grad_correction[None]
    funcs = emap.element_functions(ring_ids)
    Q = len(N)
    phi = np.empty((Q, len(funcs)))
    dphi = np.empty((Q, len(funcs), 2))
    tip_mask = emap.node_kind[ring_ids] == NodeKind.TIP
    has_tip = tip_mask.any()
    if has_tip:
        with np.errstate(divide="ignore", invalid="ignore"):
            A, Ax, Ay = tip_branch(X, crack)
        dA = np.column_stack([Ax, Ay])
        R, dR = ramp(N, dN, tip_mask)
    if side is None and (emap.heav_dof[ring_ids] >= 0).any():
        side = heaviside(X, crack)
    for a, (loc, kind, _) in enumerate(funcs):
        if kind == STD:
            phi[:, a] = N[:, loc]
            dphi[:, a] = dN[:, loc]
        elif kind == HEAV:
            s = side - emap.node_H[ring_ids[loc]]
            phi[:, a] = N[:, loc] * s
            dphi[:, a] = dN[:, loc] * s[:, None]
        else:
            Ab = A - emap.node_A[ring_ids[loc]]
            phi[:, a] = N[:, loc] * Ab * R
            dphi[:, a] = (dN[:, loc] * (Ab * R)[:, None] + N[:, loc][:, None] * (dA * R[:, None] + Ab[:, None] * dR))
    return N, dN, phi, dphi


def build_element_data(mesh: PolyMesh, emap: EnrichmentMap, crack, correction=True, order_std=3,
                       order_enr=7) -> list:
    out = []
    for e in range(mesh.n_elements):
        X, w, side = element_quadrature(mesh, emap, crack, e, order_std, order_enr)
        ring = mesh.ring(e)
        corr = None
        if correction:
            raw = basis.mean_value_grad(ring, X, check_inside=False)
            corr = basis.gradient_correction(ring, w, raw.grads)
        N, dN, phi, dphi = element_functions_at(mesh, emap, crack, e, X, side, corr)
        out.append(ElementData(e, X, w, emap.element_dofs(mesh.elements[e]), phi, dphi, N, dN, side))
    return out


# ------------------------------------------------------------- kinematics


def xfem_displacement(mesh, emap, crack, e, X, u_all, side=None) -> np.ndarray:
    """Enriched displacement at undeformed points inside element ``e``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, _, phi, _ = element_functions_at(mesh, emap, crack, e, X, side)
    ue = np.asarray(u_all)[emap.element_dofs(mesh.elements[e])].reshape(-1, 2)
    return phi @ ue


def xfem_jacobians(mesh, emap, crack, e, xi, u_all, reference="canonical"):
    """Jacobians of the two-stage map at a reference point.

    ``reference='canonical'`` maps from the canonical n-gon through the mean
    value isoparametric map; ``'physical'`` uses the undeformed element itself
    as the reference (``J0 = I``).  Returns ``(J0, J, F0, Fbar, F)`` with the
    row convention ``J[a, b] = d x_b / d xi_a``.
    """
    ring_ids = mesh.elements[e]
    ring = mesh.nodes[ring_ids]
    xi = np.asarray(xi, dtype=float).reshape(1, 2)
    if reference == "canonical":
        ref = basis.reference_polygon(len(ring))
        ev = basis.mean_value_grad(ref, xi, check_inside=False)
        Nr, dNr = ev.values[0], ev.grads[0]  # dN/dxi
        X = (Nr @ ring)[None]
        J0 = dNr.T @ ring  # J0[a, b] = dX_b/dxi_a
    else:
        X = xi
        ev = basis.mean_value_grad(ring, X, check_inside=False)
        Nr, dNr = ev.values[0], ev.grads[0]
        J0 = np.eye(2)
    det0 = np.linalg.det(J0)
    if det0 <= 0:
        raise ValueError("reference mapping degenerate (det J0 <= 0)")
    F0 = np.linalg.inv(J0)
    u = np.asarray(u_all, dtype=float)
    xbar = ring + u[emap.std_dof[ring_ids][:, None] + np.arange(2)]
    # component sums in vector form: J[a, :] = dx/dxi_a
    J = dNr.T @ xbar
    tip_mask = emap.node_kind[ring_ids] == NodeKind.TIP
    if tip_mask.any():
        A, Ax, Ay = tip_branch(X, crack)
        R = Nr[tip_mask].sum()
        dR_dxi = dNr[tip_mask].sum(0)  # dR/dxi_a
        dA_dX = np.array([Ax[0], Ay[0]])
        dR_dX = np.linalg.solve(J0, dR_dxi)
    for loc, nd in enumerate(ring_ids):
        if emap.heav_dof[nd] >= 0:
            a = u[emap.heav_dof[nd]:emap.heav_dof[nd] + 2]
            Hb = heaviside(X, crack)[0] - emap.node_H[nd]
            J += np.outer(dNr[loc], Hb * a)
        if emap.tip_dof[nd] >= 0:
            b = u[emap.tip_dof[nd]:emap.tip_dof[nd] + 2]
            Ab = A[0] - emap.node_A[nd]
            J += np.outer(dNr[loc], Ab * R * b)
            # chain terms: d(Abar R)/dxi_a = sum_b (dAbar/dX_b R + Abar dR/dX_b) J0[a, b]
            chain = J0 @ (dA_dX * R + Ab * dR_dX)
            J += Nr[loc] * np.outer(chain, b)
    if np.linalg.det(J) <= 0:
        raise ValueError("current mapping degenerate (det J <= 0)")
    Fbar = np.linalg.inv(J)
    F = np.array([
        [J[0, 0] * F0[0, 0] + J[1, 0] * F0[0, 1], J[0, 0] * F0[1, 0] + J[1, 0] * F0[1, 1]],
        [J[0, 1] * F0[0, 0] + J[1, 1] * F0[0, 1], J[0, 1] * F0[1, 0] + J[1, 1] * F0[1, 1]],
    ])
    return J0, J, F0, Fbar, F


def build_B_G(mesh, emap, crack, e, X, u_all, correction=None):
    """Enriched ``B`` (3 x ndof_e) and ``G`` (4 x ndof_e) at one undeformed point.

    Columns follow the element DOF order.  Derivatives are taken w.r.t. the
    current configuration, ``d/dx = d/dX F^{-1}``.
    """
    X = np.asarray(X, dtype=float).reshape(1, 2)
    _, _, phi, dphi = element_functions_at(mesh, emap, crack, e, X, grad_correction=correction)
    ue = np.asarray(u_all)[emap.element_dofs(mesh.elements[e])].reshape(-1, 2)
    F = np.eye(2) + ue.T @ dphi[0]
    g = dphi[0] @ np.linalg.inv(F)  # (m, 2) spatial gradients
    m = len(g)
    B = np.zeros((3, 2 * m))
    G = np.zeros((4, 2 * m))
    B[0, 0::2] = g[:, 0]
    B[1, 1::2] = g[:, 1]
    B[2, 0::2] = g[:, 1]
    B[2, 1::2] = g[:, 0]
    G[0, 0::2] = g[:, 0]
    G[1, 1::2] = g[:, 0]
    G[2, 0::2] = g[:, 1]
    G[3, 1::2] = g[:, 1]
    return B, G, F


def stress_matrix(sigma) -> np.ndarray:
    """4x4 block matrix of Cauchy stress components for the geometric term."""
    s = np.asarray(sigma)
    I2 = np.eye(2)
    return np.block([[s[0, 0] * I2, s[0, 1] * I2], [s[1, 0] * I2, s[1, 1] * I2]])
