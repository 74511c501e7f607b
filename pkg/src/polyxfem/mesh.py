"""Polygonal meshes: Voronoi generation, embedded structured refinement and
text I/O.

Hanging nodes created where the structured zone meets the Voronoi cells are
absorbed as ordinary vertices of the neighbouring polygon rings.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.spatial import Voronoi, cKDTree
from shapely.geometry import MultiPolygon, Polygon, box as shapely_box

from .basis import polygon_area, polygon_diameter

HOLE_SEGMENTS = 64


@dataclass
class Domain:
    """Outer boundary ring plus circular holes ``(cx, cy, r)``."""

    outer: np.ndarray
    holes: list = field(default_factory=list)

    @classmethod
    def rectangle(cls, x0, y0, x1, y1, holes=()):
        outer = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
        return cls(outer, [tuple(map(float, h)) for h in holes])

    @property
    def bounds(self):
        return (*self.outer.min(0), *self.outer.max(0))

    def hole_ring(self, k):
        cx, cy, r = self.holes[k]
        a = 2.0 * np.pi * np.arange(HOLE_SEGMENTS) / HOLE_SEGMENTS
        return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])

    def to_shapely(self) -> Polygon:
        return Polygon(self.outer, [self.hole_ring(k)[::-1] for k in range(len(self.holes))])

    @property
    def area(self) -> float:
        return float(self.to_shapely().area)

    @property
    def is_rectangle(self) -> bool:
        return len(self.outer) == 4 and np.isclose(Polygon(self.outer).area, np.prod(np.ptp(self.outer, axis=0)))


@dataclass
class RefinementSpec:
    region: tuple  # (xmin, ymin, xmax, ymax)
    cell_size: float

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        x0, y0, x1, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            raise ValueError("refinement region must have positive extent")


@dataclass
class PolyMesh:
    nodes: np.ndarray
    elements: list
    boundary_sets: dict = field(default_factory=dict)
    refined_region: tuple | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def ring(self, e) -> np.ndarray:
        return self.nodes[self.elements[e]]

    def areas(self) -> np.ndarray:
        return np.array([polygon_area(self.ring(e)) for e in range(self.n_elements)])

    def edges(self) -> dict:
        """Map sorted node pair -> list of elements using that edge."""
        out = {}
        for e, ring in enumerate(self.elements):
            n = len(ring)
            for i in range(n):
                a, b = int(ring[i]), int(ring[(i + 1) % n])
                out.setdefault((min(a, b), max(a, b)), []).append(e)
        return out

    def boundary_edges(self) -> list:
        """Boundary edges oriented as in their (counter-clockwise) element."""
        counts = self.edges()
        out = []
        for ring in self.elements:
            n = len(ring)
            for i in range(n):
                a, b = int(ring[i]), int(ring[(i + 1) % n])
                if len(counts[(min(a, b), max(a, b))]) == 1:
                    out.append((a, b))
        return out

    def node_elements(self) -> list:
        out = [[] for _ in range(self.n_nodes)]
        for e, ring in enumerate(self.elements):
            for i in ring:
                out[int(i)].append(e)
        return out

    def node_set(self, name) -> np.ndarray:
        s = self.boundary_sets[name]
        if s["type"] == "node":
            return np.asarray(s["items"], dtype=int)
        return np.unique(np.asarray(s["items"], dtype=int).ravel())

    def edge_set(self, name) -> np.ndarray:
        s = self.boundary_sets[name]
        if s["type"] != "edge":
            raise ValueError(f"boundary set {name!r} is not an edge set")
        return np.asarray(s["items"], dtype=int).reshape(-1, 2)


# ------------------------------------------------------------------ checks


def validate_mesh(mesh: PolyMesh, tol=1e-12):
    """Raise ``ValueError`` if any mesh invariant is violated."""
    k = mesh.n_nodes
    for e, ring in enumerate(mesh.elements):
        ring = np.asarray(ring)
        if len(ring) < 3:
            raise ValueError(f"element {e} has fewer than 3 vertices")
        if ring.min() < 0 or ring.max() >= k:
            raise ValueError(f"element {e} references a node out of range")
        if (ring == np.roll(ring, -1)).any() or len(set(ring.tolist())) != len(ring):
            raise ValueError(f"element {e} repeats a vertex")
        v = mesh.nodes[ring]
        if polygon_area(v) <= 0:
            raise ValueError(f"element {e} is not counter-clockwise")
        if not Polygon(v).is_valid:
            raise ValueError(f"element {e} is self-intersecting")
    for key, els in mesh.edges().items():
        if len(els) > 2:
            raise ValueError(f"edge {key} shared by {len(els)} elements")


def hanging_nodes(mesh: PolyMesh, tol=1e-9) -> list:
    """Nodes lying in the interior of some element edge not in that ring."""
    tree = cKDTree(mesh.nodes)
    scale = np.ptp(mesh.nodes, axis=0).max()
    out = []
    for e, ring in enumerate(mesh.elements):
        n = len(ring)
        for i in range(n):
            a, b = mesh.nodes[ring[i]], mesh.nodes[ring[(i + 1) % n]]
            L = np.linalg.norm(b - a)
            for j in tree.query_ball_point(0.5 * (a + b), 0.5 * L + tol * scale):
                if j in (ring[i], ring[(i + 1) % n]):
                    continue
                p = mesh.nodes[j]
                t = np.dot(p - a, b - a) / L ** 2
                dist = abs((b - a)[0] * (p - a)[1] - (b - a)[1] * (p - a)[0]) / L
                if 0 < t < 1 and dist <= tol * scale:
                    out.append((e, j))
    return out


def element_diameter(mesh: PolyMesh, elem: int) -> float:
    if not 0 <= elem < mesh.n_elements:
        raise IndexError(elem)
    return polygon_diameter(mesh.ring(elem))


# ------------------------------------------------------------ construction


def _assemble(polys, merge_tol):
    """Turn coordinate rings into a node/element structure with merged nodes."""
    coords = np.vstack(polys)
    tree = cKDTree(coords)
    parent = np.arange(len(coords))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(tree.query_pairs(merge_tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(coords))])
    uniq, inv = np.unique(roots, return_inverse=True)
    nodes = coords[uniq]
    elements = []
    off = 0
    for p in polys:
        ring = inv[off:off + len(p)]
        off += len(p)
        cleaned = [int(ring[0])]
        for v in ring[1:]:
            if v != cleaned[-1]:
                cleaned.append(int(v))
        while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
            cleaned.pop()
        if len(cleaned) >= 3:
            elements.append(np.array(cleaned, dtype=int))
    return nodes, elements


def _compact(nodes, elements):
    used = np.unique(np.concatenate(elements))
    remap = -np.ones(len(nodes), dtype=int)
    remap[used] = np.arange(len(used))
    return nodes[used], [remap[r] for r in elements]


def _conform(nodes, elements, tol):
    """Insert nodes lying on element edges into the rings (hanging nodes)."""
    tree = cKDTree(nodes)
    out = []
    for ring in elements:
        new = []
        n = len(ring)
        for i in range(n):
            a_i, b_i = ring[i], ring[(i + 1) % n]
            new.append(int(a_i))
            a, b = nodes[a_i], nodes[b_i]
            L = np.linalg.norm(b - a)
            cand = []
            for j in tree.query_ball_point(0.5 * (a + b), 0.5 * L + tol):
                if j == a_i or j == b_i:
                    continue
                p = nodes[j]
                t = np.dot(p - a, b - a) / L ** 2
                dist = abs((b - a)[0] * (p - a)[1] - (b - a)[1] * (p - a)[0]) / L
                if 1e-12 < t < 1 - 1e-12 and dist <= tol:
                    cand.append((t, j))
            new.extend(j for _, j in sorted(cand))
        out.append(np.array(new, dtype=int))
    return out


def _orient_ccw(nodes, elements):
    out = []
    for ring in elements:
        if polygon_area(nodes[ring]) < 0:
            ring = ring[::-1]
        out.append(np.asarray(ring, dtype=int))
    return out


def _polygon_pieces(geom):
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon)]


def _ring_coords(poly: Polygon) -> np.ndarray:
    poly = shapely.geometry.polygon.orient(poly, 1.0)
    return np.asarray(poly.exterior.coords)[:-1]


def _bounded_voronoi_cells(seeds, bounds):
    """Voronoi cells of ``seeds`` clipped to their bounding box via mirroring."""
    x0, y0, x1, y1 = bounds
    pad = 1e-9 * max(x1 - x0, y1 - y0)
    mirrors = [seeds]
    for axis, lo, hi in ((0, x0 - pad, x1 + pad), (1, y0 - pad, y1 + pad)):
        m = seeds.copy()
        m[:, axis] = 2 * lo - m[:, axis]
        mirrors.append(m)
        m = seeds.copy()
        m[:, axis] = 2 * hi - m[:, axis]
        mirrors.append(m)
    pts = np.vstack(mirrors)
    vor = Voronoi(pts)
    cells = []
    for i in range(len(seeds)):
        reg = vor.regions[vor.point_region[i]]
        if -1 in reg or len(reg) < 3:
            cells.append(None)
            continue
        cells.append(Polygon(vor.vertices[reg]))
    return cells


def _sample_in(domain_poly, n, rng, exclude=None):
    x0, y0, x1, y1 = domain_poly.bounds
    target = domain_poly if exclude is None else domain_poly.difference(exclude)
    if target.area <= 0:
        raise ValueError("no area available for seeds")
    pts = []
    shapely.prepare(target)
    while len(pts) < n:
        cand = rng.uniform([x0, y0], [x1, y1], size=(max(4 * n, 64), 2))
        ok = shapely.contains_xy(target, cand[:, 0], cand[:, 1])
        pts.extend(cand[ok].tolist())
    return np.array(pts[:n])


MAX_SEED_DENSITY = 1e8  # seeds per unit area


def generate_voronoi_mesh(domain: Domain, n_seeds: int, lloyd_iters: int = 100, rng_seed: int = 0,
                          fixed_seeds=None, collapse_frac: float = 0.02) -> PolyMesh:
    """Centroidal Voronoi mesh clipped to ``domain``.

    ``fixed_seeds`` are kept in place during relaxation; they shape the
    transition towards a region that will later be filled by
    :func:`embed_structured_refinement`.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    dpoly = domain.to_shapely()
    area = dpoly.area
    if not area > 0:
        raise ValueError("degenerate domain (zero area)")
    if n_seeds / area > MAX_SEED_DENSITY:
        raise ValueError("seed count exceeds a practicable density for this domain")
    rng = np.random.default_rng(rng_seed)
    fixed = np.zeros((0, 2)) if fixed_seeds is None else np.asarray(fixed_seeds, dtype=float).reshape(-1, 2)
    exclude = None
    if len(fixed):
        exclude = shapely.MultiPoint(fixed).convex_hull.buffer(1e-12)
    seeds = _sample_in(dpoly, n_seeds, rng, exclude)
    bounds = dpoly.bounds
    shapely.prepare(dpoly)

    def cells_for(s, keep_fixed=False):
        if len(s) + len(fixed) == 1:
            return [shapely_box(*bounds)]
        allp = np.vstack([s, fixed]) if len(fixed) else s
        cells = _bounded_voronoi_cells(allp, bounds)
        return cells if keep_fixed else cells[: len(s)]

    for _ in range(lloyd_iters):
        cells = cells_for(seeds)
        clipped = shapely.intersection(np.array(cells, dtype=object), dpoly)
        new = seeds.copy()
        for i, g in enumerate(clipped):
            pieces = _polygon_pieces(g)
            if pieces:
                big = max(pieces, key=lambda p: p.area)
                c = big.centroid
                new[i] = (c.x, c.y)
        seeds = new

    cells = cells_for(seeds, keep_fixed=True)
    clipped = shapely.intersection(np.array(cells, dtype=object), dpoly)
    polys = []
    for g in clipped:
        for piece in _polygon_pieces(g):
            if piece.area > 1e-12 * area:
                polys.append(_ring_coords(piece))
    h = math.sqrt(area / max(len(polys), 1))
    nodes, elements = _assemble(polys, 1e-9 * h)
    nodes, elements = _collapse_short_edges(nodes, elements, collapse_frac * h, domain)
    nodes, elements = _compact(nodes, elements)
    elements = _conform(nodes, _orient_ccw(nodes, elements), 1e-9 * h)
    mesh = PolyMesh(nodes, elements)
    mesh.boundary_sets = detect_boundary_sets(mesh, domain)
    validate_mesh(mesh)
    return mesh


def _on_domain_boundary(points, domain: Domain, tol):
    bd = domain.to_shapely().boundary
    return shapely.distance(shapely.points(points), bd) <= tol


def _collapse_short_edges(nodes, elements, min_len, domain):
    """Merge the endpoints of edges shorter than ``min_len``.

    Boundary nodes win over interior nodes so the domain outline is kept.
    """
    if min_len <= 0:
        return nodes, elements
    nodes = nodes.copy()
    scale = np.ptp(nodes, axis=0).max()
    on_bd = _on_domain_boundary(nodes, domain, 1e-9 * scale)
    corners = np.zeros(len(nodes), dtype=bool)
    for ring in [domain.outer] + [domain.hole_ring(k) for k in range(len(domain.holes))]:
        d = np.linalg.norm(nodes[:, None, :] - ring[None], axis=-1).min(1)
        corners |= d <= 1e-9 * scale
    parent = np.arange(len(nodes))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    pairs = set()
    for ring in elements:
        n = len(ring)
        for i in range(n):
            a, b = int(ring[i]), int(ring[(i + 1) % n])
            if np.linalg.norm(nodes[a] - nodes[b]) < min_len:
                pairs.add((min(a, b), max(a, b)))
    for a, b in sorted(pairs):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if corners[ra] and corners[rb]:
            continue
        if on_bd[ra] and on_bd[rb] and not (corners[ra] or corners[rb]):
            keep, drop = ra, rb
            nodes[keep] = 0.5 * (nodes[ra] + nodes[rb])
        elif corners[ra] or (on_bd[ra] and not on_bd[rb]):
            keep, drop = ra, rb
        elif corners[rb] or on_bd[rb]:
            keep, drop = rb, ra
        else:
            keep, drop = ra, rb
            nodes[keep] = 0.5 * (nodes[ra] + nodes[rb])
        parent[drop] = keep
    out = []
    for ring in elements:
        r = [find(int(i)) for i in ring]
        cleaned = [r[0]]
        for v in r[1:]:
            if v != cleaned[-1]:
                cleaned.append(v)
        while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
            cleaned.pop()
        if len(cleaned) >= 3 and polygon_area(nodes[cleaned]) > 0:
            out.append(np.array(cleaned, dtype=int))
    return nodes, out


def structured_quad_mesh(domain: Domain, nx: int, ny: int) -> PolyMesh:
    """Structured grid over the domain's bounding box.

    Cells cut by holes are clipped and kept as polygons; cells fully inside a
    hole are dropped.
    """
    x0, y0, x1, y1 = domain.bounds
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    if not domain.holes and domain.is_rectangle:
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        elements = []
        for j in range(ny):
            for i in range(nx):
                n0 = j * (nx + 1) + i
                elements.append(np.array([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1]))
        mesh = PolyMesh(nodes, elements)
    else:
        dpoly = domain.to_shapely()
        polys = []
        h = min((x1 - x0) / nx, (y1 - y0) / ny)
        for j in range(ny):
            for i in range(nx):
                cell = shapely_box(xs[i], ys[j], xs[i + 1], ys[j + 1])
                g = cell.intersection(dpoly)
                for piece in _polygon_pieces(g):
                    if piece.area > 1e-10 * cell.area:
                        polys.append(_ring_coords(piece))
        nodes, elements = _assemble(polys, 1e-9 * h)
        nodes, elements = _collapse_short_edges(nodes, elements, 0.05 * h, domain)
        nodes, elements = _compact(nodes, elements)
        elements = _conform(nodes, _orient_ccw(nodes, elements), 1e-9 * h)
        mesh = PolyMesh(nodes, elements)
    mesh.boundary_sets = detect_boundary_sets(mesh, domain)
    validate_mesh(mesh)
    return mesh


def refinement_box(spec: RefinementSpec, domain: Domain):
    """Snap the refinement region to whole cells, clipped to the domain box."""
    h = spec.cell_size
    dx0, dy0, dx1, dy1 = domain.bounds
    x0, y0, x1, y1 = spec.region
    tol = 1e-9 * h
    out = []
    for lo, hi, dlo, dhi in ((x0, x1, dx0, dx1), (y0, y1, dy0, dy1)):
        lo_c, hi_c = max(lo, dlo), min(hi, dhi)
        n = max(1, int(math.ceil((hi_c - lo_c) / h - 1e-9)))
        if lo <= dlo + tol:
            lo_c = dlo
            hi_c = lo_c + n * h
            if hi_c > dhi + tol:
                raise ValueError("refinement region does not fit the domain")
        elif hi >= dhi - tol:
            hi_c = dhi
            lo_c = hi_c - n * h
        else:
            mid = 0.5 * (lo_c + hi_c)
            lo_c, hi_c = mid - 0.5 * n * h, mid + 0.5 * n * h
        out.append((lo_c, hi_c, n))
    (bx0, bx1, nx), (by0, by1, ny) = out
    return (bx0, by0, bx1, by1), nx, ny


def grid_seeds(spec: RefinementSpec, domain: Domain) -> np.ndarray:
    """Cell centres of the structured zone (used as fixed Voronoi seeds)."""
    (bx0, by0, bx1, by1), nx, ny = refinement_box(spec, domain)
    h = spec.cell_size
    X, Y = np.meshgrid(bx0 + (np.arange(nx) + 0.5) * h, by0 + (np.arange(ny) + 0.5) * h)
    return np.column_stack([X.ravel(), Y.ravel()])


def embed_structured_refinement(mesh: PolyMesh, spec: RefinementSpec, crack=None, domain: Domain | None = None,
                                sliver_frac: float = 0.25) -> PolyMesh:
    """Replace the polygons overlapping ``spec.region`` by a structured quad grid.

    Remnants of cut polygons outside the zone are kept as polygons; remnants
    smaller than ``sliver_frac * cell_size**2`` are merged into a neighbour.
    Grid nodes on the zone boundary become vertices of the adjacent polygons.
    """
    h = spec.cell_size
    if domain is None:
        domain = _domain_from_mesh(mesh)
    (bx0, by0, bx1, by1), nx, ny = refinement_box(spec, domain)
    zone = shapely_box(bx0, by0, bx1, by1)
    dpoly = domain.to_shapely()
    if crack is not None:
        check_crack_in_zone(crack, (bx0, by0, bx1, by1), h, domain)

    polys = [Polygon(mesh.ring(e)) for e in range(mesh.n_elements)]
    hit = [p.intersection(zone).area > 1e-12 * p.area for p in polys]
    if not any(hit):
        return PolyMesh(mesh.nodes.copy(), [r.copy() for r in mesh.elements], dict(mesh.boundary_sets),
                        mesh.refined_region)
    sizes = [math.sqrt(p.area) for p, k in zip(polys, hit) if k]
    if h > 1.5 * max(sizes):
        raise ValueError("cell_size larger than the local polygon size")

    kept = [p for p, k in zip(polys, hit) if not k]
    remnants = []
    for p, k in zip(polys, hit):
        if k:
            remnants.extend(_polygon_pieces(p.difference(zone)))
    big = [r for r in remnants if r.area >= sliver_frac * h * h]
    small = [r for r in remnants if r.area < sliver_frac * h * h]
    outer = kept + big
    for s in small:
        best, best_len = None, 0.0
        for i, p in enumerate(outer):
            L = s.boundary.intersection(p.boundary).length
            if L > best_len:
                best, best_len = i, L
        if best is not None and best_len > 1e-9 * h:
            merged = outer[best].union(s)
            if isinstance(merged, Polygon) and not merged.interiors:
                outer[best] = merged
                continue
        outer.append(s)

    # snap remnant vertices on the zone boundary to grid nodes
    xs = bx0 + h * np.arange(nx + 1)
    ys = by0 + h * np.arange(ny + 1)
    tol = 1e-9 * h
    rings = []
    for p in outer:
        ring = _ring_coords(p).copy()
        for v in ring:
            on_x = (abs(v[0] - bx0) <= tol or abs(v[0] - bx1) <= tol) and by0 - tol <= v[1] <= by1 + tol
            on_y = (abs(v[1] - by0) <= tol or abs(v[1] - by1) <= tol) and bx0 - tol <= v[0] <= bx1 + tol
            if on_x:
                v[1] = ys[np.argmin(abs(ys - v[1]))]
            if on_y:
                v[0] = xs[np.argmin(abs(xs - v[0]))]
        rings.append(ring)
    for j in range(ny):
        for i in range(nx):
            cell = np.array([[xs[i], ys[j]], [xs[i + 1], ys[j]], [xs[i + 1], ys[j + 1]], [xs[i], ys[j + 1]]])
            rings.append(cell)
    nodes, elements = _assemble(rings, tol)
    nodes, elements = _compact(nodes, elements)
    elements = [r for r in _orient_ccw(nodes, elements) if polygon_area(nodes[r]) > 1e-12 * h * h]
    nodes, elements = _compact(nodes, elements)
    elements = _conform(nodes, elements, tol)
    out = PolyMesh(nodes, elements, refined_region=(bx0, by0, bx1, by1))
    out.boundary_sets = detect_boundary_sets(out, domain)
    validate_mesh(out)
    return out


def check_crack_in_zone(crack, zone, h, domain: Domain):
    """The crack must sit inside the zone with a ``2h`` margin except where
    the zone touches the domain boundary."""
    bx0, by0, bx1, by1 = zone
    dx0, dy0, dx1, dy1 = domain.bounds
    pts = np.asarray(crack.vertices if hasattr(crack, "vertices") else crack, dtype=float)
    tol = 1e-9 * h
    lo = np.array([bx0 if bx0 <= dx0 + tol else bx0 + 2 * h - tol, by0 if by0 <= dy0 + tol else by0 + 2 * h - tol])
    hi = np.array([bx1 if bx1 >= dx1 - tol else bx1 - 2 * h + tol, by1 if by1 >= dy1 - tol else by1 - 2 * h + tol])
    if (pts < lo - tol).any() or (pts > hi + tol).any():
        raise ValueError("refinement region does not cover the crack with a 2*cell_size margin")


def _domain_from_mesh(mesh: PolyMesh) -> Domain:
    x0, y0 = mesh.nodes.min(0)
    x1, y1 = mesh.nodes.max(0)
    return Domain.rectangle(x0, y0, x1, y1)


def build_refined_mesh(domain: Domain, n_seeds: int, spec: RefinementSpec, crack=None, lloyd_iters=100,
                       rng_seed=0) -> PolyMesh:
    """Voronoi mesh whose relaxation sees the structured zone, then embedding."""
    ghosts = grid_seeds(spec, domain)
    coarse = generate_voronoi_mesh(domain, n_seeds, lloyd_iters, rng_seed, fixed_seeds=ghosts)
    return embed_structured_refinement(coarse, spec, crack, domain)


# ------------------------------------------------------------- boundary sets


def detect_boundary_sets(mesh: PolyMesh, domain: Domain) -> dict:
    """Name boundary nodes/edges by the domain feature they lie on.

    Rectangles get ``bottom``, ``right``, ``top``, ``left`` edge sets and
    ``corner_bl``/``corner_br``/``corner_tr``/``corner_tl`` node sets.  Other
    outer rings use ``side0``, ``side1``...; holes use ``hole0``...
    """
    scale = np.ptp(mesh.nodes, axis=0).max()
    tol = 1e-8 * scale
    names = ["bottom", "right", "top", "left"] if domain.is_rectangle else None
    outer = domain.outer
    # for rectangles make the side order start at the lower-left corner
    if names is not None:
        start = int(np.argmin(outer[:, 0] + outer[:, 1]))
        outer = np.roll(outer, -start, axis=0)
    sides = []
    for i in range(len(outer)):
        a, b = outer[i], outer[(i + 1) % len(outer)]
        sides.append((names[i] if names else f"side{i}", a, b))

    def on_segment(p, a, b):
        ab = b - a
        t = np.dot(p - a, ab) / np.dot(ab, ab)
        d = abs(ab[0] * (p - a)[1] - ab[1] * (p - a)[0]) / np.linalg.norm(ab)
        return d <= tol and -1e-9 <= t <= 1 + 1e-9

    sets = {}
    bedges = mesh.boundary_edges()
    for name, a, b in sides:
        items = [e for e in bedges if on_segment(mesh.nodes[e[0]], a, b) and on_segment(mesh.nodes[e[1]], a, b)]
        sets[name] = {"type": "edge", "items": [list(map(int, e)) for e in items]}
    for k, (cx, cy, r) in enumerate(domain.holes):
        c = np.array([cx, cy])
        near = lambda p: abs(np.linalg.norm(p - c) - r) <= 1e-3 * r + tol
        items = [e for e in bedges if near(mesh.nodes[e[0]]) and near(mesh.nodes[e[1]])]
        sets[f"hole{k}"] = {"type": "edge", "items": [list(map(int, e)) for e in items]}
    if names is not None:
        for cname, corner in zip(["corner_bl", "corner_br", "corner_tr", "corner_tl"], outer):
            d = np.linalg.norm(mesh.nodes - corner, axis=1)
            sets[cname] = {"type": "node", "items": [int(np.argmin(d))]}
    return sets


# ---------------------------------------------------------------- text format


def write_mesh(mesh: PolyMesh, path_or_buf):
    """Write the line-oriented ``POLYMESH 1`` text format."""
    buf = io.StringIO()
    buf.write("POLYMESH 1\n")
    buf.write(f"NODES {mesh.n_nodes}\n")
    for x, y in mesh.nodes:
        buf.write(f"{x:.17g} {y:.17g}\n")
    buf.write(f"ELEMS {mesh.n_elements}\n")
    for ring in mesh.elements:
        buf.write(" ".join([str(len(ring))] + [str(int(i)) for i in ring]) + "\n")
    for name, s in mesh.boundary_sets.items():
        items = s["items"]
        buf.write(f"SET {name} {s['type']} {len(items)}\n")
        for it in items:
            buf.write((" ".join(str(int(i)) for i in it) if s["type"] == "edge" else str(int(it))) + "\n")
    if mesh.refined_region is not None:
        buf.write("REGION " + " ".join(f"{v:.17g}" for v in mesh.refined_region) + "\n")
    text = buf.getvalue()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def read_mesh(path_or_buf) -> PolyMesh:
    if hasattr(path_or_buf, "read"):
        lines = path_or_buf.read().splitlines()
    else:
        with open(path_or_buf) as fh:
            lines = fh.read().splitlines()
    it = iter(enumerate(lines, 1))

    def nxt():
        for ln, line in it:
            if line.strip():
                return ln, line.split()
        raise ValueError("unexpected end of mesh file")

    ln, tok = nxt()
    if tok != ["POLYMESH", "1"]:
        raise ValueError(f"line {ln}: expected header 'POLYMESH 1'")
    ln, tok = nxt()
    if tok[0] != "NODES":
        raise ValueError(f"line {ln}: expected NODES")
    nodes = np.array([[float(v) for v in nxt()[1]] for _ in range(int(tok[1]))]).reshape(-1, 2)
    ln, tok = nxt()
    if tok[0] != "ELEMS":
        raise ValueError(f"line {ln}: expected ELEMS")
    elements = []
    for _ in range(int(tok[1])):
        ln, row = nxt()
        n = int(row[0])
        if len(row) != n + 1:
            raise ValueError(f"line {ln}: element declares {n} vertices but lists {len(row) - 1}")
        elements.append(np.array([int(v) for v in row[1:]], dtype=int))
    sets, region = {}, None
    while True:
        try:
            ln, tok = nxt()
        except ValueError:
            break
        if tok[0] == "SET":
            name, kind, count = tok[1], tok[2], int(tok[3])
            items = []
            for _ in range(count):
                _, row = nxt()
                items.append([int(v) for v in row] if kind == "edge" else int(row[0]))
            sets[name] = {"type": kind, "items": items}
        elif tok[0] == "REGION":
            region = tuple(float(v) for v in tok[1:5])
        else:
            raise ValueError(f"line {ln}: unknown block {tok[0]!r}")
    return PolyMesh(nodes, elements, sets, region)
