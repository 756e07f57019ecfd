"""Proximity structures on finite point sets.

k-nearest-neighbour graphs work in any dimension.  The Delaunay triangulation,
the window-clipped Voronoi tessellation and the Gabriel / relative-neighbourhood
/ sphere-of-influence graphs are planar.

Vertex ids are row indices into the point array; for a
:class:`~stablab.point_process.MarkedConfiguration` that is the canonical
lexicographic order, which is also the tie-break order for equal distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import DomainError, ParameterError
from .point_process import MarkedConfiguration, Window
from .predicates import incircle, incircle_batch, incircle_sos, orient2d

GRAPH_KINDS = ("gabriel", "rng", "soi")


def _as_points(points) -> np.ndarray:
    if isinstance(points, MarkedConfiguration):
        return points.positions
    pts = np.asarray(points, dtype=float)
    return pts.reshape(len(pts), -1) if pts.size else pts.reshape(0, 2)


@dataclass(frozen=True, eq=False)
class Graph:
    """Edge list over ``n`` vertices; undirected edges are stored with ``i < j``."""

    n: int
    edges: np.ndarray
    lengths: np.ndarray
    directed: bool = False

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def degree_lengths(self) -> np.ndarray:
        """Per-vertex sum of incident edge lengths (in and out edges alike)."""
        out = np.zeros(self.n)
        if len(self.edges):
            np.add.at(out, self.edges[:, 0], self.lengths)
            np.add.at(out, self.edges[:, 1], self.lengths)
        return out


def _make_graph(points: np.ndarray, pairs, directed: bool) -> Graph:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if not directed:
        pairs = np.sort(pairs, axis=1)
    if len(pairs):
        pairs = np.unique(pairs, axis=0)
    lengths = np.linalg.norm(points[pairs[:, 1]] - points[pairs[:, 0]], axis=1) if len(pairs) else np.zeros(0)
    return Graph(len(points), pairs, lengths, directed)


def total_edge_length(g: Graph) -> float:
    return float(g.lengths.sum())


# --------------------------------------------------------------------------
# k nearest neighbours
# --------------------------------------------------------------------------


def _brute_neighbours(points: np.ndarray, i: int, m: int) -> np.ndarray:
    dist = np.linalg.norm(points - points[i], axis=1)
    order = np.lexsort((np.arange(len(points)), dist))
    order = order[order != i]
    return order[:m]


def knn_indices(points, k: int) -> np.ndarray:
    """``(n, min(k, n-1))`` array of each point's nearest neighbours, closest first.

    Equal distances are broken by the smaller index.
    """
    pts = _as_points(points)
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    n = len(pts)
    m = min(k, n - 1)
    if m <= 0:
        return np.zeros((n, 0), dtype=np.int64)
    q = min(n, m + 2)
    dist, idx = cKDTree(pts).query(pts, k=q)
    dist, idx = np.atleast_2d(dist), np.atleast_2d(idx)
    rows = np.arange(n)
    # drop each point itself from its own list
    not_self = idx != rows[:, None]
    keep = np.cumsum(not_self, axis=1) <= q - 1
    sel = not_self & keep
    nb = idx[sel].reshape(n, q - 1)
    nd = dist[sel].reshape(n, q - 1)
    out = nb[:, :m].copy()
    # the kd-tree orders equal distances arbitrarily: redo rows with a tie
    # straddling the cut, and rows whose candidate block is fully tied
    scale = np.maximum(np.abs(nd).max(axis=1), 1.0)
    if q - 1 > m:
        tied = np.abs(nd[:, m] - nd[:, m - 1]) <= 1e-12 * scale
    else:
        tied = np.zeros(n, dtype=bool)
    tied |= np.any(np.abs(np.diff(nd[:, :m], axis=1)) <= 1e-12 * scale[:, None], axis=1) if m > 1 else False
    for i in np.flatnonzero(tied):
        out[i] = _brute_neighbours(pts, i, m)
    return out


def knn_graph(config, k: int, directed: bool = False) -> Graph:
    """k-NN graph; undirected keeps ``{x, y}`` when either is among the other's k nearest."""
    pts = _as_points(config)
    if len(pts) == 0:
        raise DomainError("k-NN graph of an empty configuration")
    nb = knn_indices(pts, k)
    src = np.repeat(np.arange(len(pts)), nb.shape[1])
    return _make_graph(pts, np.column_stack([src, nb.ravel()]), directed)


# --------------------------------------------------------------------------
# Delaunay
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Triangulation:
    points: np.ndarray
    triangles: np.ndarray  # (T, 3), counter-clockwise
    edges: np.ndarray  # (E, 2), i < j

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def neighbours(self) -> list[list[int]]:
        nbr: list[list[int]] = [[] for _ in range(len(self.points))]
        for i, j in self.edges:
            nbr[i].append(int(j))
            nbr[j].append(int(i))
        return nbr


def _edges_of(triangles: np.ndarray) -> np.ndarray:
    if len(triangles) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _legalize(points: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Lawson flips under the perturbed in-circle test.

    Qhull's floating-point output is Delaunay up to roundoff and leaves the
    choice of diagonal in cocircular groups to chance; the flips certify the
    result with exact predicates and pin that choice to the index rule.
    """
    tris = [list(t) for t in tris]
    owner: dict[tuple[int, int], list[int]] = {}
    for ti, t in enumerate(tris):
        for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            owner.setdefault((min(e), max(e)), []).append(ti)

    def opposite(ti, a, b):
        return next(v for v in tris[ti] if v != a and v != b)

    def directed_edge(ti, a, b):
        t = tris[ti]
        for s in range(3):
            if (t[s], t[(s + 1) % 3]) == (a, b):
                return True
        return False

    interior = [e for e, ts in owner.items() if len(ts) == 2]
    if interior:
        arr = np.array(interior)
        t1 = np.array([owner[tuple(e)][0] for e in interior])
        t2 = np.array([owner[tuple(e)][1] for e in interior])
        a_idx, b_idx = arr[:, 0], arr[:, 1]
        c_idx = np.array([opposite(t, a, b) for t, a, b in zip(t1, a_idx, b_idx)])
        d_idx = np.array([opposite(t, a, b) for t, a, b in zip(t2, a_idx, b_idx)])
        # orient so that (a, b, c) is counter-clockwise
        flip = np.array([not directed_edge(t, a, b) for t, a, b in zip(t1, a_idx, b_idx)])
        a2 = np.where(flip, b_idx, a_idx)
        b2 = np.where(flip, a_idx, b_idx)
        sgn = incircle_batch(points[a2], points[b2], points[c_idx], points[d_idx])
        stack = [tuple(e) for e, s in zip(interior, sgn) if s >= 0]
    else:
        stack = []

    while stack:
        e = stack.pop()
        ts = owner.get(e)
        if ts is None or len(ts) != 2:
            continue
        a, b = e
        t1, t2 = ts
        if not directed_edge(t1, a, b):
            t1, t2 = t2, t1
        c, d = opposite(t1, a, b), opposite(t2, a, b)
        if incircle_sos([points[a], points[b], points[c], points[d]], [a, b, c, d]) <= 0:
            continue
        # (a, b, c) and (b, a, d) become (a, d, c) and (d, b, c)
        tris[t1] = [a, d, c]
        tris[t2] = [d, b, c]
        del owner[e]
        owner[(min(c, d), max(c, d))] = [t1, t2]
        for key, old, new in (((min(b, c), max(b, c)), t1, t2), ((min(a, d), max(a, d)), t2, t1)):
            owner[key] = [new if t == old else t for t in owner[key]]
        stack.extend([(min(a, d), max(a, d)), (min(d, b), max(d, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a))])
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def delaunay_2d(points) -> Triangulation:
    """Delaunay triangulation; cocircular ties resolved by index-based perturbation.

    Fewer than three points, or all points collinear, yield no triangles and
    the path graph along the line.
    """
    pts = _as_points(points)
    if pts.shape[1] != 2:
        raise ParameterError("Delaunay triangulation is implemented for d = 2")
    n = len(pts)
    collinear = n < 3 or all(orient2d(pts[0], pts[1], pts[i]) == 0 for i in range(2, n))
    if collinear:
        order = np.lexsort(pts.T[::-1])
        e = np.sort(np.column_stack([order[:-1], order[1:]]), axis=1) if n > 1 else np.zeros((0, 2), np.int64)
        return Triangulation(pts, np.zeros((0, 3), np.int64), np.unique(e, axis=0) if len(e) else e)
    try:
        tri = Delaunay(pts, qhull_options="Qbb Qc Qz Q12 Qt")
    except QhullError:  # pragma: no cover - guarded by the collinearity test
        tri = Delaunay(pts, qhull_options="QJ")
    simp = tri.simplices.astype(np.int64)
    ccw = np.array([orient2d(pts[a], pts[b], pts[c]) for a, b, c in simp])
    simp = simp[ccw != 0]
    ccw = ccw[ccw != 0]
    simp[ccw < 0] = simp[ccw < 0][:, [0, 2, 1]]
    simp = _legalize(pts, simp)
    return Triangulation(pts, simp, _edges_of(simp))


def is_delaunay(tri: Triangulation) -> bool:
    """Brute-force empty-circumcircle check of every triangle against every point.

    Points exactly on a circumcircle are allowed.
    """
    pts = tri.points
    for a, b, c in tri.triangles:
        others = np.setdiff1d(np.arange(len(pts)), [a, b, c])
        if len(others) == 0:
            continue
        rep = lambda v: np.repeat(pts[[v]], len(others), axis=0)
        s = incircle_batch(rep(a), rep(b), rep(c), pts[others])
        if np.any(s > 0):
            return False
        if any(incircle(pts[a], pts[b], pts[c], pts[j]) > 0 for j in others[s == 0]):
            return False
    return True


# --------------------------------------------------------------------------
# clipped Voronoi tessellation
# --------------------------------------------------------------------------

WINDOW_EDGE = -1


@dataclass(frozen=True, eq=False)
class VoronoiCell:
    generator: int
    vertices: np.ndarray  # (m, 2), counter-clockwise
    labels: np.ndarray  # edge k runs vertices[k] -> vertices[k+1]; neighbour id or WINDOW_EDGE

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return float(0.5 * (x @ np.roll(y, -1) - y @ np.roll(x, -1))) if len(x) >= 3 else 0.0

    def edge_lengths(self) -> np.ndarray:
        if len(self.vertices) < 2:
            return np.zeros(0)
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    def interior_length(self) -> float:
        lengths = self.edge_lengths()
        return float(lengths[self.labels != WINDOW_EDGE].sum()) if len(lengths) else 0.0

    def segments(self):
        """Yield ``(x1, y1, x2, y2, flag, neighbour)`` per boundary segment."""
        m = len(self.vertices)
        for k in range(m):
            p, q = self.vertices[k], self.vertices[(k + 1) % m]
            lab = int(self.labels[k])
            yield (p[0], p[1], q[0], q[1], "window" if lab == WINDOW_EDGE else "interior", lab)


@dataclass(frozen=True, eq=False)
class VoronoiDiagram:
    window: Window
    points: np.ndarray
    cells: list[VoronoiCell]

    def cell(self, i: int) -> VoronoiCell:
        return self.cells[i]

    def total_interior_length(self) -> float:
        """Interior edge length, each shared edge counted once."""
        return 0.5 * sum(c.interior_length() for c in self.cells)

    def segments(self):
        for c in self.cells:
            for seg in c.segments():
                yield (c.generator,) + seg


def _clip(poly: list, labels: list, normal: np.ndarray, offset: float, label: int):
    """Keep the part of the polygon with ``normal . p <= offset``."""
    out_v, out_l = [], []
    m = len(poly)
    vals = [float(normal @ p) - offset for p in poly]
    for k in range(m):
        p, q = poly[k], poly[(k + 1) % m]
        fp, fq = vals[k], vals[(k + 1) % m]
        if fp <= 0:
            out_v.append(p)
            out_l.append(labels[k])
            if fq > 0:
                t = fp / (fp - fq)
                out_v.append(p + t * (q - p))
                out_l.append(label)
        elif fq <= 0:
            t = fp / (fp - fq)
            out_v.append(p + t * (q - p))
            out_l.append(labels[k])
    return out_v, out_l


def _clean(poly: list, labels: list, tol: float):
    """Drop zero-length edges left behind by clipping through a vertex."""
    k = 0
    while k < len(poly) and len(poly) > 1:
        if np.linalg.norm(poly[(k + 1) % len(poly)] - poly[k]) <= tol:
            # the edge into vertex k now runs straight to vertex k+1
            del poly[k]
            del labels[k]
        else:
            k += 1
    return poly, labels


def voronoi_cell(points: np.ndarray, i: int, neighbours, window: Window) -> VoronoiCell:
    h = window.side / 2
    poly = [np.array(v, dtype=float) for v in ((-h, -h), (h, -h), (h, h), (-h, h))]
    labels = [WINDOW_EDGE] * 4
    x = points[i]
    for j in neighbours:
        normal = points[j] - x
        offset = float(normal @ (points[j] + x)) / 2
        poly, labels = _clip(poly, labels, normal, offset, int(j))
        if not poly:
            break
    poly, labels = _clean(poly, labels, 1e-12 * max(h, 1.0))
    verts = np.array(poly).reshape(-1, 2)
    return VoronoiCell(i, verts, np.array(labels, dtype=np.int64))


def voronoi_clipped(points, window: Window) -> VoronoiDiagram:
    """Voronoi tessellation of a planar cube window, cell by cell.

    Each cell is the window clipped by the bisector half-planes of its
    Delaunay neighbours.  Boundary segments are labelled with the neighbouring
    generator, or :data:`WINDOW_EDGE` when they lie on the window boundary.
    """
    pts = _as_points(points)
    if window.d != 2 or window.kind != "cube":
        raise ParameterError("Voronoi tessellations are implemented for planar cube windows")
    if len(pts) and not np.all(window.contains(pts)):
        raise DomainError("Voronoi generators must lie inside the window")
    if len(pts) == 0:
        return VoronoiDiagram(window, pts, [])
    nbrs = delaunay_2d(pts).neighbours()
    cells = [voronoi_cell(pts, i, sorted(nbrs[i]), window) for i in range(len(pts))]
    return VoronoiDiagram(window, pts, cells)


# --------------------------------------------------------------------------
# Gabriel, relative neighbourhood, sphere of influence
# --------------------------------------------------------------------------


def _blocked(points: np.ndarray, pairs: np.ndarray, kind: str) -> np.ndarray:
    """For each candidate pair, whether another point lies in its empty region."""
    out = np.zeros(len(pairs), dtype=bool)
    idx = np.arange(len(points))
    for s in range(0, len(pairs), 256):
        chunk = pairs[s : s + 256]
        x, y = points[chunk[:, 0]], points[chunk[:, 1]]
        if kind == "gabriel":
            mid = (x + y) / 2
            rad2 = ((x - y) ** 2).sum(1) / 4
            inside = ((points[None, :, :] - mid[:, None, :]) ** 2).sum(-1) < rad2[:, None]
        else:
            dxy2 = ((x - y) ** 2).sum(1)
            dx = ((points[None, :, :] - x[:, None, :]) ** 2).sum(-1)
            dy = ((points[None, :, :] - y[:, None, :]) ** 2).sum(-1)
            inside = (dx < dxy2[:, None]) & (dy < dxy2[:, None])
        inside &= idx[None, :] != chunk[:, :1]
        inside &= idx[None, :] != chunk[:, 1:]
        out[s : s + 256] = inside.any(axis=1)
    return out


def proximity_graph(points, kind: str, candidates: str = "auto") -> Graph:
    """Gabriel (``"gabriel"``), relative-neighbourhood (``"rng"``) or sphere-of-influence (``"soi"``) graph.

    For Gabriel and RNG graphs in the plane the candidate pairs are the Delaunay
    edges (both graphs are subgraphs of it); ``candidates="all"`` tests every
    pair instead and works in any dimension.
    """
    if kind not in GRAPH_KINDS:
        raise ParameterError(f"unknown proximity graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        return _make_graph(pts, np.zeros((0, 2), np.int64), False)
    if kind == "soi":
        nn = np.linalg.norm(pts[knn_indices(pts, 1)[:, 0]] - pts, axis=1)
        pairs = np.array(sorted(cKDTree(pts).query_pairs(2 * nn.max() * (1 + 1e-12))), dtype=np.int64).reshape(-1, 2)
        if len(pairs):
            dist = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
            pairs = pairs[dist <= nn[pairs[:, 0]] + nn[pairs[:, 1]]]
        return _make_graph(pts, pairs, False)
    if candidates == "auto":
        candidates = "delaunay" if pts.shape[1] == 2 else "all"
    if candidates == "delaunay":
        pairs = delaunay_2d(pts).edges
    elif candidates == "all":
        i, j = np.triu_indices(n, 1)
        pairs = np.column_stack([i, j])
    else:
        raise ParameterError(f"unknown candidate set {candidates!r}")
    keep = ~_blocked(pts, pairs, kind)
    return _make_graph(pts, pairs[keep], False)
