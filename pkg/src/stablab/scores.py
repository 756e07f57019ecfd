"""Score functions and their certified stabilisation radii.

A score attaches a real value to every point of a configuration; the
functional of interest is the sum of the scores.  Each score here also
returns, per point, a radius ``R`` with the certificate that changing the
configuration outside ``B(x, R)`` (inside the window) leaves the score at ``x``
unchanged.

Planar k-NN and Voronoi radii come from cone constructions around ``x``: six
cones of opening ``pi/3`` whose bounding rays sit at ``pi/12 + j pi/3``, so no
ray is closer than ``pi/12`` to an axis-parallel window edge.

* k-NN: ``t_x`` is the least ``t`` such that every sector of radius ``t``
  either holds ``k + 1`` points or already covers the sector's whole part of
  the window; the radius is ``3 t_x``.
* Voronoi: in cone ``j`` take the equilateral triangle with apex ``x`` and side
  ``t``; ``R_j`` is the least side reaching a point (or covering the cone's
  part of the window); the radius is ``3 max_j R_j``.

When no sector/triangle ever reaches a point the ball must cover the whole
window, and the radius is reported as the sentinel ``2 * diam(window)`` with
``covering=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractError, DomainError, ParameterError
from .maximal_layers import distance_to_upper_plane, maximal_layers, maxlayer_radius
from .point_process import TAU_GEO, MarkedConfiguration, MarkedPoint, Window
from .proximity_graphs import knn_graph, voronoi_clipped

ROTATION = math.pi / 12
SECTOR = math.pi / 3
_COS30 = math.cos(math.pi / 6)
_RAYS = ROTATION + SECTOR * np.arange(7)  # ray j and ray j+1 bound cone j
_RAY_DIRS = np.column_stack([np.cos(_RAYS), np.sin(_RAYS)])
_BISECTORS = np.column_stack([np.cos(_RAYS[:6] + SECTOR / 2), np.sin(_RAYS[:6] + SECTOR / 2)])


@dataclass(frozen=True)
class StabRadiusSample:
    index: int | None
    radius: float
    covering: bool = False


def sentinel_radius(window: Window) -> float:
    return 2.0 * window.diameter


# --------------------------------------------------------------------------
# cone geometry in a planar cube window
# --------------------------------------------------------------------------


def cone_index(v: np.ndarray) -> np.ndarray:
    ang = np.mod(np.arctan2(v[..., 1], v[..., 0]) - ROTATION, 2 * math.pi)
    return np.minimum((ang // SECTOR).astype(np.int64), 5)


def _exit_distance(x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """Distance from each row of ``x`` along direction ``u`` to the box boundary."""
    t = np.full(len(x), np.inf)
    for a in range(2):
        if u[a] > 0:
            t = np.minimum(t, (h - x[:, a]) / u[a])
        elif u[a] < 0:
            t = np.minimum(t, (-h - x[:, a]) / u[a])
    return np.maximum(t, 0.0)


def cone_exhaustion(x: np.ndarray, window: Window, metric: str) -> np.ndarray:
    """``(n, 6)`` size at which each cone's piece of the window is used up.

    The piece is the polygon with vertices ``x``, the two ray exits and the
    window corners inside the cone; ``metric="radius"`` measures it by distance
    from ``x`` (sectors), ``metric="triangle"`` by equilateral-triangle side.
    """
    h = window.side / 2
    exits = np.column_stack([_exit_distance(x, _RAY_DIRS[j], h) for j in range(6)])
    out = np.maximum(exits, np.roll(exits, -1, axis=1))  # a ray exit scores the same in both metrics
    corners = np.array([(-h, -h), (h, -h), (h, h), (-h, h)])
    for c in corners:
        v = c - x
        dist = np.hypot(v[:, 0], v[:, 1])
        j = cone_index(v)
        if metric == "radius":
            size = dist
        else:
            size = np.einsum("ij,ij->i", v, _BISECTORS[j]) / _COS30
        rows = np.flatnonzero(dist > 0)
        np.maximum.at(out, (rows, j[rows]), size[rows])
    return out


def _cone_stats(queries: np.ndarray, points: np.ndarray, window: Window, kind: str, k: int = 1):
    """Per query and cone: the reach statistic and the exhaustion size.

    ``kind="sector"`` gives the distance of the (k+1)-th nearest point in each
    sector; ``kind="triangle"`` gives the smallest triangle side containing a
    point.  Points within ``TAU_GEO`` of the query (the query itself) are
    ignored.  Nearest-neighbour candidates come from a kd-tree; rows the
    candidates cannot settle are recomputed against every point.
    """
    nq = len(queries)
    metric = "radius" if kind == "sector" else "triangle"
    exhaust = cone_exhaustion(queries, window, metric)
    reach = np.full((nq, 6), np.inf)
    if len(points) == 0 or nq == 0:
        return reach, exhaust
    need = k + 1 if kind == "sector" else 1

    def stats(vec: np.ndarray, dist: np.ndarray) -> np.ndarray:
        cone = cone_index(vec)
        valid = np.isfinite(dist) & (dist > TAU_GEO)
        if kind == "sector":
            size = dist
        else:
            size = np.einsum("...j,...j->...", vec, _BISECTORS[cone]) / _COS30
        res = np.full((len(vec), 6), np.inf)
        for j in range(6):
            s = np.where(valid & (cone == j), size, np.inf)
            if s.shape[1] >= need:
                res[:, j] = np.partition(s, need - 1, axis=1)[:, need - 1]
        return res

    m = min(len(points), max(12 * need + 8, 32))
    dist, idx = cKDTree(points).query(queries, k=m)
    dist, idx = dist.reshape(nq, m), idx.reshape(nq, m)
    safe = np.where(idx < len(points), idx, 0)
    vec = points[safe] - queries[:, None, :]
    reach = stats(vec, dist)
    if m < len(points):
        # an unseen point has size >= its distance > horizon, so only values
        # within the horizon are final (a triangle side can exceed the distance)
        horizon = dist[:, -1][:, None]
        settled = (reach <= horizon) | (exhaust <= horizon)
        for i in np.flatnonzero(~settled.all(axis=1)):
            v = points - queries[i]
            reach[i] = stats(v[None], np.hypot(v[:, 0], v[:, 1])[None])[0]
    return reach, exhaust


def _check_planar_cube(window: Window) -> None:
    if window.d != 2 or window.kind != "cube":
        raise ParameterError("cone-based stabilisation radii are implemented for planar cube windows")


def cone_radius(queries: np.ndarray, points: np.ndarray, window: Window, kind: str, k: int = 1):
    """Radii ``3 max_j min(reach_j, exhaust_j)`` and the window-covering flags."""
    _check_planar_cube(window)
    queries = np.asarray(queries, dtype=float).reshape(-1, 2)
    reach, exhaust = _cone_stats(queries, np.asarray(points, dtype=float).reshape(-1, 2), window, kind, k)
    t = np.minimum(reach, exhaust).max(axis=1)
    covering = ~np.any(reach <= t[:, None], axis=1)
    radius = np.where(covering, sentinel_radius(window), 3.0 * t)
    return radius, covering


# --------------------------------------------------------------------------
# score function contract
# --------------------------------------------------------------------------


class ScoreFunction:
    """Base class.  Subclasses implement :meth:`evaluate_all` and :meth:`radii_all`."""

    id = "score"
    regime = "exponential"
    range_bound: float | None = None

    def check_window(self, window: Window) -> None:
        pass

    def evaluate_all(self, config: MarkedConfiguration) -> np.ndarray:
        raise NotImplementedError

    def radii_all(self, config: MarkedConfiguration) -> tuple[np.ndarray, np.ndarray]:
        """Per-point ``(radius, covering)`` arrays."""
        raise NotImplementedError

    def separation(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Distance in which the stabilisation ball is measured."""
        return np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)

    def _index(self, point, config) -> int | None:
        pos = point.position if isinstance(point, MarkedPoint) else point
        return config.index_of(pos)

    def evaluate(self, point, config: MarkedConfiguration) -> float:
        """Score of ``point``; 0 when it is not part of ``config``."""
        i = self._index(point, config)
        return 0.0 if i is None else float(self.evaluate_all(config)[i])

    def stab_radius(self, point, config: MarkedConfiguration) -> StabRadiusSample:
        i = self._index(point, config)
        if i is None:
            raise DomainError("stabilisation radius requested for a point outside the configuration")
        radius, covering = self.radii_all(config)
        return StabRadiusSample(i, float(radius[i]), bool(covering[i]))


class CountScore(ScoreFunction):
    """Every point scores 1, so the functional is the point count."""

    id = "count"
    regime = "range-bound"
    range_bound = 1.0

    def evaluate_all(self, config):
        return np.ones(len(config))

    def radii_all(self, config):
        return np.full(len(config), self.range_bound), np.zeros(len(config), dtype=bool)


@dataclass
class KnnScore(ScoreFunction):
    """Half the length of the k-NN edges at a point.

    With ``directed=True`` the directed graph is used; ``convention="out"``
    scores the full length of the point's outgoing edges and ``"half"`` scores
    half its incident (in and out) edges.  Both sum to the directed total.
    """

    k: int = 1
    directed: bool = False
    convention: str = "out"
    id: str = field(default="knn", init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.convention not in ("out", "half"):
            raise ParameterError(f"unknown directed-score convention {self.convention!r}")
        self.id = "knn-directed" if self.directed else "knn"

    def evaluate_all(self, config):
        n = len(config)
        if n == 0:
            return np.zeros(0)
        g = knn_graph(config, self.k, directed=self.directed)
        if self.directed and self.convention == "out":
            out = np.zeros(n)
            np.add.at(out, g.edges[:, 0], g.lengths)
            return out
        return g.degree_lengths() / 2

    def radii_all(self, config):
        return cone_radius(config.positions, config.positions, config.window, "sector", self.k)


class VoronoiScore(ScoreFunction):
    """Half the interior (non-window) boundary length of the clipped cell."""

    id = "voronoi"

    def check_window(self, window):
        _check_planar_cube(window)

    def evaluate_all(self, config):
        self.check_window(config.window)
        diagram = voronoi_clipped(config.positions, config.window)
        return np.array([0.5 * c.interior_length() for c in diagram.cells])

    def radii_all(self, config):
        return cone_radius(config.positions, config.positions, config.window, "triangle")


@dataclass
class NeighbourCountBase(ScoreFunction):
    """``min(1, weight * #same-species neighbours within distance r)``.

    A bounded, non-negative, range-bound score used as the default timber base.
    Without species marks every neighbour counts.
    """

    r: float = 1.0
    weight: float = 0.25
    id: str = field(default="neighbour-count", init=False)
    regime: str = field(default="range-bound", init=False)

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError("neighbour radius must be positive")

    @property
    def range_bound(self) -> float:
        return self.r

    def evaluate_all(self, config):
        n = len(config)
        counts = np.zeros(n)
        if n > 1:
            pairs = cKDTree(config.positions).query_pairs(self.r, output_type="ndarray")
            if config.species is not None and len(pairs):
                pairs = pairs[config.species[pairs[:, 0]] == config.species[pairs[:, 1]]]
            counts = np.bincount(pairs.ravel(), minlength=n).astype(float) if len(pairs) else counts
        return np.minimum(1.0, self.weight * counts)

    def radii_all(self, config):
        return np.full(len(config), self.r), np.zeros(len(config), dtype=bool)


@dataclass
class ConstantBase(ScoreFunction):
    value: float = 0.0
    radius: float = 1.0
    id: str = field(default="constant", init=False)
    regime: str = field(default="range-bound", init=False)

    @property
    def range_bound(self) -> float:
        return self.radius

    def evaluate_all(self, config):
        return np.full(len(config), float(self.value))

    def radii_all(self, config):
        return np.full(len(config), self.radius), np.zeros(len(config), dtype=bool)


@dataclass
class TimberScore(ScoreFunction):
    """``max(base + noise, 0)`` with ``base`` a range-bound score and noise read from the marks."""

    base: ScoreFunction = field(default_factory=NeighbourCountBase)
    id: str = field(default="timber", init=False)
    regime: str = field(default="range-bound", init=False)

    def __post_init__(self):
        if getattr(self.base, "range_bound", None) is None:
            raise ContractError("the timber score needs a range-bound base score")

    @property
    def range_bound(self) -> float:
        return self.base.range_bound

    def evaluate_all(self, config):
        base = self.base.evaluate_all(config)
        noise = config.noise if config.noise is not None else np.zeros(len(config))
        return np.maximum(base + noise, 0.0)

    def radii_all(self, config):
        return np.full(len(config), self.range_bound), np.zeros(len(config), dtype=bool)


@dataclass
class MaxLayerScore(ScoreFunction):
    """Distance to the slab's upper face for points of the k-th maximal layer, else 0.

    Stabilisation is measured along the base coordinates: a point can only
    be dominated from within ``r tan(theta_1)`` to its right.
    """

    k: int = 1
    id: str = field(default="maxlayer", init=False)
    regime: str = field(default="range-bound", init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"layer index must be >= 1, got {self.k}")

    def check_window(self, window):
        if window.kind != "slab":
            raise ParameterError("the maximal-layer score needs a slab window")

    def separation(self, x, y):
        return np.linalg.norm(np.asarray(y)[..., :-1] - np.asarray(x)[..., :-1], axis=-1)

    def evaluate_all(self, config):
        self.check_window(config.window)
        out = np.zeros(len(config))
        if len(config):
            members = maximal_layers(config.positions, self.k).members(self.k)
            out[members] = distance_to_upper_plane(config.positions[members], config.window)
        return out

    def radii_all(self, config):
        return np.full(len(config), maxlayer_radius(config.window)), np.zeros(len(config), dtype=bool)


SCORE_IDS = ("knn", "knn-directed", "voronoi", "timber", "maxlayer")


def make_score(score_id: str, **params) -> ScoreFunction:
    if score_id == "knn":
        return KnnScore(k=params.get("k", 1))
    if score_id == "knn-directed":
        return KnnScore(k=params.get("k", 1), directed=True, convention=params.get("convention", "out"))
    if score_id == "voronoi":
        return VoronoiScore()
    if score_id == "timber":
        return TimberScore(NeighbourCountBase(r=params.get("base_r", 1.0), weight=params.get("base_weight", 0.25)))
    if score_id == "maxlayer":
        return MaxLayerScore(k=params.get("k", 1))
    if score_id == "count":
        return CountScore()
    raise ParameterError(f"unknown score id {score_id!r}; expected one of {SCORE_IDS}")


# --------------------------------------------------------------------------
# functionals and per-point entry points
# --------------------------------------------------------------------------


def sum_scores(config: MarkedConfiguration, score: ScoreFunction) -> float:
    return float(score.evaluate_all(config).sum()) if len(config) else 0.0


def trimmed_sum(config: MarkedConfiguration, score: ScoreFunction, r: float) -> float:
    """Sum of the scores whose certified radius is at most ``r``."""
    if not r > 0:
        raise ParameterError(f"trimming radius must be positive, got {r}")
    if len(config) == 0:
        return 0.0
    radius, _ = score.radii_all(config)
    return float(score.evaluate_all(config)[radius <= r].sum())


def _require_member(x, config) -> int:
    pos = x.position if isinstance(x, MarkedPoint) else x
    i = config.index_of(pos)
    if i is None:
        raise DomainError(f"point {tuple(np.asarray(pos))} is not in the configuration")
    return i


def knn_score(x, config: MarkedConfiguration, k: int = 1) -> float:
    i = _require_member(x, config)
    return float(KnnScore(k).evaluate_all(config)[i])


def _query_radius(x, config, kind, k=1) -> StabRadiusSample:
    pos = np.asarray(x.position if isinstance(x, MarkedPoint) else x, dtype=float)
    if not config.window.contains(pos):
        raise DomainError("query point lies outside the window")
    radius, covering = cone_radius(pos[None], config.positions, config.window, kind, k)
    return StabRadiusSample(config.index_of(pos), float(radius[0]), bool(covering[0]))


def knn_stab_radius(x, config: MarkedConfiguration, k: int = 1) -> StabRadiusSample:
    """``3 t_x`` for the k-NN score at location ``x`` (a point of, or a site added to, ``config``)."""
    return _query_radius(x, config, "sector", k)


def voronoi_score(x, diagram) -> float:
    pos = np.asarray(x.position if isinstance(x, MarkedPoint) else x, dtype=float)
    hit = np.flatnonzero(np.all(np.abs(diagram.points - pos) <= TAU_GEO, axis=1)) if len(diagram.points) else []
    if len(hit) == 0:
        raise DomainError("generator not present in the diagram")
    return 0.5 * diagram.cells[int(hit[0])].interior_length()


def voronoi_stab_radius(x, config: MarkedConfiguration) -> StabRadiusSample:
    """``3 max_j R_j`` for the Voronoi score at location ``x``."""
    return _query_radius(x, config, "triangle")


def timber_score(x, config: MarkedConfiguration, base: ScoreFunction | None = None) -> float:
    i = _require_member(x, config)
    return float(TimberScore(base if base is not None else NeighbourCountBase()).evaluate_all(config)[i])


def maxlayer_stab_radius(x, config: MarkedConfiguration) -> StabRadiusSample:
    return StabRadiusSample(config.index_of(x.position if isinstance(x, MarkedPoint) else x), maxlayer_radius(config.window))
