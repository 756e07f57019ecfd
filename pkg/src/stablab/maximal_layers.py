"""Maximal layers under componentwise dominance, and the slab distance functional.

A point ``x`` is dominated by ``y != x`` when ``y_i >= x_i`` in every
coordinate.  Layer 1 is the set of undominated points; layer ``j`` is layer 1
of what is left after removing layers ``1..j-1``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateError, ParameterError
from .point_process import MarkedConfiguration, Window, shear_transform


@dataclass(frozen=True, eq=False)
class LayerAssignment:
    """``layer[i]`` is the layer of point ``i``, or 0 if it lies beyond ``kmax``."""

    layer: np.ndarray
    kmax: int

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.layer == j)

    @property
    def leftover(self) -> np.ndarray:
        return np.flatnonzero(self.layer == 0)

    @property
    def n_layers(self) -> int:
        return int(self.layer.max()) if len(self.layer) else 0


def _check_distinct(points: np.ndarray) -> None:
    if len(points) > 1 and len(np.unique(points, axis=0)) != len(points):
        raise DuplicateError("maximal layers need distinct points")


def _layers_2d(points: np.ndarray) -> np.ndarray:
    # Sweep by first coordinate descending (second descending on ties), so every
    # processed point has x1 >= the current one and dominates it iff its x2 is
    # >= too.  stair[L] is the running max of x2 over layer L+1, non-increasing
    # in L, so the layer is found by bisection.
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    stair: list[float] = []
    layer = np.empty(len(points), dtype=np.int64)
    neg = []  # -stair, ascending, for bisect
    for i in order:
        y = points[i, 1]
        pos = bisect.bisect_right(neg, -y)  # number of layers whose max x2 >= y
        if pos == len(stair):
            stair.append(y)
            neg.append(-y)
        else:
            stair[pos] = y
            neg[pos] = -y
        layer[i] = pos + 1
    return layer


def _layers_general(points: np.ndarray, kmax: int) -> np.ndarray:
    n = len(points)
    ge = np.all(points[None, :, :] >= points[:, None, :], axis=2)  # ge[i, j]: j dominates-or-equals i
    np.fill_diagonal(ge, False)
    layer = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    j = 0
    while alive.any() and j < kmax:
        j += 1
        maximal = alive & ~(ge & alive[None, :]).any(axis=1)
        layer[maximal] = j
        alive &= ~maximal
    return layer


def maximal_layers(points, kmax: int | None = None) -> LayerAssignment:
    pts = np.asarray(points.positions if isinstance(points, MarkedConfiguration) else points, dtype=float)
    pts = pts.reshape(len(pts), -1) if pts.size else pts.reshape(0, 2)
    n = len(pts)
    if kmax is None:
        kmax = max(n, 1)
    if kmax < 1:
        raise ParameterError(f"kmax must be >= 1, got {kmax}")
    _check_distinct(pts)
    if n == 0:
        return LayerAssignment(np.zeros(0, dtype=np.int64), kmax)
    if pts.shape[1] == 2:
        layer = _layers_2d(pts)
        layer[layer > kmax] = 0
    else:
        layer = _layers_general(pts, kmax)
    return LayerAssignment(layer, kmax)


def distance_to_upper_plane(points, window: Window) -> np.ndarray:
    """Euclidean distance to the hyperplane ``x_d + sum x_i cot(theta_i) = r``."""
    cot = 1.0 / np.tan(np.asarray(window.theta))
    normal = np.append(cot, 1.0)
    normal /= np.linalg.norm(normal)
    anchor = np.zeros(window.d)
    anchor[-1] = window.r
    return np.abs((np.asarray(points) - anchor) @ normal)


def _slab_window(config: MarkedConfiguration) -> Window:
    if config.window.kind != "slab":
        raise ParameterError("the layer distance functional lives on a slab window")
    return config.window


def layer_distance_sum(config: MarkedConfiguration, k: int) -> float:
    """Total distance from the points of the k-th maximal layer to the upper face."""
    if k < 1:
        raise ParameterError(f"layer index must be >= 1, got {k}")
    window = _slab_window(config)
    layers = maximal_layers(config.positions, k)
    pts = config.positions[layers.members(k)]
    return float(distance_to_upper_plane(pts, window).sum()) if len(pts) else 0.0


def layer_distance_sum_marks(config: MarkedConfiguration, k: int) -> float:
    """Same functional through the sheared-mark representation (planar slabs only).

    After the shear the last coordinate ``m`` of each point is a uniform mark on
    ``[0, r]`` and each distance equals ``sin(theta_1) (r - m)``.
    """
    if k < 1:
        raise ParameterError(f"layer index must be >= 1, got {k}")
    window = _slab_window(config)
    if window.d != 2:
        raise ParameterError("the mark representation is only available for d = 2")
    layers = maximal_layers(config.positions, k)
    marks = shear_transform(config.positions[layers.members(k)], window.theta)[:, -1]
    return float(math.sin(window.theta[0]) * np.sum(window.r - marks))


def maxlayer_radius(window: Window) -> float:
    """Constant stabilisation radius ``r tan(theta_1) + 1``, measured along the base."""
    if window.kind != "slab" or window.d != 2:
        raise ParameterError("the maximal-layer radius is defined for planar slabs")
    return window.r * math.tan(window.theta[0]) + 1.0
