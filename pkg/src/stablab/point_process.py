"""Observation windows and marked homogeneous Poisson point processes.

Two window families are supported: the centred cube of volume ``alpha`` and
the sheared slab used for maximal layers,

    {x : 0 <= x_i <= alpha**(1/(d-1)) for i < d,  0 <= x_d + sum_i x_i cot(theta_i) <= r}.

Configurations are immutable.  Points are kept in lexicographic order so that
two configurations holding the same point set compare equal, and so that
vertex ids handed out by the graph code are stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import DomainError, DuplicateError, ParameterError
from .rng import split, stream

#: Membership / duplicate tolerance, in window side units.
TAU_GEO = 1e-9

MARK_KINDS = ("none", "categorical", "real", "pair")


# --------------------------------------------------------------------------
# shear map
# --------------------------------------------------------------------------


def _check_angles(theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.size == 0:
        raise ParameterError("theta must be a non-empty vector of angles")
    if not np.all((theta > 0.0) & (theta < math.pi / 2)):
        raise ParameterError(f"every angle must lie in the open interval (0, pi/2), got {theta}")
    return theta


def shear_transform(x, theta) -> np.ndarray:
    """Add ``sum_i x_i cot(theta_i)`` to the last coordinate.

    ``x`` may be a single ``d``-vector or an ``(n, d)`` array; ``theta`` holds
    the ``d - 1`` angles.
    """
    theta = _check_angles(theta)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != theta.size + 1:
        raise ParameterError(f"need {theta.size + 1} coordinates for {theta.size} angles")
    out = x.copy()
    out[..., -1] += x[..., :-1] @ (1.0 / np.tan(theta))
    return out


def inverse_shear(x, theta) -> np.ndarray:
    theta = _check_angles(theta)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != theta.size + 1:
        raise ParameterError(f"need {theta.size + 1} coordinates for {theta.size} angles")
    out = x.copy()
    out[..., -1] -= x[..., :-1] @ (1.0 / np.tan(theta))
    return out


# --------------------------------------------------------------------------
# windows
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """A cube ``[-side/2, side/2]^d`` of volume ``alpha``, or a sheared slab."""

    d: int
    alpha: float
    kind: str = "cube"
    r: float | None = None
    theta: tuple[float, ...] = ()

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"dimension must be a positive integer, got {self.d}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ParameterError(f"window volume alpha must be positive, got {self.alpha}")
        if self.kind == "cube":
            if self.r is not None or self.theta:
                raise ParameterError("cube windows take no slab height or angles")
        elif self.kind == "slab":
            if self.d < 2:
                raise ParameterError("slab windows need d >= 2")
            if self.r is None or not self.r > 0:
                raise ParameterError(f"slab height r must be positive, got {self.r}")
            theta = tuple(float(t) for t in _check_angles(self.theta))
            if len(theta) != self.d - 1:
                raise ParameterError(f"slab in d={self.d} needs {self.d - 1} angles")
            object.__setattr__(self, "theta", theta)
        else:
            raise ParameterError(f"unknown window kind {self.kind!r}")

    @classmethod
    def cube(cls, alpha: float, d: int = 2) -> "Window":
        return cls(d=d, alpha=float(alpha))

    @classmethod
    def slab(cls, alpha: float, r: float, theta) -> "Window":
        theta = tuple(float(t) for t in np.atleast_1d(theta))
        return cls(d=len(theta) + 1, alpha=float(alpha), kind="slab", r=float(r), theta=theta)

    @property
    def side(self) -> float:
        """Cube side, or the side of the slab's base square."""
        if self.kind == "cube":
            return self.alpha ** (1.0 / self.d)
        return self.alpha ** (1.0 / (self.d - 1))

    @property
    def volume(self) -> float:
        return self.alpha if self.kind == "cube" else self.alpha * self.r

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.d, -self.side / 2) if self.kind == "cube" else None

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.d, self.side / 2) if self.kind == "cube" else None

    def vertices(self) -> np.ndarray:
        """Corner points of the window (2**d of them)."""
        if self.kind == "cube":
            h = self.side / 2
            return np.array(list(product((-h, h), repeat=self.d)))
        box = np.array(list(product((0.0, self.side), repeat=self.d - 1)))
        corners = [np.append(b, m) for b in box for m in (0.0, self.r)]
        return inverse_shear(np.array(corners), self.theta)

    @property
    def diameter(self) -> float:
        v = self.vertices()
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def contains(self, x, tol: float = TAU_GEO) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.d:
            raise ParameterError(f"expected {self.d}-dimensional points")
        if self.kind == "cube":
            h = self.side / 2
            inside = np.all(np.abs(x) <= h + tol, axis=1)
        else:
            base = x[:, :-1]
            m = shear_transform(x, self.theta)[:, -1]
            inside = np.all((base >= -tol) & (base <= self.side + tol), axis=1)
            inside &= (m >= -tol) & (m <= self.r + tol)
        return bool(inside[0]) if single else inside


# --------------------------------------------------------------------------
# marks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkSampler:
    """I.i.d. mark law.

    ``kind`` is ``"none"``, ``"categorical"`` (species ids ``0..n-1`` drawn with
    ``probs``), ``"real"`` (noise from ``noise``) or ``"pair"`` (an independent
    species and noise per point, as the timber score needs).  ``noise`` is a
    ``(distribution, params)`` pair; supported distributions are ``normal``
    ``(mu, sigma)``, ``uniform`` ``(lo, hi)`` and ``exponential`` ``(scale,)``.
    """

    kind: str = "none"
    probs: tuple[float, ...] = ()
    noise: tuple[str, tuple[float, ...]] = ("normal", (0.0, 1.0))

    def __post_init__(self):
        if self.kind not in MARK_KINDS:
            raise ParameterError(f"unknown mark kind {self.kind!r}")
        if self.kind in ("categorical", "pair"):
            p = np.asarray(self.probs, dtype=float)
            if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ParameterError(f"categorical probabilities must be >= 0 and sum to 1, got {self.probs}")
            object.__setattr__(self, "probs", tuple(float(v) for v in p))
        if self.kind in ("real", "pair"):
            dist, params = self.noise
            if dist not in ("normal", "uniform", "exponential"):
                raise ParameterError(f"unknown noise distribution {dist!r}")
            object.__setattr__(self, "noise", (dist, tuple(float(v) for v in params)))

    def sample(self, rng: np.random.Generator, n: int):
        species = noise = None
        if self.kind in ("categorical", "pair"):
            species = rng.choice(len(self.probs), size=n, p=self.probs).astype(np.int64)
        if self.kind in ("real", "pair"):
            dist, params = self.noise
            if dist == "normal":
                noise = rng.normal(params[0], params[1], size=n)
            elif dist == "uniform":
                noise = rng.uniform(params[0], params[1], size=n)
            else:
                noise = rng.exponential(params[0], size=n)
        return species, noise


NO_MARKS = MarkSampler()


@dataclass(frozen=True)
class MarkedPoint:
    position: tuple[float, ...]
    species: int | None = None
    noise: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    @property
    def mark_kind(self) -> str:
        if self.species is not None and self.noise is not None:
            return "pair"
        if self.species is not None:
            return "categorical"
        return "real" if self.noise is not None else "none"


def _readonly(a):
    if a is not None:
        a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarkedConfiguration:
    """Finite marked point set inside a window, in lexicographic order."""

    positions: np.ndarray
    window: Window
    lam: float = 1.0
    species: np.ndarray | None = None
    noise: np.ndarray | None = None
    _sorted: bool = field(default=False, repr=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, self.window.d)
        species = None if self.species is None else np.array(self.species, dtype=np.int64)
        noise = None if self.noise is None else np.array(self.noise, dtype=float)
        for name, arr in (("species", species), ("noise", noise)):
            if arr is not None and arr.shape != (len(pos),):
                raise ParameterError(f"{name} marks must have one entry per point")
        if not self._sorted and len(pos) > 1:
            order = np.lexsort(pos.T[::-1])
            pos = pos[order]
            species = None if species is None else species[order]
            noise = None if noise is None else noise[order]
        object.__setattr__(self, "positions", _readonly(pos))
        object.__setattr__(self, "species", _readonly(species))
        object.__setattr__(self, "noise", _readonly(noise))
        object.__setattr__(self, "_sorted", True)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def d(self) -> int:
        return self.window.d

    @property
    def mark_kind(self) -> str:
        if self.species is not None and self.noise is not None:
            return "pair"
        if self.species is not None:
            return "categorical"
        return "real" if self.noise is not None else "none"

    def point(self, i: int) -> MarkedPoint:
        return MarkedPoint(
            self.positions[i],
            None if self.species is None else int(self.species[i]),
            None if self.noise is None else float(self.noise[i]),
        )

    def __iter__(self):
        return (self.point(i) for i in range(len(self)))

    def index_of(self, position, tol: float = TAU_GEO) -> int | None:
        """Index of the point at ``position`` (within ``tol`` per coordinate), or None."""
        if len(self) == 0:
            return None
        x = np.asarray(position, dtype=float)
        hit = np.flatnonzero(np.all(np.abs(self.positions - x) <= tol, axis=1))
        return int(hit[0]) if hit.size else None

    def same_points(self, other: "MarkedConfiguration") -> bool:
        if len(self) != len(other) or self.window != other.window:
            return False
        ok = np.array_equal(self.positions, other.positions)
        for a, b in ((self.species, other.species), (self.noise, other.noise)):
            ok &= (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
        return bool(ok)

    def validate(self) -> None:
        """Raise if a point lies outside the window or two points coincide."""
        if len(self) and not np.all(self.window.contains(self.positions)):
            raise DomainError("configuration has points outside its window")
        if len(self) > 1:
            gaps = np.abs(np.diff(self.positions, axis=0)).max(axis=1)
            if np.any(gaps <= TAU_GEO):
                raise DuplicateError("configuration has duplicate positions")

    def with_subset(self, keep) -> "MarkedConfiguration":
        keep = np.asarray(keep)
        return MarkedConfiguration(
            self.positions[keep],
            self.window,
            self.lam,
            None if self.species is None else self.species[keep],
            None if self.noise is None else self.noise[keep],
            _sorted=True,
        )

    def translated(self, shift, window: Window | None = None) -> "MarkedConfiguration":
        return MarkedConfiguration(
            self.positions + np.asarray(shift, dtype=float),
            window or self.window,
            self.lam,
            self.species,
            self.noise,
        )


def empty_configuration(window: Window, lam: float = 1.0, marks: MarkSampler = NO_MARKS) -> MarkedConfiguration:
    species = np.zeros(0, np.int64) if marks.kind in ("categorical", "pair") else None
    noise = np.zeros(0) if marks.kind in ("real", "pair") else None
    return MarkedConfiguration(np.zeros((0, window.d)), window, lam, species, noise)


def insert_point(config: MarkedConfiguration, p: MarkedPoint) -> MarkedConfiguration:
    """Return ``config`` plus the point ``p``; the input is left untouched."""
    x = np.asarray(p.position, dtype=float)
    if x.shape != (config.d,):
        raise ParameterError(f"expected a {config.d}-dimensional position")
    if not config.window.contains(x):
        raise DomainError(f"point {p.position} lies outside the window")
    if config.index_of(x) is not None:
        raise DuplicateError(f"a point already sits at {p.position}")

    def extend(arr, value, name):
        if value is None:
            if arr is not None and len(arr):
                raise ParameterError(f"inserted point lacks the configuration's {name} mark")
            return None
        if arr is None and len(config):
            raise ParameterError(f"inserted point carries a {name} mark the configuration lacks")
        return np.append(arr if arr is not None else np.zeros(0), value)

    return MarkedConfiguration(
        np.vstack([config.positions, x]),
        config.window,
        config.lam,
        extend(config.species, p.species, "species"),
        extend(config.noise, p.noise, "noise"),
    )


def remove_point(config: MarkedConfiguration, position) -> MarkedConfiguration:
    i = config.index_of(position)
    if i is None:
        raise DomainError(f"no point at {tuple(position)}")
    keep = np.ones(len(config), dtype=bool)
    keep[i] = False
    return config.with_subset(keep)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _check_rate(lam: float) -> float:
    if not (lam > 0 and math.isfinite(lam)):
        raise ParameterError(f"intensity must be positive, got {lam}")
    return float(lam)


def sample_poisson(window: Window, lam: float, marks: MarkSampler = NO_MARKS, seed=0) -> MarkedConfiguration:
    """Homogeneous Poisson process of rate ``lam`` on ``window`` with i.i.d. marks.

    Positions (count first, then coordinates) come from stream ``(seed, 0)``
    and marks from the independent stream ``(seed, 1)``.
    """
    lam = _check_rate(lam)
    if window.kind == "slab":
        return sample_slab(window.alpha, window.r, window.theta, lam, marks, seed)
    rng = stream(seed, 0)
    n = int(rng.poisson(lam * window.volume))
    h = window.side / 2
    pos = rng.uniform(-h, h, size=(n, window.d))
    species, noise = marks.sample(stream(seed, 1), n)
    return MarkedConfiguration(pos, window, lam, species, noise)


def sample_slab(alpha: float, r: float, theta, lam: float, marks: MarkSampler = NO_MARKS, seed=0) -> MarkedConfiguration:
    """Poisson process on the slab, drawn uniformly in the sheared box then unsheared."""
    window = Window.slab(alpha, r, theta)
    lam = _check_rate(lam)
    rng = stream(seed, 0)
    n = int(rng.poisson(lam * window.volume))
    box = np.empty((n, window.d))
    box[:, :-1] = rng.uniform(0.0, window.side, size=(n, window.d - 1))
    box[:, -1] = rng.uniform(0.0, r, size=n)
    species, noise = marks.sample(stream(seed, 1), n)
    return MarkedConfiguration(inverse_shear(box, window.theta), window, lam, species, noise)


__all__ = [
    "TAU_GEO",
    "Window",
    "MarkSampler",
    "MarkedPoint",
    "MarkedConfiguration",
    "NO_MARKS",
    "empty_configuration",
    "insert_point",
    "remove_point",
    "sample_poisson",
    "sample_slab",
    "shear_transform",
    "inverse_shear",
    "split",
]
