"""Closed-form bounds and the exact quantities they are checked against.

Every bound is returned raw (it may exceed 1) unless ``clamp=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import ConstraintError, DecompositionError, ParameterError

C1 = 6.0
C2 = 0.116


def _clamp(v: float, clamp: bool) -> float:
    return min(max(v, 0.0), 1.0) if clamp else v


def _positive(name: str, v: float) -> float:
    if not v > 0:
        raise ParameterError(f"{name} must be positive, got {v}")
    return float(v)


# --------------------------------------------------------------------------
# triangular law
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangularLaw:
    """Density ``(1/a)(1 - |x|/a)`` on ``[-a, a]``."""

    a: float

    def __post_init__(self):
        _positive("half-width a", self.a)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.maximum(1.0 - np.abs(x) / self.a, 0.0) / self.a

    def cf(self, s):
        return triangular_cf(self.a, s)


def triangular_cf(a: float, s):
    """Characteristic function ``2(1 - cos(as))/(as)^2`` (real; equals 1 at 0)."""
    _positive("half-width a", a)
    z = a * np.asarray(s, dtype=float)
    # 1 - cos z = 2 sin^2(z/2) keeps full precision near the origin
    out = np.sinc(z / (2 * np.pi)) ** 2
    return float(out) if out.ndim == 0 else out


def tv_shift_bound_triangular(a: float, n: int, gamma: float, clamp: bool = False) -> float:
    """Upper bound on the TV distance between ``T_n`` and ``T_n + gamma``.

    ``T_n`` is the sum of ``n`` independent triangular(``a``) variables.
    """
    _positive("half-width a", a)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if gamma < 0:
        raise ParameterError(f"shift must be >= 0, got {gamma}")
    val = gamma / a * (math.sqrt(3.0 / (math.pi * n)) + 2.0 / ((2 * n - 1) * math.pi ** (2 * n)))
    return _clamp(val, clamp)


class PiecewisePoly:
    """Exact piecewise polynomial on ``[breaks[0], breaks[-1]]``, zero outside.

    ``coeffs[i]`` holds ascending-power :class:`Fraction` coefficients in
    ``x`` valid on ``[breaks[i], breaks[i+1]]``.
    """

    def __init__(self, breaks: list[Fraction], coeffs: list[list[Fraction]]):
        if len(coeffs) != len(breaks) - 1:
            raise ParameterError("need one polynomial per interval")
        self.breaks = breaks
        self.coeffs = coeffs

    @staticmethod
    def _horner(c, x):
        v = Fraction(0)
        for ci in reversed(c):
            v = v * x + ci
        return v

    def __call__(self, x) -> Fraction:
        x = Fraction(x)
        if x < self.breaks[0] or x > self.breaks[-1]:
            return Fraction(0)
        for i in range(len(self.coeffs)):
            if x <= self.breaks[i + 1]:
                return self._horner(self.coeffs[i], x)
        return Fraction(0)  # pragma: no cover

    @property
    def degree(self) -> int:
        return max(len(c) for c in self.coeffs) - 1

    def antiderivative(self) -> "PiecewisePoly":
        """Continuous antiderivative vanishing at the left end; extended by its final value."""
        out = []
        acc = Fraction(0)
        for i, c in enumerate(self.coeffs):
            ic = [Fraction(0)] + [ci / (j + 1) for j, ci in enumerate(c)]
            ic[0] = acc - self._horner(ic, self.breaks[i])
            acc = self._horner(ic, self.breaks[i + 1])
            out.append(ic)
        return PiecewisePoly(list(self.breaks), out)

    def total(self) -> Fraction:
        G = self.antiderivative()
        return G._horner(G.coeffs[-1], self.breaks[-1])


def _shift(c: list[Fraction], h: Fraction) -> list[Fraction]:
    """Coefficients of ``p(x + h)``."""
    out = [Fraction(0)] * len(c)
    for j, cj in enumerate(c):
        for i in range(j + 1):
            out[i] += cj * math.comb(j, i) * h ** (j - i)
    return out


def _cdf_at(G: PiecewisePoly, x: Fraction) -> Fraction:
    if x <= G.breaks[0]:
        return Fraction(0)
    if x >= G.breaks[-1]:
        return PiecewisePoly._horner(G.coeffs[-1], G.breaks[-1])
    return G(x)


def _smooth_uniform(g: PiecewisePoly, h: Fraction) -> PiecewisePoly:
    """Convolve with the uniform density on ``[-h, h]``: ``(G(x+h) - G(x-h)) / 2h``."""
    G = g.antiderivative()
    lo, hi = g.breaks[0] - h, g.breaks[-1] + h
    breaks = sorted({b - h for b in G.breaks} | {b + h for b in G.breaks})
    total = PiecewisePoly._horner(G.coeffs[-1], G.breaks[-1])
    deg = len(G.coeffs[0])

    def piece(point_mid, shift):
        # polynomial (in x) equal to G(x + shift) near x = point_mid
        y = point_mid + shift
        if y <= G.breaks[0]:
            return [Fraction(0)] * deg
        if y >= G.breaks[-1]:
            return [total] + [Fraction(0)] * (deg - 1)
        for i in range(len(G.coeffs)):
            if y <= G.breaks[i + 1]:
                return _shift(G.coeffs[i], shift)
        raise AssertionError  # pragma: no cover

    coeffs = []
    for left, right in zip(breaks[:-1], breaks[1:]):
        mid = (left + right) / 2
        up, down = piece(mid, h), piece(mid, -h)
        coeffs.append([(u - d) / (2 * h) for u, d in zip(up, down)])
    assert breaks[0] == lo and breaks[-1] == hi
    return PiecewisePoly(breaks, coeffs)


@lru_cache(maxsize=None)
def triangular_convolution_density(n: int) -> PiecewisePoly:
    """Exact density of the sum of ``n`` triangular(1) variables (``2n`` uniforms on ``[-1/2, 1/2]``)."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    h = Fraction(1, 2)
    g = PiecewisePoly([-h, h], [[Fraction(1)]])
    for _ in range(2 * n - 1):
        g = _smooth_uniform(g, h)
    return g


@lru_cache(maxsize=None)
def _triangular_cdf(n: int) -> PiecewisePoly:
    return triangular_convolution_density(n).antiderivative()


EXACT_MAX_N = 20


def tv_shift_exact_triangular(a: float, n: int, gamma: float) -> float:
    """Exact TV distance between ``T_n`` and ``T_n + gamma``.

    The density of ``T_n`` is symmetric and unimodal, so the distance is the
    mass it puts on ``[-gamma/2, gamma/2]``.  Computed with exact rational
    piecewise polynomials for ``n <= 20`` and by Fourier inversion beyond.
    """
    _positive("half-width a", a)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if gamma < 0:
        raise ParameterError(f"shift must be >= 0, got {gamma}")
    if gamma >= 2 * n * a:
        return 1.0
    if n > EXACT_MAX_N:
        return _tv_shift_spectral(a, n, gamma)
    c = Fraction(gamma) / Fraction(a) / 2
    G = _triangular_cdf(n)
    return float(_cdf_at(G, c) - _cdf_at(G, -c))


def _tv_shift_spectral(a: float, n: int, gamma: float) -> float:
    # the integrand decays like s^{-2n-1}; for small n the truncation point runs away
    if n < 3:
        raise ParameterError("spectral inversion needs n >= 3")
    c = gamma / 2

    def f(s):
        return math.sin(c * s) / s * triangular_cf(a, s) ** n if s > 0 else c

    # |cf| <= 4/(as)^2, so the tail past s_max contributes below 1e-13
    s_max = 2.0 / a * 10 ** (13.0 / (2 * n)) + 2 * math.pi / a
    zeros = [2 * math.pi * j / a for j in range(1, int(s_max * a / (2 * math.pi)) + 1)]
    edges = [0.0] + zeros + [s_max]
    total = sum(integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    return min(max(2.0 / math.pi * total, 0.0), 1.0)


# --------------------------------------------------------------------------
# triangular minorant
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangularMinorant:
    """``theta * kappa_a(x - u) <= f(x)``: a sub-probability triangular piece of ``f``."""

    u: float
    a: float
    theta: float
    b: float

    def __call__(self, x):
        return self.theta * TriangularLaw(self.a).pdf(np.asarray(x, dtype=float) - self.u)


def triangular_minorant(grid, density) -> TriangularMinorant:
    """Triangular minorant of a density tabulated on a uniform grid.

    ``u`` is a maximiser of the tabulated density (among ties, the one allowing
    the widest window), ``v`` the largest grid half-width with
    ``min f >= f(u)/2`` on ``[u - v, u + v]``, ``b = f(u)/2``, ``a = v`` and
    ``theta = v b``.  The result is checked at every grid node.
    """
    x = np.asarray(grid, dtype=float)
    f = np.asarray(density, dtype=float)
    if x.ndim != 1 or x.shape != f.shape or len(x) < 3:
        raise ParameterError("grid and density must be matching 1-D arrays with >= 3 nodes")
    step = np.diff(x)
    if not np.all(step > 0) or not np.allclose(step, step[0], rtol=1e-9):
        raise ParameterError("grid must be uniform and increasing")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ParameterError("density values must be finite and non-negative")
    top = f.max()
    if top <= 0:
        raise DecompositionError("density is identically zero; no absolutely continuous part to extract")
    b = top / 2
    ok = f >= b
    best = None
    for i in np.flatnonzero(f == top):
        m = 0
        while i - m - 1 >= 0 and i + m + 1 < len(x) and ok[i - m - 1] and ok[i + m + 1]:
            m += 1
        if best is None or m > best[1]:
            best = (i, m)
    i, m = best
    if m == 0:
        raise DecompositionError("grid too coarse: no node besides the maximum keeps half the peak height")
    v = (x[i + m] - x[i - m]) / 2
    out = TriangularMinorant(u=float(x[i]), a=float(v), theta=float(v * b), b=float(b))
    if np.any(out(x) > f * (1 + 1e-12) + 1e-300):
        raise DecompositionError("minorant certification failed")  # pragma: no cover
    return out


# --------------------------------------------------------------------------
# normal laws
# --------------------------------------------------------------------------


def _normal_crossings(m1, s1, m2, s2) -> list[float]:
    """Points where the two normal densities are equal."""
    if s1 == s2:
        return [(m1 + m2) / 2]
    # log f1 - log f2 = 0 is a quadratic in x
    A = 1 / (2 * s2**2) - 1 / (2 * s1**2)
    B = m1 / s1**2 - m2 / s2**2
    C = m2**2 / (2 * s2**2) - m1**2 / (2 * s1**2) + math.log(s2 / s1)
    disc = B * B - 4 * A * C
    r = math.sqrt(max(disc, 0.0))
    q = -0.5 * (B + math.copysign(r, B)) if B != 0 else -0.5 * r
    roots = [q / A, C / q] if q != 0 else [0.0, 0.0]
    return sorted(roots)


def normal_tv_exact(mu1: float, s1: float, mu2: float, s2: float, method: str = "crossing") -> float:
    """Exact TV distance between ``N(mu1, s1^2)`` and ``N(mu2, s2^2)``.

    Equal variances and equal means use closed forms.  Otherwise
    ``method="crossing"`` evaluates the normal CDFs at the two density
    crossings, and ``method="quadrature"`` integrates ``|f1 - f2|/2``
    adaptively between them (slower; kept as a cross-check).
    """
    _positive("sigma1", s1)
    _positive("sigma2", s2)
    if mu1 == mu2 and s1 == s2:
        return 0.0
    if s1 == s2:
        mu = abs(mu1 - mu2) / s1
        return float(ndtr(mu / 2) - ndtr(-mu / 2))
    if mu1 == mu2:
        lo, hi = sorted((s1, s2))
        sig = hi / lo
        xs = math.sqrt(2 * math.log(sig) * sig**2 / (sig**2 - 1))
        return float(2 * (ndtr(xs) - ndtr(xs / sig)))
    c1, c2 = _normal_crossings(mu1, s1, mu2, s2)
    if method == "crossing":
        # f1 > f2 between the crossings iff s1 < s2
        inner = (ndtr((c2 - mu1) / s1) - ndtr((c1 - mu1) / s1)) - (ndtr((c2 - mu2) / s2) - ndtr((c1 - mu2) / s2))
        return float(abs(inner))
    if method != "quadrature":
        raise ParameterError(f"unknown method {method!r}")

    k1, k2 = 1 / (s1 * math.sqrt(2 * math.pi)), 1 / (s2 * math.sqrt(2 * math.pi))

    def gap(x):
        return abs(k1 * math.exp(-0.5 * ((x - mu1) / s1) ** 2) - k2 * math.exp(-0.5 * ((x - mu2) / s2) ** 2))

    # the integrand has a single sign on each piece, so quad converges fast
    span = 15 * max(s1, s2)
    left, right = min(mu1, mu2, c1) - span, max(mu1, mu2, c2) + span
    total = 0.0
    for lo, hi in ((left, c1), (c1, c2), (c2, right)):
        total += integrate.quad(gap, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    return total / 2


def normal_tv_bound(mu1: float, s1: float, mu2: float, s2: float, clamp: bool = False) -> float:
    _positive("sigma1", s1)
    _positive("sigma2", s2)
    hi, lo = max(s1, s2), min(s1, s2)
    return _clamp(math.sqrt(2 / math.pi) * (abs(mu1 - mu2) / (2 * hi) + hi / lo - 1), clamp)


# --------------------------------------------------------------------------
# stabilisation tails and trimming
# --------------------------------------------------------------------------


def _check_tail_args(lam, t):
    _positive("intensity", lam)
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}")


def knn_radius_tail_bound(lam: float, k: int, t: float, c1: float = C1, c2: float = C2, clamp: bool = False) -> float:
    """Tail bound for the k-NN stabilisation radius: ``c1 e^{-z} sum_{i<=k} z^i/i!`` with ``z = c2 lam (t/3)^2``."""
    _check_tail_args(lam, t)
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    z = c2 * lam * (t / 3) ** 2
    s = sum(math.exp(i * math.log(z) - z - math.lgamma(i + 1)) if z > 0 else float(i == 0) for i in range(k + 1))
    return _clamp(c1 * s, clamp)


def voronoi_radius_tail_bound(lam: float, t: float, c1: float = C1, c2: float = C2, clamp: bool = False) -> float:
    _check_tail_args(lam, t)
    return _clamp(c1 * math.exp(-c2 * lam * (t / 3) ** 2), clamp)


def trimming_bound(alpha: float, lam: float, tail: Callable[[float], float], r: float, clamp: bool = False) -> float:
    """Cost ``alpha lam tau(r)`` of dropping the scores whose radius exceeds ``r``."""
    _positive("alpha", alpha)
    _positive("intensity", lam)
    tau = float(tail(r))
    if not 0 <= tau <= 1 + 1e-12 and not math.isinf(tau):
        raise ParameterError(f"tail value must be a probability, got {tau}")
    return _clamp(alpha * lam * min(tau, 1.0), clamp)


# --------------------------------------------------------------------------
# rates
# --------------------------------------------------------------------------

REGIMES = ("range-bound", "exponential", "polynomial")


@dataclass(frozen=True)
class RateParams:
    d: int = 2
    regime: str = "exponential"
    beta: float | None = None
    k: int = 3
    k_prime: float | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ParameterError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if self.regime == "polynomial":
            if self.k < 3:
                raise ParameterError(f"moment order k must be >= 3, got {self.k}")
            if self.beta is None:
                raise ParameterError("the polynomial regime needs beta")
            if self.k_prime is not None and not self.k_prime > self.k:
                raise ParameterError(f"k' must exceed k, got k'={self.k_prime}, k={self.k}")

    @property
    def rate_threshold(self) -> float:
        return (15 * self.k - 14) * self.d / (self.k - 2)

    @property
    def variance_threshold(self) -> float:
        return (3 * self.k - 2) * self.d / (self.k - 2)


def rate_exponent(params: RateParams) -> float:
    """Exponent ``e`` of the polynomial-regime rate ``alpha^{-e}``."""
    b, k, d = params.beta, params.k, params.d
    if not b > params.rate_threshold:
        raise ConstraintError(f"beta={b} must exceed (15k-14)d/(k-2) = {params.rate_threshold}")
    num = b * (k - 2) * (b * (k - 2) - d * (15 * k - 14))
    den = (k * b - 2 * b - d * k) * (5 * d * k + 2 * b * k - 4 * b)
    return num / den


def theorem_rate(alpha: float, params: RateParams) -> float:
    """Raw rate expression (no constants) for the TV distance to the normal."""
    if not alpha > 1:
        raise ParameterError(f"alpha must exceed 1, got {alpha}")
    if params.regime == "range-bound":
        return alpha**-0.5
    if params.regime == "exponential":
        return alpha**-0.5 * math.log(alpha) ** (5 * params.d / 2)
    return alpha ** -rate_exponent(params)


def variance_exponent(params: RateParams) -> float:
    """Growth exponent in the variance lower bound ``alpha^{e}``."""
    if params.regime != "polynomial":
        return 1.0
    b, k, d = params.beta, params.k, params.d
    if not b > params.variance_threshold:
        raise ConstraintError(f"beta={b} must exceed (3k-2)d/(k-2) = {params.variance_threshold}")
    return (k * b - 2 * b - 3 * d * k + 2 * d) / (k * b - 2 * b - d * k)
