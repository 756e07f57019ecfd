"""Independent reference computations used by the tests.

Each oracle takes a different route from the package code: brute force,
a different library, or exact arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.spatial import Voronoi


def brute_knn_edges(points: np.ndarray, k: int) -> set[tuple[int, int]]:
    """Directed k-NN edges by full sort, ties broken by index."""
    n = len(points)
    out = set()
    for i in range(n):
        d = np.hypot(*(points - points[i]).T)
        order = sorted((d[j], j) for j in range(n) if j != i)
        for _, j in order[:k]:
            out.add((i, j))
    return out


def brute_layers(points: np.ndarray) -> np.ndarray:
    """Longest-dominating-chain layers: layer(x) = 1 + max layer of the points dominating x."""
    n = len(points)
    dominated_by = [[j for j in range(n) if j != i and np.all(points[j] >= points[i])] for i in range(n)]
    layer = np.zeros(n, dtype=int)

    def get(i):
        if layer[i] == 0:
            layer[i] = 1 + max((get(j) for j in dominated_by[i]), default=0)
        return layer[i]

    for i in range(n):
        get(i)
    return layer


def peel_layers(points: np.ndarray) -> np.ndarray:
    """Layers by literally removing maximal sets one after another."""
    n = len(points)
    layer = np.zeros(n, dtype=int)
    alive = set(range(n))
    j = 0
    while alive:
        j += 1
        maximal = [i for i in alive if not any(np.all(points[q] >= points[i]) for q in alive if q != i)]
        for i in maximal:
            layer[i] = j
        alive -= set(maximal)
    return layer


def _liang_barsky(p, q, h):
    """Clip segment ``p -> q`` to the square ``[-h, h]^2``; None if it misses."""
    t0, t1 = 0.0, 1.0
    dx, dy = q[0] - p[0], q[1] - p[1]
    for pk, qk in ((-dx, p[0] + h), (dx, h - p[0]), (-dy, p[1] + h), (dy, h - p[1])):
        if pk == 0:
            if qk < 0:
                return None
        else:
            t = qk / pk
            if pk < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
    if t0 > t1:
        return None
    return (p[0] + t0 * dx, p[1] + t0 * dy), (p[0] + t1 * dx, p[1] + t1 * dy)


def voronoi_interior_length(points: np.ndarray, side: float) -> float:
    """Total length of Voronoi edges inside the square, from Qhull's unbounded diagram.

    Unbounded ridges are extended far enough to leave the square before
    clipping.
    """
    h = side / 2
    if len(points) < 2:
        return 0.0
    if len(points) == 2:
        p, q = points
        mid, d = (p + q) / 2, q - p
        u = np.array([-d[1], d[0]]) / np.hypot(*d)
        seg = _liang_barsky(mid - 4 * side * u, mid + 4 * side * u, h)
        return 0.0 if seg is None else math.dist(*seg)
    vor = Voronoi(points)
    centre = points.mean(axis=0)
    total = 0.0
    for (i, j), ridge in zip(vor.ridge_points, vor.ridge_vertices):
        ridge = list(ridge)
        if -1 not in ridge:
            a, b = vor.vertices[ridge[0]], vor.vertices[ridge[1]]
        else:
            v = vor.vertices[[r for r in ridge if r >= 0][0]]
            t = points[j] - points[i]
            n = np.array([-t[1], t[0]]) / np.hypot(*t)
            mid = (points[i] + points[j]) / 2
            if np.dot(mid - centre, n) < 0:
                n = -n
            a, b = v, v + n * 4 * side
        seg = _liang_barsky(a, b, h)
        if seg is not None:
            total += math.dist(*seg)
    return total


def irwin_hall_pdf(x: float, m: int) -> float:
    """Density of the sum of ``m`` uniforms on [0, 1]."""
    if x < 0 or x > m:
        return 0.0
    return sum((-1) ** j * math.comb(m, j) * (x - j) ** (m - 1) for j in range(int(math.floor(x)) + 1)) / math.factorial(m - 1)


def fft_tv_shift(a: float, n: int, gamma: float, step: float = 1e-4) -> float:
    """TV of a shift of the n-fold triangular convolution on a fine grid.

    The triangular density is convolved numerically by FFT and the TV is
    half the L1 distance between the grid density and its shift.
    """
    m = int(round(gamma / step))
    step = gamma / m if m else step
    x = np.arange(-a, a + step / 2, step)
    tri = np.maximum(1 - np.abs(x) / a, 0) / a * step  # cell masses
    dens = tri
    for _ in range(n - 1):
        size = len(dens) + len(tri) - 1
        nfft = 1 << (size - 1).bit_length()
        dens = np.fft.irfft(np.fft.rfft(dens, nfft) * np.fft.rfft(tri, nfft), nfft)[:size]
    shifted = np.concatenate([np.zeros(m), dens])
    padded = np.concatenate([dens, np.zeros(m)])
    return 0.5 * np.abs(padded - shifted).sum()


def normal_tv_quadrature(mu1, s1, mu2, s2) -> float:
    def pdf(x, m, s):
        return math.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))

    f = lambda x: abs(pdf(x, mu1, s1) - pdf(x, mu2, s2))  # noqa: E731
    lo = min(mu1 - 12 * s1, mu2 - 12 * s2)
    hi = max(mu1 + 12 * s1, mu2 + 12 * s2)
    # short pieces keep each unlocated kink of |f| inside a small interval
    edges = np.linspace(lo, hi, int((hi - lo) / (0.1 * min(s1, s2))) + 2)
    return 0.5 * sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]))


def rate_exponent_fraction(d: int, k: int, beta: Fraction) -> Fraction:
    num = beta * (k - 2) * (beta * (k - 2) - d * (15 * k - 14))
    den = (k * beta - 2 * beta - d * k) * (5 * d * k + 2 * beta * k - 4 * beta)
    return num / den


def variance_exponent_fraction(d: int, k: int, beta: Fraction) -> Fraction:
    return (k * beta - 2 * beta - 3 * d * k + 2 * d) / (k * beta - 2 * beta - d * k)


def poisson_var_se(var: float, n: int, lam_alpha: float) -> float:
    """Approximate standard error of a sample variance of Poisson(lam_alpha) counts."""
    mu4 = lam_alpha * (1 + 3 * lam_alpha)  # fourth central moment
    return math.sqrt((mu4 - var**2) / n)
