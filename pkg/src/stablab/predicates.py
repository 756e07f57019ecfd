"""Orientation and in-circle tests with exact fallback.

Each predicate first evaluates the determinant in double precision together
with a forward error bound (Shewchuk's stage-A bounds).  If the sign is not
certified it re-evaluates with exact rational arithmetic, so the returned sign
is always the sign of the exact determinant of the given doubles.

``incircle_sos`` additionally breaks exact cocircularity by symbolic
perturbation: point ``i`` is lifted by ``eps**(rank of its index)``, smaller
indices receiving the larger lift.  The perturbed determinant is linear in the
lifts, so its sign is the sign of the first non-vanishing cofactor.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

_EPS = 2.0**-53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _sign(v) -> int:
    return int(v > 0) - int(v < 0)


def orient2d_exact(a, b, c) -> int:
    ax, ay, bx, by, cx, cy = (Fraction(float(v)) for v in (a[0], a[1], b[0], b[1], c[0], c[1]))
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def orient2d(a, b, c) -> int:
    """+1 if ``a, b, c`` turn counter-clockwise, -1 if clockwise, 0 if collinear."""
    left = (a[0] - c[0]) * (b[1] - c[1])
    right = (a[1] - c[1]) * (b[0] - c[0])
    det = left - right
    if abs(det) > _CCW_BOUND * (abs(left) + abs(right)):
        return _sign(det)
    return orient2d_exact(a, b, c)


def incircle_exact(a, b, c, d) -> int:
    fa, fb, fc, fd = ([Fraction(float(v)) for v in p[:2]] for p in (a, b, c, d))
    rows = []
    for p in (fa, fb, fc):
        dx, dy = p[0] - fd[0], p[1] - fd[1]
        rows.append((dx, dy, dx * dx + dy * dy))
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    det = a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0)
    return _sign(det)


def incircle(a, b, c, d) -> int:
    """+1 if ``d`` is inside the circle through counter-clockwise ``a, b, c``."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    bc = bdx * cdy - cdx * bdy
    ca = cdx * ady - adx * cdy
    ab = adx * bdy - bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * bc + blift * ca + clift * ab
    permanent = (
        (abs(bdx * cdy) + abs(cdx * bdy)) * alift
        + (abs(cdx * ady) + abs(adx * cdy)) * blift
        + (abs(adx * bdy) + abs(bdx * ady)) * clift
    )
    if abs(det) > _ICC_BOUND * permanent:
        return _sign(det)
    return incircle_exact(a, b, c, d)


def incircle_sos(pts, idx) -> int:
    """In-circle sign for points ``pts[0..3]`` with global ids ``idx``; never 0
    unless three of the points are collinear and cocircular at once."""
    s = incircle(*pts)
    if s:
        return s
    # the 4x4 lifted determinant has rows (x, y, x^2 + y^2, 1); its cofactor in
    # the lift column for row p is (-1)**p * orient(other three rows)
    for p in sorted(range(4), key=lambda j: idx[j]):
        others = [pts[j] for j in range(4) if j != p]
        o = orient2d_exact(*others)
        if o:
            return o if p % 2 == 0 else -o
    return 0


def incircle_batch(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Vectorised filtered in-circle sign; 0 marks rows the filter could not certify."""
    adx, ady = a[:, 0] - d[:, 0], a[:, 1] - d[:, 1]
    bdx, bdy = b[:, 0] - d[:, 0], b[:, 1] - d[:, 1]
    cdx, cdy = c[:, 0] - d[:, 0], c[:, 1] - d[:, 1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady)
    permanent = (
        (np.abs(bdx * cdy) + np.abs(cdx * bdy)) * alift
        + (np.abs(cdx * ady) + np.abs(adx * cdy)) * blift
        + (np.abs(adx * bdy) + np.abs(bdx * ady)) * clift
    )
    out = np.sign(det).astype(int)
    out[np.abs(det) <= _ICC_BOUND * permanent] = 0
    return out
