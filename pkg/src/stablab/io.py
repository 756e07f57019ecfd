"""CSV writers and readers for configurations, graphs, cells, layers and results.

Floats are written with 17 significant digits so every value round-trips.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .errors import ParameterError


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def write_rows(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path} is empty")
    return rows[0], rows[1:]


def write_configuration(path, config) -> None:
    """``x1..xd,mark_kind,mark_value``; a pair mark is written as ``species:noise``."""
    kind = config.mark_kind
    header = [f"x{j + 1}" for j in range(config.d)] + ["mark_kind", "mark_value"]

    def mark(i):
        if kind == "none":
            return ""
        if kind == "categorical":
            return str(int(config.species[i]))
        if kind == "real":
            return fmt(config.noise[i])
        return f"{int(config.species[i])}:{fmt(config.noise[i])}"

    write_rows(path, header, ([*config.positions[i], kind, mark(i)] for i in range(len(config))))


def read_configuration(path):
    """Positions plus ``(species, noise)`` arrays (``None`` where absent)."""
    header, rows = read_rows(path)
    d = len(header) - 2
    pos = np.array([[float(v) for v in r[:d]] for r in rows]).reshape(len(rows), d)
    kinds = {r[d] for r in rows}
    kind = kinds.pop() if len(kinds) == 1 else "none"
    species = noise = None
    if kind in ("categorical", "pair"):
        species = np.array([int(r[d + 1].split(":")[0]) for r in rows], dtype=np.int64)
    if kind == "real":
        noise = np.array([float(r[d + 1]) for r in rows])
    if kind == "pair":
        noise = np.array([float(r[d + 1].split(":")[1]) for r in rows])
    return pos, species, noise


def write_graph(path, graph) -> None:
    write_rows(path, ["src", "dst", "length"], ([int(a), int(b), l] for (a, b), l in zip(graph.edges, graph.lengths)))


def write_voronoi(path, diagram) -> None:
    """One row per cell edge: ``generator,x1,y1,x2,y2,flag``, flag ``window`` or ``interior``."""
    rows = []
    for i, cell in enumerate(diagram.cells):
        for x1, y1, x2, y2, flag, _ in cell.segments():
            rows.append([i, x1, y1, x2, y2, flag])
    write_rows(path, ["generator", "x1", "y1", "x2", "y2", "flag"], rows)


def write_layers(path, points, layers) -> None:
    pts = np.asarray(points)
    header = [f"x{j + 1}" for j in range(pts.shape[1])] + ["layer"]
    write_rows(path, header, ([*p, int(l)] for p, l in zip(pts, layers.layer)))


SUMMARY_HEADER = ["alpha", "n_reps", "mean", "var", "d_K", "tv_binned_proxy", "trim_frac"]
SURVIVAL_HEADER = ["t", "survival", "stderr", "bound"]
SAMPLES_HEADER = ["alpha", "rep", "W"]


def write_summary(path, result) -> None:
    write_rows(
        path,
        SUMMARY_HEADER,
        ([s.alpha, s.n_reps, s.mean, s.var, s.d_K, s.tv_binned_proxy, s.trim_frac] for s in result.per_alpha),
    )


def write_survival(path, curve) -> None:
    write_rows(path, SURVIVAL_HEADER, zip(curve.t, curve.survival, curve.stderr, curve.bound))


def write_samples(path, per_alpha) -> None:
    """``per_alpha`` is a sequence of ``(alpha, samples)`` pairs."""
    write_rows(path, SAMPLES_HEADER, ([a, i, w] for a, ws in per_alpha for i, w in enumerate(ws)))
