"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (visible with
``pytest -v``, since the line bypasses output capture) and then asserts.  All
randomness flows from ``SEED``, fixed before any run.
"""

import json
import math
import time

import numpy as np
import pytest

from oracles import brute_layers, voronoi_interior_length
from stablab.bounds import normal_tv_bound, normal_tv_exact, tv_shift_bound_triangular, tv_shift_exact_triangular
from stablab.cli import main
from stablab.maximal_layers import layer_distance_sum, layer_distance_sum_marks, maximal_layers
from stablab.mc_harness import ExperimentSpec, feller_partial_sums, kolmogorov_distance, radius_tail_empirical, run_experiment
from stablab.point_process import MarkedPoint, MarkSampler, Window, insert_point, sample_poisson, sample_slab
from stablab.proximity_graphs import voronoi_clipped
from stablab.rng import split
from stablab.scores import KnnScore, MaxLayerScore, TimberScore, VoronoiScore
from scipy.special import ndtr

SEED = 12345
ALPHAS = (64.0, 256.0, 1024.0, 4096.0)


@pytest.fixture
def report(capsys):
    t0 = time.perf_counter()

    def emit(n, ok, detail, budget=None):
        elapsed = time.perf_counter() - t0
        within = budget is None or elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        limit = f" (budget {budget:g}s)" if budget is not None else ""
        with capsys.disabled():
            print(f"\ncriterion {n}: {status}  {detail}  [{elapsed:.1f}s{limit}]")
        assert ok, detail
        assert within, f"runtime {elapsed:.1f}s over budget {budget:g}s"

    return emit


def test_criterion_01_variance_growth(report):
    res = run_experiment(ExperimentSpec("knn", ALPHAS, reps=200, seed=SEED, params={"k": 1}))
    ok = 0.85 <= res.slope <= 1.15
    report(1, ok, f"knn k=1 log-log variance slope {res.slope:.4f} +/- {res.slope_stderr:.4f}, target [0.85, 1.15]", 300)


@pytest.mark.slow
def test_criterion_02_normal_approximation_trend(report):
    res = run_experiment(ExperimentSpec("knn", (ALPHAS[0], ALPHAS[-1]), reps=2000, seed=SEED, params={"k": 1}))
    lo, hi = res.per_alpha
    dk_ok = hi.d_K < lo.d_K
    tv_ok = hi.tv_binned_proxy < lo.tv_binned_proxy
    detail = (
        f"d_K {lo.d_K:.5f} -> {hi.d_K:.5f} ({'decreases' if dk_ok else 'does not decrease'}); "
        f"tv_binned_proxy {lo.tv_binned_proxy:.5f} -> {hi.tv_binned_proxy:.5f} ({'decreases' if tv_ok else 'does not decrease'}); "
        "alpha 64 -> 4096, R=2000"
    )
    report(2, dk_ok and tv_ok, detail, 900)


@pytest.mark.slow
def test_criterion_03_radius_tail_domination(report):
    grid = np.arange(1, 31, dtype=float)
    worst = {}
    ok = True
    for score in ("knn", "voronoi"):
        spec = ExperimentSpec(score, (1024.0,), reps=100, seed=SEED, params={"k": 1} if score == "knn" else {})
        curve = radius_tail_empirical(spec, grid, clamp=True)
        slack = curve.bound + 3 * curve.stderr - curve.survival
        ok &= bool(np.all(slack >= 0))
        worst[score] = float(slack.min())
    detail = ", ".join(f"{s} min slack {v:.3g}" for s, v in worst.items()) + " over t=1..30 (alpha=1024, R=100)"
    report(3, ok, detail, 300)


def test_criterion_04_triangular_shift_oracle(report):
    worst = -math.inf
    for a in (0.5, 1.0, 2.0):
        for n in range(1, 6):
            for g in np.arange(1, 11) / 10:
                worst = max(worst, tv_shift_exact_triangular(a, n, g) - tv_shift_bound_triangular(a, n, g))
    point = tv_shift_exact_triangular(1.0, 1, 0.5)
    ok = worst <= 0 and abs(point - 0.4375) <= 1e-12
    report(4, ok, f"max(exact - bound) {worst:.3g} on 150-point grid; exact(1,1,0.5) = {point!r}", 1)


def test_criterion_05_normal_tv_formulas(report):
    mus = np.linspace(-3, 3, 10)
    sds = np.linspace(0.25, 4, 10)
    worst = -math.inf
    for m1 in mus:
        for m2 in mus:
            for s1 in sds:
                for s2 in sds:
                    worst = max(worst, normal_tv_exact(m1, s1, m2, s2) - normal_tv_bound(m1, s1, m2, s2))
    eq = max(abs(normal_tv_exact(0, s, mu, s) - (ndtr(abs(mu) / s / 2) - ndtr(-abs(mu) / s / 2))) for mu in mus for s in sds)
    ok = worst <= 0 and eq <= 1e-10
    report(5, ok, f"max(exact - bound) {worst:.3g} on 10^4 grid; equal-variance error {eq:.2g}", 5)


def test_criterion_06_maximal_layers(report):
    rng = np.random.default_rng(split(SEED, 6, 0))
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 201))
        d = int(rng.integers(2, 4))
        pts = rng.random((n, d))
        mismatches += not np.array_equal(maximal_layers(pts).layer, brute_layers(pts))
    dual = 0.0
    for i in range(100):
        theta = float(rng.uniform(0.2, 1.3))
        c = sample_slab(float(rng.uniform(20, 200)), float(rng.uniform(0.5, 2.0)), theta, 1.0, seed=split(SEED, 6, 1, i))
        k = int(rng.integers(1, 5))
        dual = max(dual, abs(layer_distance_sum(c, k) - layer_distance_sum_marks(c, k)))
    ok = mismatches == 0 and dual <= 1e-9
    report(6, ok, f"{mismatches} layer mismatches in 500 instances; max dual-sum gap {dual:.2g} over 100", 60)


PAIR = MarkSampler("pair", (0.5, 0.5), ("normal", (0.0, 0.25)))
CERT_CASES = {
    "knn": (KnnScore(1), lambda s: sample_poisson(Window.cube(256), 1.0, seed=s), 1e-12),
    "voronoi": (VoronoiScore(), lambda s: sample_poisson(Window.cube(256), 1.0, seed=s), 1e-12),
    "timber": (TimberScore(), lambda s: sample_poisson(Window.cube(256), 1.0, PAIR, seed=s), 0.0),
    "maxlayer": (MaxLayerScore(2), lambda s: sample_slab(120, 1.0, 0.7, 2.0, seed=s), 0.0),
}


def _random_location(w, rng):
    if w.kind == "cube":
        return (rng.random(w.d) - 0.5) * w.side
    base = rng.random() * w.side
    return np.array([base, rng.random() * w.r - base / math.tan(w.theta[0])])


def test_criterion_07_stabilization_certification(report):
    rng = np.random.default_rng(split(SEED, 7, 0))
    worst = {}
    ok = True
    for name, (score, factory, tol) in CERT_CASES.items():
        trials = gap = 0
        seed = 0
        while trials < 100:
            seed += 1
            c = factory(split(SEED, 7, 1, seed))
            before = score.evaluate_all(c)
            radius, _ = score.radii_all(c)
            i = int(rng.integers(len(c)))
            x = c.positions[i]
            c2 = c
            added = 0
            for _ in range(2000):
                p = _random_location(c.window, rng)
                if score.separation(x, p) > radius[i] and c2.index_of(p) is None:
                    mark = MarkedPoint(tuple(p), int(rng.integers(2)) if c.species is not None else None,
                                       float(rng.normal(0, 0.25)) if c.noise is not None else None)
                    c2 = insert_point(c2, mark)
                    added += 1
                    if added == 3:
                        break
            if added == 0:
                continue  # the certified ball covers the window
            trials += 1
            after = score.evaluate_all(c2)[c2.index_of(x)]
            gap = max(gap, abs(after - before[i]))
        worst[name] = gap
        ok &= gap <= tol
    detail = "; ".join(f"{k} max change {v:.2g}" for k, v in worst.items()) + " (100 insertion trials each)"
    report(7, ok, detail, 120)


@pytest.mark.slow
def test_criterion_08_geometry_conservation(report):
    rng = np.random.default_rng(split(SEED, 8, 0))
    area_err = length_err = 0.0
    for i in range(200):
        alpha = float(rng.uniform(16, 1024))
        c = sample_poisson(Window.cube(alpha), 1.0, seed=split(SEED, 8, 1, i))
        if len(c) < 2:
            continue
        vd = voronoi_clipped(c.positions, c.window)
        area_err = max(area_err, abs(sum(cell.area for cell in vd.cells) - alpha) / alpha)
        total = float(VoronoiScore().evaluate_all(c).sum())
        length_err = max(length_err, abs(total - voronoi_interior_length(c.positions, c.window.side)))
    ok = area_err <= 1e-6 and length_err <= 1e-9
    report(8, ok, f"max relative area error {area_err:.2g}; max score-sum vs interior-length gap {length_err:.2g}", 60)


def test_criterion_09_feller_counterexample(report):
    R = 5000
    worst = -math.inf
    for n in (10, 100, 1000, 10_000):
        S = feller_partial_sums(n, R=R, seed=SEED)
        var = S.var(ddof=1)
        se = math.sqrt(max(((S - S.mean()) ** 4).mean() - var**2, 0.0) / R)
        worst = max(worst, var - (1 / 12 + 3 * se))
    dk = kolmogorov_distance(S, S.mean(), S.std(ddof=1))
    ok = worst <= 0 and dk > 0.01
    report(9, ok, f"max(var - 1/12 - 3 se) {worst:.3g}; d_K at n=10^4 {dk:.4f} (> 0.01 required)", 60)


def test_criterion_10_determinism(report, tmp_path):
    configs = {
        "knn": {"score": "knn", "k": 1, "alphas": [64, 256], "reps": 24, "tail_grid": [0, 2, 4, 8], "trim_r": 6},
        "voronoi": {"score": "voronoi", "alphas": [64, 128, 256], "reps": 17},
        "timber": {"score": "timber", "alphas": [64, 128], "reps": 16, "tail_grid": [0, 1, 2]},
        "maxlayer": {"score": "maxlayer", "k": 2, "alphas": [64, 128, 256], "reps": 12},
    }
    differing = []
    for name, cfg in configs.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        dirs = []
        for threads in (1, 4, 8):
            out = tmp_path / f"{name}-{threads}"
            assert main(["experiment", "--config", str(path), "--out", str(out), "--seed", str(SEED), "--threads", str(threads)]) == 0
            dirs.append(out)
        for f in sorted(p.name for p in dirs[0].iterdir()):
            if len({(d / f).read_bytes() for d in dirs}) != 1:
                differing.append(f"{name}/{f}")
    report(10, not differing, f"files differing across 1/4/8 workers: {differing or 'none'}")
