"""Monte Carlo ensembles of score sums and the estimators applied to them.

Replicate ``rep`` at window index ``i`` is a pure function of
``split(seed, i, rep)``, and results are folded in replicate order, so an
experiment gives bit-identical output for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats
from scipy.special import ndtr

from . import bounds
from .errors import ConfigurationError, DomainError, ParameterError, SampleSizeError
from .point_process import NO_MARKS, MarkSampler, Window, sample_poisson
from .rng import check_seed, split, stream
from .scores import SCORE_IDS, ScoreFunction, make_score

MIN_BINS, MAX_BINS = 20, 512


@dataclass(frozen=True)
class ExperimentSpec:
    """An alpha sweep of one score.

    ``params`` holds score-specific settings: ``k`` (k-NN order or layer
    index), ``r`` and ``theta`` (slab height and angle for ``maxlayer``),
    ``base_r``, ``base_weight``, ``species_probs`` and ``noise_sd`` (timber).
    ``trim_r`` turns on the trimmed sum; ``tail_grid`` turns on pooled
    stabilisation-radius survival counts.
    """

    score: str
    alphas: tuple[float, ...]
    lam: float = 1.0
    reps: int = 200
    seed: int = 0
    d: int = 2
    params: dict = field(default_factory=dict)
    trim_r: float | None = None
    tail_grid: tuple[float, ...] | None = None
    bins: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in np.atleast_1d(self.alphas)))
        if self.score not in SCORE_IDS + ("count",):
            raise ConfigurationError(f"unknown score {self.score!r}; expected one of {SCORE_IDS}")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ConfigurationError("alphas must be a non-empty list of positive volumes")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ConfigurationError("alphas must be strictly increasing")
        if self.reps < 2:
            raise ConfigurationError(f"need at least 2 replicates, got {self.reps}")
        if not self.lam > 0:
            raise ConfigurationError(f"intensity must be positive, got {self.lam}")
        check_seed(self.seed)
        if self.score in ("knn", "knn-directed", "voronoi") and self.d != 2:
            # the cone radii (and the clipped Voronoi cells) are planar constructions
            raise ConfigurationError(f"score {self.score!r} is implemented for d = 2 only, got d = {self.d}")
        if self.score == "maxlayer" and self.d != 2:
            raise ConfigurationError("the maximal-layer score is implemented on planar slabs (d = 2)")
        if self.trim_r is not None and not self.trim_r > 0:
            raise ConfigurationError(f"trim_r must be positive, got {self.trim_r}")
        if self.tail_grid is not None:
            object.__setattr__(self, "tail_grid", tuple(float(t) for t in self.tail_grid))
        self.make_score()  # surface bad score parameters now

    def make_score(self) -> ScoreFunction:
        return make_score(self.score, **self.params)

    def window(self, alpha: float) -> Window:
        if self.score == "maxlayer":
            return Window.slab(alpha, self.params.get("r", 1.0), self.params.get("theta", math.pi / 4))
        return Window.cube(alpha, self.d)

    def marks(self) -> MarkSampler:
        if self.score == "timber":
            probs = tuple(self.params.get("species_probs", (0.5, 0.5)))
            return MarkSampler("pair", probs, ("normal", (0.0, self.params.get("noise_sd", 0.25))))
        return NO_MARKS


@dataclass(frozen=True)
class Replicate:
    W: float
    W_trim: float
    n_points: int
    exceed: np.ndarray | None  # per tail-grid t: number of radii > t


def run_replicate(spec: ExperimentSpec, alpha_idx: int, rep: int) -> Replicate:
    alpha = spec.alphas[alpha_idx]
    config = sample_poisson(spec.window(alpha), spec.lam, spec.marks(), split(spec.seed, alpha_idx, rep))
    score = spec.make_score()
    values = score.evaluate_all(config) if len(config) else np.zeros(0)
    W = float(values.sum())
    W_trim, exceed = math.nan, None
    if spec.trim_r is not None or spec.tail_grid is not None:
        radius = score.radii_all(config)[0] if len(config) else np.zeros(0)
        if spec.trim_r is not None:
            W_trim = float(values[radius <= spec.trim_r].sum())
        if spec.tail_grid is not None:
            exceed = (radius[None, :] > np.asarray(spec.tail_grid)[:, None]).sum(axis=1)
    return Replicate(W, W_trim, len(config), exceed)


def _replicate_batch(spec: ExperimentSpec, alpha_idx: int, reps: range) -> list[Replicate]:
    return [run_replicate(spec, alpha_idx, r) for r in reps]


def run_ensemble(spec: ExperimentSpec, alpha_idx: int, threads: int = 1, reps: int | None = None) -> list[Replicate]:
    """All replicates at one window, in replicate order."""
    n = spec.reps if reps is None else reps
    if threads <= 1:
        return _replicate_batch(spec, alpha_idx, range(n))
    chunk = max(1, math.ceil(n / (4 * threads)))
    batches = [range(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(partial(_replicate_batch, spec, alpha_idx), batches)
        return [r for part in parts for r in part]


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")


def kolmogorov_distance(samples, mu: float = 0.0, sigma: float = 1.0) -> float:
    """``sup_x |F_n(x) - Phi((x - mu)/sigma)|``, checked on both sides of every jump."""
    _check_sigma(sigma)
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise SampleSizeError("need at least one sample")
    F = ndtr((x - mu) / sigma)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def fd_bin_width(z: np.ndarray) -> float:
    """Freedman-Diaconis width; for a sample with zero IQR the width the rule gives a standard normal."""
    q75, q25 = np.percentile(z, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        iqr = stats.norm.ppf(0.75) - stats.norm.ppf(0.25)
    return 2.0 * iqr * len(z) ** (-1.0 / 3.0)


def binned_tv_estimate(samples, mu: float = 0.0, sigma: float = 1.0, bins: int | None = None) -> float:
    """Histogram proxy for the TV distance to ``N(mu, sigma^2)``.

    The standardised sample and the standard normal are binned on a common
    grid (Freedman-Diaconis width, 20 to 512 bins, plus two unbounded tail
    bins) and half the total absolute mass difference is returned.  This is a
    smoothed surrogate: the TV distance between any empirical measure and a
    normal law is 1.
    """
    _check_sigma(sigma)
    z = (np.asarray(samples, dtype=float).ravel() - mu) / sigma
    n = len(z)
    if n < 30:
        raise SampleSizeError(f"binned TV proxy needs at least 30 samples, got {n}")
    lo, hi = float(z.min()), float(z.max())
    if bins is None:
        width = fd_bin_width(z)
        nb = int(math.ceil((hi - lo) / width)) if hi > lo else 1
        if nb < MIN_BINS:
            mid = (lo + hi) / 2
            nb = MIN_BINS
            lo, hi = mid - nb * width / 2, mid + nb * width / 2
        elif nb > MAX_BINS:
            nb = MAX_BINS
    else:
        if bins < 1:
            raise ParameterError(f"bins must be >= 1, got {bins}")
        nb = int(bins)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, nb + 1)
    emp = np.histogram(z, bins=edges)[0] / n
    cdf = ndtr(edges)
    ref = np.diff(cdf)
    tails = cdf[0] + (1.0 - cdf[-1])  # empirical mass there is 0
    return float(0.5 * (np.abs(emp - ref).sum() + tails))


@dataclass(frozen=True)
class SurvivalCurve:
    t: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    n_points: int


def analytic_tail_bound(spec: ExperimentSpec, t: float, clamp: bool = False) -> float:
    if spec.score in ("knn", "knn-directed"):
        return bounds.knn_radius_tail_bound(spec.lam, spec.params.get("k", 1), t, clamp=clamp)
    if spec.score == "voronoi":
        return bounds.voronoi_radius_tail_bound(spec.lam, t, clamp=clamp)
    # range-bound scores: the radius is a constant
    score = spec.make_score()
    rng = score.range_bound if score.range_bound is not None else math.inf
    if spec.score == "maxlayer":
        rng = spec.window(spec.alphas[0]).r * math.tan(spec.params.get("theta", math.pi / 4)) + 1.0
    return 0.0 if t >= rng else 1.0


def survival_from_counts(spec: ExperimentSpec, reps: list[Replicate], clamp: bool = False) -> SurvivalCurve:
    total = sum(r.n_points for r in reps)
    exceed = np.sum([r.exceed for r in reps], axis=0) if reps else np.zeros(len(spec.tail_grid))
    t = np.asarray(spec.tail_grid)
    p = exceed / total if total else np.full(len(t), math.nan)
    se = np.sqrt(p * (1 - p) / total) if total else p
    b = np.array([analytic_tail_bound(spec, float(ti), clamp) for ti in t])
    return SurvivalCurve(t, p, se, b, total)


def radius_tail_empirical(spec: ExperimentSpec, t_grid, alpha_idx: int = -1, threads: int = 1, clamp: bool = False) -> SurvivalCurve:
    """Pooled ``P(R > t)`` over every point of every replicate at one window, with binomial errors."""
    t_grid = tuple(float(t) for t in t_grid)
    if any(t < 0 for t in t_grid):
        raise ParameterError("tail grid must be non-negative")
    sub = ExperimentSpec(**{**spec.__dict__, "tail_grid": t_grid})
    idx = alpha_idx % len(spec.alphas)
    return survival_from_counts(sub, run_ensemble(sub, idx, threads), clamp)


def loglog_slope(alphas, variances) -> tuple[float, float]:
    """Least-squares slope of ``log Var`` against ``log alpha`` and its standard error."""
    a = np.asarray(alphas, dtype=float)
    v = np.asarray(variances, dtype=float)
    if a.shape != v.shape or len(a) < 3:
        raise ParameterError("need at least 3 matching (alpha, variance) pairs")
    if np.any(a <= 0) or np.any(v <= 0):
        raise DomainError("log-log fit needs positive alphas and variances")
    fit = stats.linregress(np.log(a), np.log(v))
    return float(fit.slope), float(fit.stderr)


def max_repeat_fraction(samples) -> float:
    """Largest share of the sample taken by a single repeated value."""
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) == 0:
        return 0.0
    return float(np.unique(x, return_counts=True)[1].max() / len(x))


def is_diffuse(samples, threshold: float = 0.01) -> bool:
    """No single value carries ``threshold`` or more of the sample."""
    return max_repeat_fraction(samples) < threshold


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaSummary:
    alpha: float
    n_reps: int
    mean: float
    var: float
    d_K: float
    tv_binned_proxy: float
    trim_frac: float
    samples: np.ndarray
    survival: SurvivalCurve | None = None

    @property
    def standardized(self) -> np.ndarray:
        sd = math.sqrt(self.var)
        return (self.samples - self.mean) / sd if sd > 0 else np.zeros_like(self.samples)


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    per_alpha: tuple[AlphaSummary, ...]
    slope: float
    slope_stderr: float


def summarize(spec: ExperimentSpec, alpha: float, reps: list[Replicate], clamp: bool = False) -> AlphaSummary:
    W = np.array([r.W for r in reps])
    mean, var = float(W.mean()), float(W.var(ddof=1))
    if var > 0:
        sd = math.sqrt(var)
        d_K = kolmogorov_distance(W, mean, sd)
        tv = binned_tv_estimate(W, mean, sd, spec.bins) if len(W) >= 30 else math.nan
    else:
        d_K = tv = 1.0  # a point mass against any normal law
    trim = math.nan
    if spec.trim_r is not None:
        trim = float(np.mean([r.W != r.W_trim for r in reps]))
    curve = survival_from_counts(spec, reps, clamp) if spec.tail_grid is not None else None
    return AlphaSummary(alpha, len(W), mean, var, d_K, tv, trim, W, curve)


def run_experiment(spec: ExperimentSpec, threads: int = 1, clamp: bool = False) -> ExperimentResult:
    summaries = tuple(summarize(spec, a, run_ensemble(spec, i, threads), clamp) for i, a in enumerate(spec.alphas))
    slope = stderr = math.nan
    if len(summaries) >= 3 and all(s.var > 0 for s in summaries):
        slope, stderr = loglog_slope([s.alpha for s in summaries], [s.var for s in summaries])
    return ExperimentResult(spec, summaries, slope, stderr)


# --------------------------------------------------------------------------
# a 1-dependent sequence with uniform marginals whose partial sums do not go normal
# --------------------------------------------------------------------------


def _digit_block(seed: int, which: int, i: int, R: int, depth: int) -> np.ndarray:
    """Centred ``sum_k 4^{-k} b_k`` for ``which=0`` (U) or ``2 sum_k 4^{-k} b_k`` (V), ``b_k`` fair bits."""
    bits = stream(seed, which, i).integers(0, 2, size=(R, depth), dtype=np.int8)
    w = 4.0 ** -np.arange(1, depth + 1)
    scale = 1.0 if which == 0 else 2.0
    return scale * (bits @ w - w.sum() / 2)


def feller_partial_sums(n: int, depth: int = 53, R: int = 1000, seed: int = 0, method: str = "telescoped") -> np.ndarray:
    """``R`` samples of ``S_n = xi_1 + ... + xi_n``.

    ``xi_{2j-1} = U_j + V_j`` and ``xi_{2j} = -V_j - U_{j+1}`` with independent
    centred blocks ``U_j``, ``V_j``; each ``xi`` is uniform on ``(-1/2, 1/2)``.
    The sum telescopes to ``U_1 + V_m`` (``n = 2m - 1``) or ``U_1 - U_{m+1}``
    (``n = 2m``); ``method="path"`` adds the terms one by one instead.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if depth < 30:
        raise ParameterError(f"depth must be >= 30, got {depth}")
    if R < 1:
        raise ParameterError(f"R must be >= 1, got {R}")
    seed = check_seed(seed)
    U = partial(_digit_block, seed, 0, R=R, depth=depth)
    V = partial(_digit_block, seed, 1, R=R, depth=depth)
    if method == "telescoped":
        m = (n + 1) // 2
        return U(1) + V(m) if n % 2 else U(1) - U(m + 1)
    if method != "path":
        raise ParameterError(f"unknown method {method!r}")
    S = np.zeros(R)
    for i in range(1, n + 1):
        j = (i + 1) // 2
        S += U(j) + V(j) if i % 2 else -V(j) - U(j + 1)
    return S


def feller_xi(i: int, depth: int = 53, R: int = 1000, seed: int = 0) -> np.ndarray:
    """``R`` samples of the single term ``xi_i``."""
    if i < 1:
        raise ParameterError(f"index must be >= 1, got {i}")
    j = (i + 1) // 2
    U = partial(_digit_block, seed, 0, R=R, depth=depth)
    V = partial(_digit_block, seed, 1, R=R, depth=depth)
    return U(j) + V(j) if i % 2 else -V(j) - U(j + 1)
