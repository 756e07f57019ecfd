"""Command-line front end.

Subcommands: ``simulate`` (one ensemble per alpha, raw samples), ``experiment``
(alpha sweep with summaries), ``bounds`` (evaluate one closed-form bound) and
``demo feller``.  Errors are reported as one JSON object on stderr with a
non-zero exit status.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import bounds, io
from .errors import ConfigurationError, StabLabError
from .maximal_layers import maximal_layers
from .mc_harness import (
    ExperimentSpec,
    feller_partial_sums,
    kolmogorov_distance,
    run_ensemble,
    run_experiment,
)
from .point_process import sample_poisson
from .proximity_graphs import knn_graph, voronoi_clipped
from .rng import MAX_SEED, split

SCORE_KEYS = {"k", "r", "theta", "base_r", "base_weight", "species_probs", "noise_sd", "convention"}
SPEC_KEYS = {"score", "alphas", "lam", "reps", "seed", "d", "trim_r", "tail_grid", "bins"}
RUN_KEYS = {"samples"}
ALLOWED = SCORE_KEYS | SPEC_KEYS | RUN_KEYS
DEFAULTS = {"lam": 1.0, "reps": 200, "d": 2, "seed": 0, "alphas": [64, 256, 1024]}

EXIT_USAGE, EXIT_FAILURE = 2, 1


def config_error(message: str, fields: list[str]) -> ConfigurationError:
    err = ConfigurationError(message)
    err.fields = sorted(fields)
    return err


@dataclass(frozen=True)
class RunConfig:
    spec: ExperimentSpec
    write_samples: bool = True


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


_CHECKS = {
    "score": (lambda v: isinstance(v, str), "a string"),
    "alphas": (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_number(a) and a > 0 for a in v), "a non-empty list of positive numbers"),
    "lam": (lambda v: _is_number(v) and v > 0, "a positive number"),
    "reps": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 2, "an integer >= 2"),
    "seed": (lambda v: isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= MAX_SEED, "an unsigned 64-bit integer"),
    "d": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1, "a positive integer"),
    "k": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1, "a positive integer"),
    "r": (lambda v: _is_number(v) and v > 0, "a positive number"),
    "theta": (lambda v: _is_number(v) and 0 < v < math.pi / 2, "an angle in (0, pi/2)"),
    "base_r": (lambda v: _is_number(v) and v > 0, "a positive number"),
    "base_weight": (lambda v: _is_number(v) and v >= 0, "a non-negative number"),
    "species_probs": (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_number(p) and p >= 0 for p in v) and abs(sum(v) - 1) < 1e-12, "a list of probabilities summing to 1"),
    "noise_sd": (lambda v: _is_number(v) and v > 0, "a positive number"),
    "convention": (lambda v: v in ("out", "half"), "'out' or 'half'"),
    "trim_r": (lambda v: _is_number(v) and v > 0, "a positive number"),
    "tail_grid": (lambda v: isinstance(v, list) and all(_is_number(t) and t >= 0 for t in v), "a list of non-negative numbers"),
    "bins": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1, "a positive integer"),
    "samples": (lambda v: isinstance(v, bool), "a boolean"),
}


def parse_config(text: str, seed: int | None = None) -> RunConfig:
    """Validate a JSON experiment config and apply defaults (``lam=1``, ``reps=200``, ``d=2``).

    Every offending key is reported at once.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise config_error(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", []) from None
    if not isinstance(raw, dict):
        raise config_error("config must be a JSON object", [])
    problems = {}
    for key in raw:
        if key not in ALLOWED:
            problems[key] = "unknown key"
    if "score" not in raw:
        problems["score"] = "required"
    for key, value in raw.items():
        if key in _CHECKS and not _CHECKS[key][0](value):
            problems[key] = f"must be {_CHECKS[key][1]}"
    if problems:
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(problems.items()))
        raise config_error(f"invalid config ({detail})", list(problems))
    cfg = {**DEFAULTS, **raw}
    if seed is not None:
        cfg["seed"] = seed
    params = {k: cfg[k] for k in SCORE_KEYS if k in cfg}
    try:
        spec = ExperimentSpec(
            score=cfg["score"],
            alphas=tuple(cfg["alphas"]),
            lam=float(cfg["lam"]),
            reps=cfg["reps"],
            seed=cfg["seed"],
            d=cfg["d"],
            params=params,
            trim_r=cfg.get("trim_r"),
            tail_grid=tuple(cfg["tail_grid"]) if "tail_grid" in cfg else None,
            bins=cfg.get("bins"),
        )
    except StabLabError as exc:
        fields = [k for k in ("score", "d", "alphas", "k", "r", "theta") if k in raw and k in str(exc)] or ["score"]
        raise config_error(str(exc), fields) from None
    return RunConfig(spec, cfg.get("samples", True))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _load(args) -> RunConfig:
    if not args.config:
        raise config_error("--config is required for this subcommand", ["config"])
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise config_error(f"cannot read config: {exc.strerror}", ["config"]) from None
    return parse_config(text, args.seed)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    run = _load(args)
    spec, out = run.spec, _outdir(args)
    per_alpha = [(a, [r.W for r in run_ensemble(spec, i, args.threads)]) for i, a in enumerate(spec.alphas)]
    io.write_samples(out / "samples.csv", per_alpha)
    # the first replicate of the first window, with its geometry
    config = sample_poisson(spec.window(spec.alphas[0]), spec.lam, spec.marks(), split(spec.seed, 0, 0))
    io.write_configuration(out / "configuration.csv", config)
    if len(config):
        if spec.score in ("knn", "knn-directed"):
            g = knn_graph(config, spec.params.get("k", 1), directed=spec.score == "knn-directed")
            io.write_graph(out / "graph.csv", g)
        elif spec.score == "voronoi":
            io.write_voronoi(out / "voronoi.csv", voronoi_clipped(config.positions, config.window))
        elif spec.score == "maxlayer":
            io.write_layers(out / "layers.csv", config.positions, maximal_layers(config.positions))
    return 0


def _jsonable(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def cmd_experiment(args) -> int:
    run = _load(args)
    spec, out = run.spec, _outdir(args)
    result = run_experiment(spec, args.threads, args.clamp)
    io.write_summary(out / "summary.csv", result)
    if run.write_samples:
        io.write_samples(out / "samples.csv", [(s.alpha, s.samples) for s in result.per_alpha])
    for s in result.per_alpha:
        if s.survival is not None:
            io.write_survival(out / f"survival_{io.fmt(s.alpha)}.csv", s.survival)
    summary = {
        "score": spec.score,
        "params": spec.params,
        "lam": spec.lam,
        "d": spec.d,
        "reps": spec.reps,
        "seed": spec.seed,
        "alphas": list(spec.alphas),
        "variance_slope": _jsonable(result.slope),
        "variance_slope_stderr": _jsonable(result.slope_stderr),
        "per_alpha": [
            {k: _jsonable(getattr(s, k)) for k in ("alpha", "n_reps", "mean", "var", "d_K", "tv_binned_proxy", "trim_frac")}
            for s in result.per_alpha
        ],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def _bound_rows(args) -> list[tuple[str, str, float]]:
    def need(*names):
        missing = [n for n in names if getattr(args, n) is None]
        if missing:
            raise config_error(f"bound {args.name!r} needs --{' --'.join(missing)}", missing)
        return [getattr(args, n) for n in names]

    def p(**kw):
        return ";".join(f"{k}={io.fmt(v) if not isinstance(v, str) else v}" for k, v in kw.items())

    c = args.clamp
    name = args.name
    if name == "normal_tv":
        mu1, mu2, s1, s2 = need("mu1", "mu2", "s1", "s2")
        ps = p(mu1=mu1, mu2=mu2, s1=s1, s2=s2)
        return [
            ("normal_tv_bound", ps, bounds.normal_tv_bound(mu1, s1, mu2, s2, clamp=c)),
            ("normal_tv_exact", ps, bounds.normal_tv_exact(mu1, s1, mu2, s2)),
        ]
    if name == "tv_shift_triangular":
        a, n, g = need("a", "n", "gamma")
        ps = p(a=a, n=n, gamma=g)
        return [
            ("tv_shift_bound_triangular", ps, bounds.tv_shift_bound_triangular(a, n, g, clamp=c)),
            ("tv_shift_exact_triangular", ps, bounds.tv_shift_exact_triangular(a, n, g)),
        ]
    if name == "triangular_cf":
        a, s = need("a", "s")
        return [(name, p(a=a, s=s), bounds.triangular_cf(a, s))]
    if name == "knn_tail":
        lam, k, t = need("lam", "k", "t")
        return [("knn_radius_tail_bound", p(lam=lam, k=k, t=t), bounds.knn_radius_tail_bound(lam, k, t, clamp=c))]
    if name == "voronoi_tail":
        lam, t = need("lam", "t")
        return [("voronoi_radius_tail_bound", p(lam=lam, t=t), bounds.voronoi_radius_tail_bound(lam, t, clamp=c))]
    if name == "trimming":
        alpha, lam, r = need("alpha", "lam", "r")
        k = args.k or 1
        if args.tail == "voronoi":
            tail = lambda x: bounds.voronoi_radius_tail_bound(lam, x, clamp=True)  # noqa: E731
        else:
            tail = lambda x: bounds.knn_radius_tail_bound(lam, k, x, clamp=True)  # noqa: E731
        return [("trimming_bound", p(alpha=alpha, lam=lam, r=r, tail=args.tail), bounds.trimming_bound(alpha, lam, tail, r, clamp=c))]
    if name in ("theorem_rate", "variance_exponent"):
        params = bounds.RateParams(d=args.d, regime=args.regime, beta=args.beta, k=args.k or 3)
        ps = p(d=args.d, regime=args.regime, beta=args.beta if args.beta is not None else "none", k=params.k)
        if name == "variance_exponent":
            return [(name, ps, bounds.variance_exponent(params))]
        (alpha,) = need("alpha")
        return [(name, ps + ";" + p(alpha=alpha), bounds.theorem_rate(alpha, params))]
    raise config_error(f"unknown bound {name!r}", ["name"])  # pragma: no cover


def cmd_bounds(args) -> int:
    rows = _bound_rows(args)
    header = ["name", "params", "value"]
    if args.out_given:
        io.write_rows(_outdir(args) / "bounds.csv", header, rows)
    print(",".join(header))
    for name, ps, value in rows:
        print(f"{name},{ps},{io.fmt(value)}")
    return 0


def cmd_feller(args) -> int:
    out = _outdir(args)
    seed = args.seed if args.seed is not None else 0
    rows = []
    for n in args.n:
        S = feller_partial_sums(n, args.depth, args.R, seed)
        var = float(S.var(ddof=1))
        # standard error of the sample variance from the fourth central moment
        m4 = float(((S - S.mean()) ** 4).mean())
        se = math.sqrt(max(m4 - var**2, 0.0) / len(S))
        dk = kolmogorov_distance(S, S.mean(), math.sqrt(var)) if var > 0 else 1.0
        rows.append([n, args.R, var, se, dk])
    io.write_rows(out / "feller.csv", ["n", "n_reps", "var", "var_stderr", "d_K"], rows)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _threads(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    # the subcommand copies use SUPPRESS so they never overwrite a flag given before the subcommand
    def default(v):
        return argparse.SUPPRESS if suppress else v

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=default(None), help="JSON experiment config")
    g.add_argument("--out", metavar="DIR", default=default(None), help="output directory (default: current directory)")
    g.add_argument("--seed", type=_seed, metavar="U64", default=default(None), help="master seed; overrides the config")
    g.add_argument("--threads", type=_threads, default=default(1), metavar="N", help="worker processes for replicates (default 1)")
    g.add_argument("--clamp", action="store_true", default=default(False), help="clamp reported bounds to [0, 1]")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(prog="stablab", description=__doc__.splitlines()[0], parents=[_global_options(False)])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("simulate", parents=[common], help="replicate ensembles; writes samples.csv and one realisation")
    sub.add_parser("experiment", parents=[common], help="alpha sweep; writes summary.csv, samples.csv and summary.json")

    b = sub.add_parser("bounds", parents=[common], help="evaluate a closed-form bound; prints name,params,value")
    b.add_argument(
        "--name",
        required=True,
        help="which bound to evaluate",
        choices=["normal_tv", "tv_shift_triangular", "triangular_cf", "knn_tail", "voronoi_tail", "trimming", "theorem_rate", "variance_exponent"],
    )
    for flag, typ, text in [
        ("--mu1", float, "mean of the first normal"),
        ("--mu2", float, "mean of the second normal"),
        ("--s1", float, "sd of the first normal"),
        ("--s2", float, "sd of the second normal"),
        ("--a", float, "triangular half-width"),
        ("--n", int, "number of triangular summands"),
        ("--gamma", float, "shift"),
        ("--s", float, "argument of the characteristic function"),
        ("--lam", float, "intensity"),
        ("--k", int, "k-NN order or moment order"),
        ("--t", float, "radius"),
        ("--alpha", float, "window volume"),
        ("--r", float, "trimming radius"),
        ("--beta", float, "polynomial stabilisation order"),
    ]:
        b.add_argument(flag, type=typ, help=text)
    b.add_argument("--tail", choices=["knn", "voronoi"], default="knn", help="tail bound used by 'trimming'")
    b.add_argument("--d", type=int, default=2, help="dimension for rate formulas")
    b.add_argument("--regime", choices=list(bounds.REGIMES), default="exponential", help="stabilisation regime")

    demo = sub.add_parser("demo", help="built-in demonstrations")
    demo_sub = demo.add_subparsers(dest="demo", required=True, metavar="DEMO")
    f = demo_sub.add_parser("feller", parents=[common], help="partial sums of a 1-dependent uniform sequence; writes feller.csv")
    f.add_argument("--n", type=int, nargs="+", default=[10, 100, 1000, 10000], help="partial-sum lengths")
    f.add_argument("--R", type=int, default=5000, help="replicates")
    f.add_argument("--depth", type=int, default=53, help="binary digits per block")
    return parser


def _parse(argv: list[str], parser: argparse.ArgumentParser) -> argparse.Namespace:
    args = parser.parse_args(argv)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = "."
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"simulate": cmd_simulate, "experiment": cmd_experiment, "bounds": cmd_bounds}
    try:
        if args.command == "demo":
            return cmd_feller(args)
        return handlers[args.command](args)
    except ConfigurationError as exc:
        payload = {"error": "ConfigurationError", "message": str(exc), "fields": getattr(exc, "fields", [])}
        print(json.dumps(payload), file=sys.stderr)
        return EXIT_USAGE
    except StabLabError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
