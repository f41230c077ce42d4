"""Command-line interface: ``lrdcp <command> [options]``.

Every command echoes its fully resolved configuration (including the seed) in
its output.  Files are written atomically.  Exit status is 0 on success, 2 on
usage errors and 1 on numeric or domain errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time

import numpy as np

from ._validation import DegenerateInputError, DomainError
from .calibrate import (
    CriticalValueTable,
    NullCalibrator,
    UnsupportedOrderError,
    asymptotic_critical_value,
    atomic_write_text,
    limit_functional,
)
from .changepoint import run_test
from .estimators import estimate_scale, local_whittle, split_whittle
from .experiments import (
    ChangeSpec,
    Scenario,
    are_mean_shift_check,
    are_mean_variance,
    inject_change,
    run_power_study,
)
from .sim import EmbeddingError, GaussianModel, SeedSpec, simulate
from .stats import StatisticKind
from .subordinate import (
    RankError,
    Subordinator,
    hermite_coeff,
    hermite_rank,
    normalization_dn,
)

FAST_REPS = 300
FAST_J = 300
MODELS = ("fgn", "farima", "farima10", "ar1")
SCENARIOS = ("null", "mean_shift", "mean_variance", "chi_square", "chi_square_null", "split_square", "rank_drop")
POWER_KEYS = ("scenario", "stat", "n", "H", "tau", "mu", "sigma", "sigma2", "reps", "J", "hurst_mode", "model", "a1", "alpha")

_NUMERIC_ERRORS = (
    DomainError,
    DegenerateInputError,
    EmbeddingError,
    RankError,
    UnsupportedOrderError,
    ArithmeticError,
    ValueError,
    KeyError,
    OSError,
)


class UsageError(Exception):
    """Invalid combination of flags or configuration keys."""


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def _list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list of {kind.__name__}: {text!r}") from exc

    return parse


def parse_transform(spec: str) -> Subordinator:
    """``name[:p1,p2,...]`` with names identity, square, abs, cube, exp, affine,
    affine_square and split_square."""
    name, _, params = spec.partition(":")
    p = [float(v) for v in params.split(",") if v.strip()]
    if name == "identity":
        return Subordinator.identity()
    if name == "square":
        return Subordinator.square()
    if name == "abs":
        return Subordinator.from_callable(np.abs)
    if name == "cube":
        return Subordinator.from_callable(lambda s: np.asarray(s) ** 3)
    if name == "exp":
        return Subordinator.from_callable(np.exp)
    if name == "affine":
        return Subordinator.affine(*(p or [1.0, 0.0]))
    if name == "affine_square":
        return Subordinator.affine_square(*(p or [1.0, 0.0, 0.0]))
    if name == "split_square":
        return Subordinator.split_square(*(p or [1.5, 1.0]))
    raise UsageError(f"unknown transform {name!r}")


def read_series(path: str) -> np.ndarray:
    """One finite value per line; blank lines are skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                raise DomainError(f"{path}:{lineno}: malformed value {text[:40]!r}; expected one number per line") from None
            if not math.isfinite(value):
                raise DomainError(f"{path}:{lineno}: non-finite value {text!r}")
            values.append(value)
    return np.asarray(values, dtype=np.float64)


def format_series(values) -> str:
    return "".join(f"{v:.17g}\n" for v in values)


def resolve_seed(seed: int) -> int:
    if seed < 0 or seed >= 2**64:
        raise UsageError(f"--seed must be a 64-bit unsigned integer, got {seed}")
    if seed == 0:
        return int(np.random.SeedSequence().entropy % (2**63 - 1)) + 1
    return seed


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, StatisticKind):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(args, doc: dict, out=None) -> None:
    """Write ``doc`` plus the config echo to ``out`` (atomically) or stdout."""
    text = _dumps({**doc, "config": args.echo})
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _write_data(args, text: str, summary: dict) -> None:
    """Data file to ``--out`` (with a ``.meta.json`` sidecar) or to stdout."""
    if args.out:
        atomic_write_text(args.out, text)
        atomic_write_text(args.out + ".meta.json", _dumps({**summary, "config": args.echo}))
        sys.stdout.write(_dumps({**summary, "out": args.out, "config": args.echo}))
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    scenario = Scenario.preset(args.change, mu=args.mu, tau=args.tau, sigma2=args.sigma2, model=args.model, a1=args.a1)
    model = scenario.latent(args.hurst)
    seed = SeedSpec(args.seed)
    if scenario.change.is_null and args.transform == "identity":
        y = simulate(model, args.n, seed)
    else:
        change = scenario.change
        if scenario.change.is_null:
            G = parse_transform(args.transform)
            change = ChangeSpec(G, G, 1.0, args.transform)
        y = inject_change(model, change, args.n, seed)
    _write_data(args, format_series(y), {"n": args.n, "model": model.describe(), "change": scenario.change.describe()})
    return 0


def cmd_hermite(args) -> int:
    G = parse_transform(args.transform)
    doc = {}
    if args.rank:
        info = hermite_rank(G, args.qmax)
        doc["rank"] = {"rank": info.rank, "qmax_scanned": info.qmax_scanned, "grid_sup": info.grid_sup.tolist()}
    if args.x is not None:
        rows = []
        for x in args.x:
            value, method = hermite_coeff(G, args.q, x, return_method=True)
            rows.append({"q": args.q, "x": x, "value": value, "method": method})
        if len(rows) == 1 and not doc and args.n is None:
            doc.update(rows[0])
        else:
            doc["coefficients"] = rows
    if args.n is not None:
        m = args.m if args.m is not None else hermite_rank(G, args.qmax).rank
        doc["normalization"] = normalization_dn(args.n, m, _latent(args), mode=args.norm_mode).to_dict()
    if not doc:
        raise UsageError("nothing to compute: give --x, --rank or --n")
    _emit(args, doc)
    return 0


def _latent(args) -> GaussianModel:
    return Scenario("latent", None, args.model, args.a1).latent(args.hurst)


def cmd_test(args) -> int:
    y = read_series(args.input)
    kind = StatisticKind.parse(args.stat)
    if args.hurst is not None and args.estimate_hurst is not None:
        raise UsageError("--hurst and --estimate-hurst are mutually exclusive")
    hurst = args.hurst if args.hurst is not None else (args.estimate_hurst or "whittle")
    table = CriticalValueTable.load(args.table) if args.table else None
    calibrator = None
    if args.calib == "asymptotic":
        if table is not None:
            raise UsageError("--table cannot be combined with --calib asymptotic")
        if isinstance(hurst, str):
            est = local_whittle(y) if hurst == "whittle" else split_whittle(y, kind)
            H = est.value
            hurst = est
        else:
            H = hurst
        G = parse_transform(args.transform)
        cv = asymptotic_critical_value(kind, len(y), GaussianModel.fgn(H), args.alpha, G, args.reps, seed=args.seed)
        table = CriticalValueTable(master_seed=args.seed, created=None)
        table.add(kind, len(y), H, args.alpha, args.reps, cv)
    else:
        calibrator = NullCalibrator(args.J, args.seed)
    report = run_test(y, kind, args.alpha, hurst, calibrator, table, args.scale)
    _emit(args, report.to_dict())
    return 0


def cmd_estimate(args) -> int:
    y = read_series(args.input)
    if args.method == "whittle":
        est = local_whittle(y, args.bandwidth)
    else:
        if args.bandwidth is not None:
            raise UsageError("--bandwidth applies to --method whittle only")
        est = split_whittle(y, args.stat)
    scale = estimate_scale(y, est, K=args.K, standardize=not args.raw_scale)
    _emit(args, {"hurst_estimate": est.to_dict(), "scale_estimate": scale.to_dict()})
    return 0


def cmd_calibrate(args) -> int:
    if args.reps < 100:
        raise UsageError(f"--reps must be >= 100, got {args.reps}")
    cal = NullCalibrator(args.reps, args.seed)
    kinds = [StatisticKind.parse(k) for k in args.stat]
    table = cal.table(kinds, args.n, args.hurst, args.alpha)
    table.created = time.time() if args.timestamp else None
    _emit(args, table.to_dict(), args.out)
    if args.out:
        sys.stdout.write(_dumps({"out": args.out, "entries": len(table.entries), "config": args.echo}))
    return 0


def read_power_config(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_string("[study]\n" + fh.read(), source=path)
    raw = dict(parser["study"])
    unknown = sorted(set(raw) - set(POWER_KEYS))
    if unknown:
        raise UsageError(f"unknown config keys {unknown}; valid keys: {', '.join(POWER_KEYS)}")

    def lst(key, kind, default):
        return [kind(v.strip()) for v in raw[key].split(",") if v.strip()] if key in raw else default

    cfg = {
        "scenario": lst("scenario", str, ["mean_shift"]),
        "stat": lst("stat", str, ["cvm", "wilcoxon", "cusum"]),
        "n": lst("n", int, [100]),
        "H": lst("H", float, [0.6]),
        "hurst_mode": lst("hurst_mode", str, ["known"]),
        "tau": float(raw.get("tau", 0.5)),
        "mu": float(raw.get("mu", 1.0)),
        "model": raw.get("model", "fgn"),
        "a1": float(raw.get("a1", 0.0)),
        "alpha": float(raw.get("alpha", 0.05)),
        "reps": int(raw.get("reps", 1000)),
        "J": int(raw.get("J", 1000)),
    }
    if "sigma" in raw and "sigma2" in raw:
        raise UsageError("give either sigma or sigma2, not both")
    cfg["sigma2"] = float(raw["sigma"]) ** 2 if "sigma" in raw else float(raw.get("sigma2", 1.25))
    for name in cfg["scenario"]:
        if name not in SCENARIOS:
            raise UsageError(f"unknown scenario {name!r}; valid: {', '.join(SCENARIOS)}")
    if cfg["model"] not in MODELS:
        raise UsageError(f"unknown model {cfg['model']!r}; valid: {', '.join(MODELS)}")
    return cfg


def cmd_power(args) -> int:
    cfg = read_power_config(args.config)
    if args.fast:
        cfg["reps"], cfg["J"] = FAST_REPS, FAST_J
    args.echo["study"] = cfg
    scenarios = [
        Scenario.preset(s, mu=cfg["mu"], tau=cfg["tau"], sigma2=cfg["sigma2"], model=cfg["model"], a1=cfg["a1"])
        for s in cfg["scenario"]
    ]
    table = run_power_study(
        scenarios,
        statistics=cfg["stat"],
        hurst_modes=cfg["hurst_mode"],
        ns=cfg["n"],
        Hs=cfg["H"],
        reps=cfg["reps"],
        J=cfg["J"],
        master_seed=args.seed,
        alpha=cfg["alpha"],
        n_jobs=args.threads,
    )
    failures = sum(row["failures"] for row in table.rows)
    _write_data(args, table.to_csv(), {"rows": len(table.rows), "estimation_failures": failures})
    return 0


def cmd_are(args) -> int:
    if args.mode == "mean_variance":
        q = args.q
        if q is None:
            q = limit_functional(1, args.H, reps=args.reps, seed=args.seed).quantile(1 - args.alpha)
        value = are_mean_variance(args.C1, args.C2, q, args.tau, args.kappa1, args.kappa2, args.H)
        doc = {"mode": args.mode, "q": q, "are": value}
    else:
        res = are_mean_shift_check(
            args.H, args.tau, args.C, args.alpha, args.reps, args.seed, n=args.n, finite_reps=args.finite_reps, J=args.J
        )
        doc = {"mode": args.mode, **res.to_dict()}
    _emit(args, doc)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite

    kwargs = {"seed": args.seed}
    if args.reps is not None:
        kwargs["reps"] = args.reps
    if args.n is not None:
        kwargs["ns"] = tuple(args.n)
    checks = run_suite(args.suite, **kwargs)
    ok = all(c.passed for c in checks)
    if args.format == "text":
        for c in checks:
            sys.stdout.write(f"{'PASS' if c.passed else 'FAIL'} {c.suite}: {c.name}; measured={c.measured} target {c.target}\n")
        sys.stdout.write(f"config: {json.dumps(args.echo, default=_json_default)}\n")
    else:
        _emit(args, {"passed": ok, "checks": [c.to_dict() for c in checks]})
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="master seed; 0 draws one from OS entropy (echoed in the output)")
    g.add_argument("--threads", type=int, default=1, help="maximum worker processes (power studies)")
    g.add_argument("--fast", action="store_true", help=f"reduced profile: reps = {FAST_REPS}, J = {FAST_J}")
    return p


def _model_args(p) -> None:
    p.add_argument("--model", choices=MODELS, default="fgn")
    p.add_argument("--hurst", type=float, default=0.7, help="Hurst coefficient (FARIMA: d = H - 1/2)")
    p.add_argument("--a1", type=float, default=0.0, help="autoregressive coefficient for farima10 and ar1")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = _common()
    parser = argparse.ArgumentParser(prog="lrdcp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    subs = {}

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help, description=help)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("simulate", cmd_simulate, "simulate a series, optionally with a change, as one value per line")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--change", choices=SCENARIOS, default="null")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--sigma2", type=float, default=1.25)
    p.add_argument("--transform", default="identity", help="transform applied to the whole series when --change is null")
    p.add_argument("--out")

    p = add("hermite", cmd_hermite, "Hermite coefficients, rank and normalization of a transform")
    p.add_argument("--transform", default="identity", help="name[:params], e.g. square or affine_square:1,0.5,0.5")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--x", type=_list(float))
    p.add_argument("--rank", action="store_true", help="certify the Hermite rank")
    p.add_argument("--qmax", type=int, default=4)
    p.add_argument("--n", type=int, help="also report d_{n,m} for this sample size")
    p.add_argument("--m", type=int, help="order of d_{n,m}; defaults to the Hermite rank")
    p.add_argument("--norm-mode", choices=("auto", "exact", "asymptotic"), default="auto")
    _model_args(p)

    p = add("test", cmd_test, "change-point test on a series")
    p.add_argument("--input", required=True)
    p.add_argument("--stat", choices=[k.value for k in StatisticKind], default="cvm")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--hurst", type=float, help="known Hurst coefficient")
    p.add_argument("--estimate-hurst", choices=("whittle", "split"), help="estimator used when --hurst is absent")
    p.add_argument("--calib", choices=("mc", "asymptotic"), default="mc")
    p.add_argument("--table", help="critical-value table JSON from the calibrate command")
    p.add_argument("--scale", choices=("fgn", "estimated"), default="fgn")
    p.add_argument("--J", type=int, help="Monte Carlo replicates (default 1000)")
    p.add_argument("--reps", type=int, help="limit-process replicates for --calib asymptotic (default 10000)")
    p.add_argument("--transform", default="identity", help="assumed transform for --calib asymptotic")

    p = add("estimate", cmd_estimate, "Hurst coefficient and scale constant of a series")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("whittle", "split"), default="whittle")
    p.add_argument("--stat", choices=[k.value for k in StatisticKind], default="cvm")
    p.add_argument("--K", type=int)
    p.add_argument("--bandwidth", type=int)
    p.add_argument("--raw-scale", action="store_true", help="autocovariances instead of autocorrelations")

    p = add("calibrate", cmd_calibrate, "Monte Carlo critical-value table")
    p.add_argument("--stat", type=_list(str), default=["cvm"])
    p.add_argument("--n", type=_list(int), required=True)
    p.add_argument("--hurst", type=_list(float), required=True)
    p.add_argument("--alpha", type=_list(float), default=[0.05])
    p.add_argument("--reps", type=int, help="null replicates J (default 1000)")
    p.add_argument("--out")
    p.add_argument("--timestamp", action="store_true", help="record the creation time (breaks byte-identical replay)")

    p = add("power", cmd_power, "power study from a key=value config file, CSV output")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = add("are", cmd_are, "asymptotic relative efficiency computations")
    p.add_argument("mode", choices=("mean_variance", "mean_shift"))
    p.add_argument("--H", type=float, default=0.7)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--C1", type=float, default=1.0)
    p.add_argument("--C2", type=float, default=1.0)
    p.add_argument("--q", type=float, help="limit quantile; simulated when omitted")
    p.add_argument("--kappa1", type=float, default=0.1)
    p.add_argument("--kappa2", type=float, default=0.9)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--reps", type=int, help="limit-process replicates (default 10000)")
    p.add_argument("--finite-reps", type=int, help="finite-sample replicates (default 1000)")
    p.add_argument("--J", type=int, help="null replicates (default 1000)")

    p = add("verify", cmd_verify, "run invariant suites and report measured values")
    p.add_argument("--suite", default="all")
    p.add_argument("--n", type=_list(int), help="sample sizes for the reduction suite")
    p.add_argument("--reps", type=int)
    p.add_argument("--format", choices=("json", "text"), default="json")
    return parser, subs


def _resolve(args) -> None:
    """Fill profile-dependent defaults and build the config echo."""
    args.seed = resolve_seed(args.seed)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    defaults = {"J": (1000, FAST_J), "reps": (10_000, 2000), "finite_reps": (1000, FAST_REPS)}
    if args.command == "calibrate":
        defaults["reps"] = (1000, FAST_J)
    if args.command == "verify":
        defaults.pop("reps")
    for key, (full, fast) in defaults.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, fast if args.fast else full)
    args.echo = {k: v for k, v in vars(args).items() if k not in ("func", "echo")}


def main(argv=None) -> int:
    parser, subs = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra:
        subs[args.command].error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        _resolve(args)
        return args.func(args)
    except UsageError as exc:
        subs[args.command].print_usage(sys.stderr)
        sys.stderr.write(f"lrdcp {args.command}: error: {exc}\n")
        return 2
    except _NUMERIC_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"lrdcp {args.command}: error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
