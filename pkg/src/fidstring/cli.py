"""Command line interface: ``fidstring run | oracle | scenario``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .engine import Scenario, normalize
from .errors import ConfigError, CurveError, ExpressionError, FidstringError
from .geometry import Curve
from .noise import GaussianNoise
from .oracle import slab_oracle, tube_oracle
from .priors import Jeffreys, Shift, prior_from_config

DEFAULT_QUANTILES = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95]


# ------------------------------------------------------------- validation

def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _number(obj: dict, key: str, path: str, default=None) -> float:
    if key not in obj:
        if default is not None:
            return default
        raise ConfigError(f"{path}.{key}", "missing")
    if not _is_number(obj[key]):
        raise ConfigError(f"{path}.{key}", "expected a finite number")
    return float(obj[key])


def _integer(obj: dict, key: str, path: str, default=None, minimum: int = 0) -> int:
    if key not in obj:
        if default is not None:
            return default
        raise ConfigError(f"{path}.{key}", "missing")
    v = obj[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}", "expected an integer")
    if v < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}")
    return v


def _section(cfg: dict, key: str, required: bool = True):
    if key not in cfg:
        if required:
            raise ConfigError(key, "missing")
        return None
    if not isinstance(cfg[key], dict):
        raise ConfigError(key, "expected an object")
    return cfg[key]


def _vec2(value, path: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2 or not all(_is_number(v) for v in value):
        raise ConfigError(path, "expected 2 numbers")
    return float(value[0]), float(value[1])


def build_problem(cfg) -> tuple[Scenario, object]:
    """Validate a parsed config and build ``(scenario, prior)``."""
    if not isinstance(cfg, dict):
        raise ConfigError("config", "expected a JSON object")
    curve_cfg = _section(cfg, "curve")
    t_min = _number(curve_cfg, "t_min", "curve")
    t_max = _number(curve_cfg, "t_max", "curve")
    if not t_min < t_max:
        raise ConfigError("curve.t_min", "must be less than curve.t_max")
    exprs = {}
    for key in ("mu1", "mu2"):
        if not isinstance(curve_cfg.get(key), str):
            raise ConfigError(f"curve.{key}", "expected an expression string in t")
        exprs[key] = curve_cfg[key]
    try:
        curve = Curve.from_strings(exprs["mu1"], exprs["mu2"], t_min, t_max)
    except ExpressionError as exc:
        # report which coordinate failed
        for key in ("mu1", "mu2"):
            try:
                Curve.from_strings(exprs[key], "t", t_min, t_max, check_regularity=False)
            except ExpressionError as inner:
                raise ConfigError(f"curve.{key}", str(inner)) from None
        raise ConfigError("curve", str(exc)) from None
    except CurveError as exc:
        raise ConfigError("curve", str(exc)) from None

    noise_cfg = _section(cfg, "noise", required=False) or {}
    cov = noise_cfg.get("cov", [[1.0, 0.0], [0.0, 1.0]])
    if (not isinstance(cov, list) or len(cov) != 2
            or not all(isinstance(row, list) and len(row) == 2 and all(_is_number(v) for v in row)
                       for row in cov)):
        raise ConfigError("noise.cov", "expected [[s11, s12], [s12, s22]]")
    try:
        noise = GaussianNoise(np.array(cov, dtype=float))
    except ValueError as exc:
        raise ConfigError("noise.cov", str(exc)) from None

    x = _vec2(cfg.get("observation"), "observation")
    prior = prior_from_config(cfg.get("prior", {"type": "jeffreys"}))
    return Scenario(curve, noise, x), prior


def output_options(cfg: dict) -> dict:
    out = _section(cfg, "output", required=False) or {}
    quantiles = out.get("quantiles", DEFAULT_QUANTILES)
    if not isinstance(quantiles, list) or not all(_is_number(p) and 0 < p < 1 for p in quantiles):
        raise ConfigError("output.quantiles", "expected a list of numbers in (0, 1)")
    tol = 1e-10
    if "tolerance" in cfg:
        if not _is_number(cfg["tolerance"]):
            raise ConfigError("tolerance", "expected a finite number")
        tol = float(cfg["tolerance"])
    if not 1e-12 <= tol <= 1e-3:
        raise ConfigError("tolerance", "must lie in [1e-12, 1e-3]")
    return {
        "grid_points": _integer(out, "grid_points", "output", default=101, minimum=2),
        "quantiles": [float(p) for p in quantiles],
        "n_samples": _integer(out, "n_samples", "output", default=0, minimum=0),
        "seed": _integer(out, "seed", "output", default=0, minimum=0),
        "tolerance": tol,
    }


def oracle_options(cfg: dict) -> dict:
    block = _section(cfg, "oracle", required=True)
    kind = block.get("kind")
    if kind not in ("tube", "slab"):
        raise ConfigError("oracle.kind", "expected 'tube' or 'slab'")
    opts = {
        "kind": kind,
        "epsilon": _number(block, "epsilon", "oracle"),
        "n_proposed": _integer(block, "n_proposed", "oracle", minimum=1),
        "seed": _integer(block, "seed", "oracle", minimum=0),
        "workers": _integer(block, "workers", "oracle", default=1, minimum=1),
    }
    if not opts["epsilon"] > 0:
        raise ConfigError("oracle.epsilon", "must be positive")
    if kind == "slab":
        d = _vec2(block.get("d"), "oracle.d")
        if d == (0.0, 0.0):
            raise ConfigError("oracle.d", "must be non-zero")
        opts["d"] = d
    else:
        opts["grid_n"] = _integer(block, "grid_n", "oracle", default=512, minimum=64)
    return opts


# ------------------------------------------------------------------ output

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, allow_nan=True) + "\n")


def _load_config(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None


def run(config_path: str, out_dir: str) -> int:
    cfg = _load_config(config_path)
    scenario, prior = build_problem(cfg)
    opts = output_options(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rf = normalize(scenario, prior, tol=opts["tolerance"])
    table = rf.table(opts["grid_points"])
    cols = ("t", "theta1", "theta2", "pdf", "cdf")
    lines = [",".join(cols)]
    lines += [",".join(_fmt(table[c][i]) for c in cols) for i in range(opts["grid_points"])]
    _write_text(out / "density.csv", "\n".join(lines) + "\n")

    quantiles = {repr(p): float(rf.quantile(p)) for p in opts["quantiles"]}
    _write_json(out / "quantiles.json", quantiles)

    if opts["n_samples"] > 0:
        rng = np.random.Generator(np.random.PCG64(opts["seed"]))
        draws = rf.sample(rng, opts["n_samples"])
        _write_text(out / "samples.csv", "".join(_fmt(v) + "\n" for v in draws))

    _write_json(out / "summary.json", {
        "tool": "fidstring",
        "version": __version__,
        "Z": rf.Z,
        "log_Z": rf.log_Z,
        "mode_t": rf.mode(),
        "mean_t": rf.mean(),
        "n_nodes": int(rf.grid.size),
        "config": cfg,
    })
    return 0


def oracle_cmd(config_path: str, out_dir: str) -> int:
    cfg = _load_config(config_path)
    scenario, _ = build_problem(cfg)
    opts = oracle_options(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if opts["kind"] == "tube":
        reference = normalize(scenario, Jeffreys())
        result = tube_oracle(scenario, opts["epsilon"], opts["n_proposed"], opts["seed"],
                             grid_n=opts["grid_n"], reference=reference, workers=opts["workers"])
        ref_prior = Jeffreys().to_config()
    else:
        shift = Shift(opts["d"])
        reference = normalize(scenario, shift)
        result = slab_oracle(scenario, opts["d"], opts["epsilon"], opts["n_proposed"], opts["seed"],
                             reference=reference, workers=opts["workers"])
        ref_prior = shift.to_config()
    report = result.report()
    report["reference_prior"] = ref_prior
    _write_json(out / "oracle_report.json", report)
    _write_text(out / "oracle_samples.csv", "".join(_fmt(v) + "\n" for v in result.accepted_t))
    return 0


def scenario_config(args) -> dict:
    """Config dictionary for a built-in scenario."""
    output = {"grid_points": args.grid_points, "quantiles": DEFAULT_QUANTILES,
              "n_samples": args.n_samples, "seed": args.seed}
    if args.name == "seidenfeld":
        x = args.x if args.x is not None else [0.0, 0.0]
        curve = {"mu1": "t^3", "mu2": "t", "t_min": -args.t_bound, "t_max": args.t_bound}
    elif args.name == "line":
        x = args.x if args.x is not None else [1.0, 1.0]
        p0, e = args.p0, args.e
        if abs(math.hypot(*e) - 1.0) > 1e-12:
            raise ConfigError("e", "line direction must be a unit vector")
        curve = {"mu1": f"{p0[0]!r} + {e[0]!r}*t", "mu2": f"{p0[1]!r} + {e[1]!r}*t",
                 "t_min": args.t_min, "t_max": args.t_max}
    else:
        x = args.x if args.x is not None else [0.0, 3.0]
        if x[0] == 0 and x[1] == 0:
            raise ConfigError("x", "observation at the centre leaves the mean angle undefined")
        if not args.r > 0:
            raise ConfigError("r", "radius must be positive")
        curve = {"mu1": f"{args.r!r}*cos(t)", "mu2": f"{args.r!r}*sin(t)",
                 "t_min": 0.0, "t_max": 2 * math.pi}
    cfg = {
        "curve": curve,
        "noise": {"cov": [[1.0, 0.0], [0.0, 1.0]]},
        "observation": [float(v) for v in x],
        "prior": json.loads(args.prior),
        "output": output,
    }
    if args.oracle:
        block = {"kind": args.oracle, "epsilon": args.epsilon, "n_proposed": args.n_proposed,
                 "seed": args.oracle_seed}
        if args.oracle == "slab":
            block["d"] = [float(v) for v in args.d]
        cfg["oracle"] = block
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fidstring", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="normalize the restricted fiducial and write tables")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)

    p_or = sub.add_parser("oracle", help="run the Monte Carlo conditioning oracle")
    p_or.add_argument("--config", required=True)
    p_or.add_argument("--out", required=True)

    p_sc = sub.add_parser("scenario", help="write a config for a built-in scenario")
    p_sc.add_argument("--name", required=True, choices=("seidenfeld", "line", "circle"))
    p_sc.add_argument("--out", required=True)
    p_sc.add_argument("--x", type=float, nargs=2, metavar=("X1", "X2"))
    p_sc.add_argument("--t-bound", type=float, default=2.0)
    p_sc.add_argument("--p0", type=float, nargs=2, default=[0.0, 0.0])
    p_sc.add_argument("--e", type=float, nargs=2, default=[1.0, 0.0])
    p_sc.add_argument("--t-min", type=float, default=-10.0)
    p_sc.add_argument("--t-max", type=float, default=10.0)
    p_sc.add_argument("--r", type=float, default=1.0)
    p_sc.add_argument("--prior", default='{"type": "jeffreys"}', help="prior as JSON")
    p_sc.add_argument("--grid-points", type=int, default=101)
    p_sc.add_argument("--n-samples", type=int, default=1000)
    p_sc.add_argument("--seed", type=int, default=42)
    p_sc.add_argument("--oracle", choices=("tube", "slab"))
    p_sc.add_argument("--d", type=float, nargs=2, default=[1.0, 0.0])
    p_sc.add_argument("--epsilon", type=float, default=0.01)
    p_sc.add_argument("--n-proposed", type=int, default=1_000_000)
    p_sc.add_argument("--oracle-seed", type=int, default=7)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args.out)
        if args.command == "oracle":
            return oracle_cmd(args.config, args.out)
        try:
            cfg = scenario_config(args)
        except json.JSONDecodeError as exc:
            raise ConfigError("prior", f"invalid JSON: {exc}") from None
        build_problem(cfg)
        output_options(cfg)
        if "oracle" in cfg:
            oracle_options(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", cfg)
        print(out / "config.json")
        return 0
    except ConfigError as exc:
        print(f"fidstring: config error: {exc}", file=sys.stderr)
        return 1
    except (FidstringError, ArithmeticError) as exc:
        print(f"fidstring: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
