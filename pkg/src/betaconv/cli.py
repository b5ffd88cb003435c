"""``betaconv`` command line: file-based, seeded, strictly validated jobs.

Exit status: 0 success, 1 usage or configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dist import BetaParams, ScalarDist, family_from_config, from_gridfn
from .errors import BetaconvError, DomainError, ParameterError, VerificationFailure
from .evt import EllipticalSpec, PolarSpec, minima_experiment, polar_minima_experiment
from .grid import GridFn, GridSpec
from .scaling import (
    RecoverySchedule,
    default_grid,
    forward_cdf,
    forward_pdf,
    recover_derivative,
    recover_iterative,
)
from .tails import rv_index_at_zero
from .verify import GROUPS, report_json, run_suite

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("transform", "recover", "tail-index", "simulate", "verify")
TOP_KEYS = {"command", "seed", "output_dir", "parameters"}

SCHEMAS = {
    "transform": ({"alpha", "beta"}, {"op", "base", "input", "grid"}),
    "recover": ({"alpha", "beta", "input"}, {"op", "method", "schedule", "n", "delta", "interpolation"}),
    "tail-index": (set(), {"input", "family", "window"}),
    "simulate": ({"experiment", "n", "reps"}, {"k", "rho", "radial", "angular", "q1", "q2", "gamma", "allow_large_gamma", "dump_minima", "seed"}),
    "verify": (set(), {"only", "tol"}),
}
GRID_KEYS = {"min", "max", "points", "cluster_at", "cluster_gap"}


class UsageError(BetaconvError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- config ------------------------------------------------------------------


def _read_text(path: str, what: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p.read_text()


def load_config(path: str | None, command: str) -> dict:
    """Parse and validate a job file; unknown keys are rejected."""
    if path is None:
        cfg = {}
    else:
        text = _read_text(path, "config file")
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{path}: top level must be a JSON object")
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise UsageError(f"unknown config key(s) {sorted(unknown)}; allowed: {sorted(TOP_KEYS)}")
    if cfg.get("command", command) != command:
        raise UsageError(f"config is for command {cfg['command']!r}, not {command!r}")
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise UsageError(f"seed must be a nonnegative integer, got {seed!r}")
    params = cfg.get("parameters", {})
    if not isinstance(params, dict):
        raise UsageError("parameters must be a JSON object")
    required, optional = SCHEMAS[command]
    unknown = set(params) - required - optional
    if unknown:
        raise UsageError(f"unknown parameter(s) for {command}: {sorted(unknown)}; allowed: {sorted(required | optional)}")
    missing = required - set(params)
    if missing:
        raise UsageError(f"missing parameter(s) for {command}: {sorted(missing)}")
    out_dir = cfg.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise UsageError("output_dir must be a string")
    return {"seed": seed, "output_dir": out_dir, "parameters": params, "base_dir": Path(path).parent if path else Path(".")}


def _number(params: dict, key: str, *, positive: bool = True) -> float:
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ParameterError(f"{key} must be a finite number, got {v!r}")
    if positive and v <= 0:
        raise ParameterError(f"{key} must be positive, got {v!r}")
    return float(v)


def _integer(params: dict, key: str, minimum: int) -> int:
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ParameterError(f"{key} must be an integer >= {minimum}, got {v!r}")
    return v


def _beta_params(params: dict) -> BetaParams:
    return BetaParams(_number(params, "alpha"), _number(params, "beta"))


def _resolve(cfg: dict, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else cfg["base_dir"] / p


def _read_grid_csv(cfg: dict, rel: str, **kw) -> GridFn:
    path = _resolve(cfg, rel)
    text = _read_text(str(path), "input file")
    try:
        return GridFn.from_csv(text, **kw)
    except DomainError as exc:
        raise DomainError(f"{path}: {exc}") from None


def _read_samples(path: Path) -> np.ndarray:
    text = _read_text(str(path), "input file")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["x"]:
        raise DomainError(f"{path}: line 1: expected header 'x'")
    vals = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 1:
            raise DomainError(f"{path}: line {lineno}: expected 1 field, got {len(row)}")
        try:
            vals.append(float(row[0]))
        except ValueError as exc:
            raise DomainError(f"{path}: line {lineno}: {exc}") from None
    return np.array(vals)


def _grid(spec, H: ScalarDist):
    if spec is None:
        return default_grid(H)
    if not isinstance(spec, dict) or set(spec) - GRID_KEYS or not {"min", "max"} <= set(spec):
        raise ParameterError(f"grid needs keys min, max and optionally {sorted(GRID_KEYS - {'min', 'max'})}")
    return GridSpec(**spec)


# -- output ------------------------------------------------------------------


def _out_dir(cfg: dict, override: str | None) -> Path:
    d = Path(override or cfg["output_dir"] or "betaconv_output")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ----------------------------------------------------------------


def run_transform(cfg: dict, out: Path) -> int:
    params = cfg["parameters"]
    if params.get("op", "forward") != "forward":
        raise ParameterError("transform only supports op 'forward'")
    p = _beta_params(params)
    if ("base" in params) == ("input" in params):
        raise ParameterError("transform needs exactly one of 'base' (a family) or 'input' (a CDF CSV)")
    if "base" in params:
        H = family_from_config(params["base"])
    else:
        H = from_gridfn(_read_grid_csv(cfg, params["input"]), name="input")
    grid = _grid(params.get("grid"), H)
    cdf, cdf_resid = forward_cdf(H, p, grid, with_residual=True)
    pdf, pdf_resid = forward_pdf(H, p, grid, with_residual=True)
    cdf.to_csv(out / "scaled_cdf.csv")
    pdf.to_csv(out / "scaled_pdf.csv")
    meta = {
        "command": "transform",
        "alpha": p.alpha,
        "beta": p.beta,
        "base": params.get("base", {"input": params.get("input")}),
        "points": int(cdf.xs.size),
        "grid": [float(cdf.xs[0]), float(cdf.xs[-1])],
        "consistency": {"cdf_route_max_abs": cdf_resid, "pdf_route_max_rel": pdf_resid, "tolerance": 1e-7},
    }
    base = params.get("base", {})
    if base.get("family") == "gamma" and math.isclose(base.get("shape", 0.0), p.alpha + p.beta, rel_tol=1e-12):
        from .dist import make_gamma

        ref = make_gamma(p.alpha, base.get("rate", 1.0))
        err = float(np.max(np.abs(cdf.ys - ref.cdf(cdf.xs))))
        meta["reference"] = {"law": f"gamma({p.alpha:g}, {base.get('rate', 1.0):g})", "max_abs": err, "tolerance": 1e-6, "passed": err <= 1e-6}
    _dump_json(out / "meta.json", meta)
    return EXIT_OK


def run_recover(cfg: dict, out: Path) -> int:
    params = cfg["parameters"]
    if params.get("op", "recover") != "recover":
        raise ParameterError("recover only supports op 'recover'")
    p = _beta_params(params)
    method = params.get("method", "iterative")
    meta = {"command": "recover", "alpha": p.alpha, "beta": p.beta, "method": method, "input": params["input"]}
    if method == "iterative":
        scaled = _read_grid_csv(cfg, params["input"], interpolation=params.get("interpolation", "monotone-cubic"))
        sched = RecoverySchedule(tuple(params["schedule"])) if "schedule" in params else RecoverySchedule.default(p.beta)
        rec = recover_iterative(scaled, p, sched)
        rec.to_csv(out / "recovered_cdf.csv")
        meta["schedule"] = list(sched.betas)
    elif method == "derivative":
        n = _integer(params, "n", 1)
        delta = _number(params, "delta", positive=False) if "delta" in params else 0.0
        scaled = _read_grid_csv(cfg, params["input"], interpolation="linear")
        rec = recover_derivative(scaled, p, n, delta)
        rec.to_csv(out / "recovered_pdf.csv")
        meta.update(n=n, delta=delta, integral=rec.integral())
    else:
        raise ParameterError(f"unknown recovery method {method!r}; expected 'iterative' or 'derivative'")
    _dump_json(out / "meta.json", meta)
    return EXIT_OK


def run_tail_index(cfg: dict, out: Path, args) -> int:
    params = dict(cfg["parameters"])
    if args.input is not None:
        params["input"] = args.input
    if args.family is not None:
        try:
            fam = json.loads(args.family)
        except json.JSONDecodeError:
            fam = {"family": args.family}
        params["family"] = fam
    if args.window is not None:
        try:
            params["window"] = [float(v) for v in args.window.split(",")]
        except ValueError:
            raise UsageError(f"--window expects q1,q2, got {args.window!r}") from None
    if ("input" in params) == ("family" in params):
        raise UsageError("tail-index needs exactly one of an input sample file or a family")
    window = params.get("window")
    if window is not None and (not isinstance(window, list) or len(window) != 2):
        raise ParameterError("window must be a pair of quantile levels")
    if "family" in params:
        src = family_from_config(params["family"])
    else:
        src = _read_samples(_resolve(cfg, params["input"]))
    report = rv_index_at_zero(src, None if window is None else tuple(window))
    text = json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    (out / "tail_index.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def run_simulate(cfg: dict, out: Path, seed: int) -> int:
    params = cfg["parameters"]
    n = _integer(params, "n", 1)
    reps = _integer(params, "reps", 0)
    gamma = _number(params, "gamma") if "gamma" in params else None
    allow = bool(params.get("allow_large_gamma", False))
    if "radial" not in params:
        raise ParameterError("simulate needs a 'radial' distribution")
    radial = family_from_config(params["radial"])
    kind = params["experiment"]
    if kind == "elliptical-minima":
        if "angular" in params:
            raise ParameterError("elliptical-minima takes no angular law")
        k = _integer(params, "k", 2) if "k" in params else 2
        rho = _number(params, "rho", positive=False) if "rho" in params else 0.0
        report = minima_experiment(EllipticalSpec.equicorrelated(k, rho, radial), n, reps, seed, gamma=gamma, allow_large_gamma=allow)
    elif kind == "polar-minima":
        if "angular" not in params:
            raise ParameterError("polar-minima needs an 'angular' distribution")
        q1 = _number(params, "q1") if "q1" in params else 0.5
        q2 = _number(params, "q2") if "q2" in params else 0.5
        spec = PolarSpec(_number(params, "rho", positive=False), q1, q2, radial, family_from_config(params["angular"]))
        report = polar_minima_experiment(spec, n, reps, seed, gamma=gamma, allow_large_gamma=allow)
    else:
        raise ParameterError(f"unknown experiment {kind!r}; expected 'elliptical-minima' or 'polar-minima'")
    (out / "results.json").write_text(report.to_json())
    if params.get("dump_minima", False):
        (out / "minima.csv").write_text(report.minima_csv())
    return EXIT_OK


def run_verify(cfg: dict, out: Path | None, args) -> int:
    params = cfg["parameters"]
    only = args.only if args.only else params.get("only")
    tol = args.tol if args.tol is not None else params.get("tol")
    checks = run_suite(only, tol)
    text = report_json(checks)
    if out is not None:
        (out / "verify.json").write_text(text)
    sys.stdout.write(text)
    if not all(c.passed for c in checks):
        raise VerificationFailure(f"{sum(not c.passed for c in checks)} of {len(checks)} checks failed")
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def _provenance(exc: BaseException) -> str:
    """Module where the exception was raised."""
    tb = exc.__traceback__
    name = "betaconv"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", name)
        tb = tb.tb_next
    return name


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="betaconv", description="Beta-product scaling: transforms, recovery, tails, simulation.")
    parser.add_argument("--version", action="version", version=f"betaconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name in ("transform", "recover", "simulate"), help="job file (JSON)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        if name == "tail-index":
            sp.add_argument("--input", help="sample CSV with header 'x'")
            sp.add_argument("--family", help="family name or JSON object")
            sp.add_argument("--window", help="quantile window q1,q2")
        if name == "verify":
            sp.add_argument("--only", action="append", choices=list(GROUPS), help="run only this group (repeatable)")
            sp.add_argument("--tol", type=float, help="loosen every tolerance to at least this value")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, args.command)
        seed = cfg["seed"] if args.seed is None else args.seed
        if seed < 0:
            raise UsageError("seed must be nonnegative")
        if args.command == "simulate" and args.seed is None and "seed" in cfg["parameters"]:
            seed = _integer(cfg["parameters"], "seed", 0)
        if args.command == "verify":
            out = _out_dir(cfg, args.out) if (args.out or cfg["output_dir"]) else None
            return run_verify(cfg, out, args)
        out = _out_dir(cfg, args.out)
        if args.command == "transform":
            return run_transform(cfg, out)
        if args.command == "recover":
            return run_recover(cfg, out)
        if args.command == "tail-index":
            return run_tail_index(cfg, out, args)
        return run_simulate(cfg, out, seed)
    except BetaconvError as exc:
        where = _provenance(exc)
        tag = f" [{where}.{type(exc).__name__}]" if exc.exit_code == EXIT_NUMERIC else ""
        print(f"betaconv: error{tag}: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
