"""
cli — Argparse entry point and job dispatch.

    monoreg fit      --in data.csv [--sig +1,-1] [--out fitted.csv]
    monoreg project  --in data.csv [--probe 0.2,0.7] [--out fitted.csv]
    monoreg converge --field paraboloid1d --norm sup --levels 8 [--out report.json]
    monoreg verify   --bregman entropy [--in data.csv] --trials 200 --seed 0
    monoreg point    --field paraboloid1d --x0 0.9 --tol 1e-4

Exit codes: 0 success, 1 input or usage error, 2 failed certificate,
verification or convergence.
"""

import argparse
import os
import sys
import textwrap
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import ui
from .config import CERT_TOL, POINT_TOL, SEED, TRIALS
from .errors import ConvergenceError, DimensionError, InputFormatError, MonoregError
from .generalized import SPECS, get_spec, verify_minimizer
from .grid import Box, GridFunction, dyadic_grid, lift
from .gridfile import read_grid, sidecar_path, write_grid
from .isotonic import solve
from .order import Signature
from .report import dumps, write_csv, write_json

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2


class UsageError(Exception):
    pass


# ═════════════════════════════════════════════════════════════════════════════
# JOB CONFIG
# ═════════════════════════════════════════════════════════════════════════════

def _parse_point(text) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise ValueError(f"bad point {text!r}; expected x1,x2,...") from None


class JobConfig(BaseModel):
    """Validated job description built from command-line flags."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    command: Literal["fit", "project", "converge", "verify", "point"]
    input: str | None = None
    output: str | None = None
    sig: Signature | None = None
    box: Box | None = None
    norm: Literal["l2", "sup"] = "l2"
    levels: int | None = Field(default=None, ge=0)
    target: float = Field(default=0.0, ge=0)
    tol: float = Field(default=CERT_TOL, gt=0)
    bregman: str = "square"
    trials: int = Field(default=TRIALS, ge=1)
    seed: int = SEED
    field: str | None = None
    weight: str = "one"
    x0: tuple[float, ...] | None = None
    probes: tuple[tuple[float, ...], ...] = ()
    mode: Literal["midpoint", "average"] = "midpoint"
    engine: Literal["auto", "partition", "dykstra"] = "auto"

    @model_validator(mode="before")
    @classmethod
    def _point_tol(cls, data):
        if isinstance(data, dict) and data.get("command") == "point" and data.get("tol") is None:
            return {**data, "tol": POINT_TOL}
        return data

    @field_validator("sig", mode="before")
    @classmethod
    def _sig(cls, v):
        if v is None or isinstance(v, Signature):
            return v
        try:
            return Signature.parse(str(v))
        except MonoregError as exc:
            raise ValueError(str(exc)) from None

    @field_validator("box", mode="before")
    @classmethod
    def _box(cls, v):
        if v is None or isinstance(v, Box):
            return v
        try:
            return Box.parse(str(v))
        except MonoregError as exc:
            raise ValueError(str(exc)) from None

    @field_validator("x0", mode="before")
    @classmethod
    def _x0(cls, v):
        if v is None or isinstance(v, tuple):
            return v
        return _parse_point(v)

    @field_validator("probes", mode="before")
    @classmethod
    def _probes(cls, v):
        if not v:
            return ()
        return tuple(_parse_point(p) for p in v)

    @field_validator("bregman")
    @classmethod
    def _bregman(cls, v):
        if v not in SPECS:
            raise ValueError(f"unknown Bregman spec {v!r} (choose from {', '.join(SPECS)})")
        return v


# ═════════════════════════════════════════════════════════════════════════════
# HELPERS
# ═════════════════════════════════════════════════════════════════════════════

def _emit_json(cfg, obj):
    if cfg.output:
        write_json(cfg.output, obj)
        ui.info(f"wrote {cfg.output}")
    else:
        sys.stdout.write(dumps(obj))


def _companion(path, suffix):
    return os.path.splitext(path)[0] + suffix


def _load_input(cfg):
    """Grid file plus the signature from flags or sidecar, and unit weights by default."""
    if not cfg.input:
        raise UsageError(f"{cfg.command} needs --in")
    data = read_grid(cfg.input)
    sig = cfg.sig or data.signature
    if sig is None:
        raise UsageError("no signature: pass --sig or set it in the sidecar")
    if cfg.sig is None and len(sig) != data.values.grid.dim:
        raise InputFormatError(sidecar_path(cfg.input), None,
                               f"signature has {len(sig)} axes, data has {data.values.grid.dim}")
    sig.check_dim(data.values.grid.dim)
    w = data.weights or GridFunction.constant(data.values.grid, 1.0)
    return data, sig, w


def _builtin_problem(cfg):
    from .fields import get_field, get_weight

    if not cfg.field:
        raise UsageError(f"{cfg.command} needs --field (or --in)")
    builtin = get_field(cfg.field)
    if cfg.box is not None and cfg.box != builtin.field.box:
        raise UsageError(f"builtin {builtin.name} lives on {builtin.field.box}")
    return builtin, get_weight(cfg.weight, builtin.field.box), cfg.sig or builtin.signature


# ═════════════════════════════════════════════════════════════════════════════
# COMMANDS
# ═════════════════════════════════════════════════════════════════════════════

def cmd_fit(cfg):
    data, sig, w = _load_input(cfg)
    result = solve(data.values, w, sig, engine=cfg.engine, tol=cfg.tol)
    cert = result.certificate
    if cfg.output:
        write_grid(cfg.output, result.fitted, data.weights, sig)
        write_json(_companion(cfg.output, ".certificate.json"), result.to_dict())
        ui.info(f"wrote {cfg.output}")
    else:
        from .gridfile import grid_csv
        sys.stdout.write(grid_csv(result.fitted, data.weights))
    ui.status(cert.passed, f"{result.n_blocks} blocks, objective {result.objective:.6g}, "
                           f"certificate {'passed' if cert.passed else 'FAILED'}")
    return EXIT_OK if cert.passed else EXIT_NUMERIC


def cmd_project(cfg):
    from .grid import sample_midpoints
    from .projection import project_grid_constant

    data, sig, w = _load_input(cfg)
    field = project_grid_constant(data.values, w, sig)
    grid = data.values.grid
    fitted = sample_midpoints(field, grid)
    if cfg.output:
        write_grid(cfg.output, fitted, data.weights, sig)
        ui.info(f"wrote {cfg.output}")
    probes = []
    for x in cfg.probes:
        if len(x) != grid.dim:
            raise DimensionError(f"probe {x} has dimension {len(x)}, grid has {grid.dim}")
        probes.append({"x": list(x), "value": field(np.asarray(x))})
    if probes or not cfg.output:
        sys.stdout.write(dumps({"probes": probes} if cfg.output else {
            "grid": grid.to_dict(), "values": fitted.values.tolist(), "probes": probes,
        }))
    ui.success(f"projected onto {grid.shape} cells")
    return EXIT_OK


def cmd_converge(cfg):
    from .projection import CSV_COLUMNS, approximate_projection

    analytic = None
    if cfg.input:
        data, sig, w_grid = _load_input(cfg)
        f, w = lift(data.values), lift(w_grid)
    else:
        builtin, w, sig = _builtin_problem(cfg)
        f = builtin.field
        if cfg.weight == "one":
            analytic = builtin.projection
    report = approximate_projection(f, w, sig, norm_kind=cfg.norm, max_level=cfg.levels,
                                    target=cfg.target, mode=cfg.mode)
    out = report.to_dict()
    if analytic is not None:
        fine = dyadic_grid(f.box, min(report.levels[-1].level + 3, 20 // f.box.dim))
        pts = fine.points()
        out["analytic_sup_error"] = float(np.abs(report.final_field.evaluate(pts) - analytic.evaluate(pts)).max())
    _emit_json(cfg, out)
    if cfg.output:
        write_csv(_companion(cfg.output, ".csv"), CSV_COLUMNS, report.csv_rows())
    ui.heading(f"Convergence ({cfg.norm})")
    ui.levels_table(report.levels)
    if "target_unreached" in report.flags and cfg.target > 0:
        ui.warn(f"target {cfg.target:g} not reached by level {report.levels[-1].level}")
        return EXIT_NUMERIC
    return EXIT_OK


def _random_instance(cfg):
    rng = np.random.default_rng(cfg.seed)
    sig = cfg.sig or Signature((1,))
    box = cfg.box or Box.unit(len(sig))
    grid = dyadic_grid(box, 2 if len(sig) <= 2 else 1)
    f = GridFunction(grid, rng.uniform(0.5, 3.0, size=grid.shape))
    w = GridFunction(grid, rng.uniform(0.5, 2.0, size=grid.shape))
    return f, w, sig


def cmd_verify(cfg):
    spec = get_spec(cfg.bregman)
    if cfg.input:
        data, sig, w = _load_input(cfg)
        f = data.values
    else:
        f, w, sig = _random_instance(cfg)
    report = verify_minimizer(spec, f, w, sig, trials=cfg.trials, seed=cfg.seed, tol=cfg.tol)
    _emit_json(cfg, report.to_dict())
    ui.status(report.passed, f"{spec.name}: fit beats {cfg.trials} monotone candidates"
              if report.passed else f"{spec.name}: verification FAILED")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_point(cfg):
    from .averaging import pointwise_value

    builtin, w, sig = _builtin_problem(cfg)
    if cfg.x0 is None:
        raise UsageError("point needs --x0")
    value = pointwise_value(builtin.field, w, sig, np.asarray(cfg.x0), cfg.tol)
    _emit_json(cfg, value.to_dict())
    ui.success(f"value {value.value:.10g} after {value.levels_used} levels")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "project": cmd_project,
    "converge": cmd_converge,
    "verify": cmd_verify,
    "point": cmd_point,
}


# ═════════════════════════════════════════════════════════════════════════════
# MAIN
# ═════════════════════════════════════════════════════════════════════════════

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(
        prog="monoreg",
        description="Weighted least-squares monotonic regression on boxes.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=textwrap.dedent("""\
            Examples:
              monoreg fit --in data.csv --sig +1,-1 --out fitted.csv
              monoreg converge --field paraboloid1d --norm sup --levels 8
              monoreg point --field paraboloid1d --x0 0.9 --tol 1e-4
        """),
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--in", dest="input")
        p.add_argument("--out", dest="output")
        p.add_argument("--sig")
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=int)

    p_fit = sub.add_parser("fit", help="Fit a grid CSV and certify the result")
    common(p_fit)
    p_fit.add_argument("--engine", choices=["auto", "partition", "dykstra"])

    p_proj = sub.add_parser("project", help="Continuous projection of grid-constant data")
    common(p_proj)
    p_proj.add_argument("--probe", dest="probes", action="append", default=[])

    p_conv = sub.add_parser("converge", help="Dyadic refinement with error bounds")
    common(p_conv)
    p_conv.add_argument("--field")
    p_conv.add_argument("--weight")
    p_conv.add_argument("--box")
    p_conv.add_argument("--norm", choices=["l2", "sup"])
    p_conv.add_argument("--levels", type=int)
    p_conv.add_argument("--target", type=float)
    p_conv.add_argument("--mode", choices=["midpoint", "average"])

    p_ver = sub.add_parser("verify", help="Check Bregman-objective optimality of the fit")
    common(p_ver)
    p_ver.add_argument("--bregman", choices=sorted(SPECS))
    p_ver.add_argument("--trials", type=int)
    p_ver.add_argument("--box")

    p_pt = sub.add_parser("point", help="Value of the continuous representative at x0")
    common(p_pt)
    p_pt.add_argument("--field")
    p_pt.add_argument("--weight")
    p_pt.add_argument("--box")
    p_pt.add_argument("--x0")
    return parser


def make_config(args) -> JobConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k != "verbose"}
    return JobConfig(**values)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        ui.error(f"usage: {exc}")
        return EXIT_INPUT
    ui.setup_logging(args.verbose)
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())
        ui.error(f"invalid options: {problems}")
        return EXIT_INPUT
    except ConvergenceError as exc:
        ui.error(f"{exc} (last values {list(exc.last_values)})")
        return EXIT_NUMERIC
    except (MonoregError, UsageError) as exc:
        ui.error(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        ui.error(f"{exc.filename or ''}: {exc.strerror or exc}")
        return EXIT_INPUT
