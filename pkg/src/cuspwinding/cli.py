"""Command line front end.

Exit codes: 0 success, 1 validation failure, 2 numerical non-convergence, 3 usage error.
"""
from __future__ import annotations

import argparse
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pressure import InfinitePressure, PotentialParams, PressureError, pressure
from .coding import TruncatedAlphabet
from .schottky import PresentationError, load_path, validate
from .spectrum import (
    SolverError,
    SpectrumPoint,
    brute_force_oracle,
    distortion_exponent,
    hausdorff_dim,
    spectrum_grid,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 3
COMMANDS = ("validate", "dim", "pressure", "spectrum", "distortion", "oracle")


class UsageError(ValueError):
    pass


def parse_grid(spec: str) -> list[tuple[float, ...]]:
    """Parse ``start:stop:step`` axes joined by ``x`` into a row-major point list."""
    axes = []
    for part in spec.split("x"):
        try:
            start, stop, step = (float(v) for v in part.split(":"))
        except ValueError:
            raise UsageError(f"bad grid axis {part!r}; expected start:stop:step") from None
        if not step > 0:
            raise UsageError(f"grid step must be positive in {part!r}")
        if start > stop:
            raise UsageError(f"grid start exceeds stop in {part!r}")
        count = (stop - start) / step
        n = int(math.floor(count + 1e-12))
        if abs(count - round(count)) <= 1e-12 * max(1.0, abs(count)):
            n = int(round(count))
        axes.append([start + k * step for k in range(n + 1)])
    return [tuple(pt) for pt in itertools.product(*axes)]


@dataclass
class RunConfig:
    command: str
    config_path: str
    L: int = 100
    tol: float = 1e-8
    newton_tol: float = 1e-10
    q: list[float] | None = None
    b: float | None = None
    alpha: list[float] | None = None
    alpha_grid: str | None = None
    out: str | None = None
    format: str = "csv"
    tail: bool = True
    workers: int = 1
    l_range: str = "20:200"
    q_grid: str = "0.05:3:0.05"
    b_grid: str = "0.05:0.95:0.05"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cuspwinding", description="Bowen root and cusp-winding spectrum of Schottky groups.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON file or preset:<name>")
    parser.add_argument("--L", type=int, default=100, help="maximal parabolic power")
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--newton-tol", type=float, default=1e-10)
    parser.add_argument("--q", type=_floats)
    parser.add_argument("--b", type=float)
    parser.add_argument("--alpha", type=_floats)
    parser.add_argument("--alpha-grid")
    parser.add_argument("--out")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--no-tail", dest="tail", action="store_false",
                        help="plain truncation, without the blocks beyond L")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--l-range", default="20:200")
    parser.add_argument("--q-grid", default="0.05:3:0.05")
    parser.add_argument("--b-grid", default="0.05:0.95:0.05")
    return parser


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def render(header: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "json":
        records = [{k: _jsonable(v) for k, v in zip(header, row)} for row in rows]
        return json.dumps(records, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required for this command")
    return value


def _vector(values, m: int, flag: str) -> list[float]:
    values = _need(values, flag)
    if len(values) != m:
        raise UsageError(f"{flag} needs {m} comma separated values")
    return values


def _run(cfg: RunConfig) -> tuple[str, int]:
    check = cfg.command != "validate"
    p = load_path(cfg.config_path, check=check)
    if cfg.L < 1:
        raise UsageError("--L must be >= 1")
    if cfg.command == "validate":
        report = validate(p)
        text = "\n".join(report.lines()) + "\n"
        return text, EXIT_OK if report.ok else EXIT_INVALID
    if cfg.command == "dim":
        d = hausdorff_dim(p, cfg.L, cfg.tol, tail=cfg.tail)
        return render(["s", "low", "high", "L", "residual"],
                      [[d.s, d.bracket[0], d.bracket[1], d.L, d.residual]], cfg.format), EXIT_OK
    if cfg.command == "pressure":
        q = _vector(cfg.q, p.m, "--q")
        b = _need(cfg.b, "--b")
        alpha = _vector(cfg.alpha, p.m, "--alpha") if cfg.alpha is not None else [0.0] * p.m
        r = pressure(TruncatedAlphabet(p, cfg.L), PotentialParams(tuple(q), b, tuple(alpha)), tail=cfg.tail)
        return render(["value", "distortion_bound", "L", "iterations", "converged"],
                      [[r.value, r.distortion_bound, r.L, r.iterations, r.converged]], cfg.format), EXIT_OK
    if cfg.command == "spectrum":
        if cfg.alpha_grid is not None:
            grid = parse_grid(cfg.alpha_grid)
        else:
            grid = [tuple(_vector(cfg.alpha, p.m, "--alpha"))]
        if any(len(a) != p.m for a in grid):
            raise UsageError(f"alpha grid needs {p.m} axes")
        points = spectrum_grid(p, grid, cfg.L, cfg.newton_tol, tail=cfg.tail, workers=cfg.workers)
        header = ([f"alpha_{i + 1}" for i in range(p.m)] + [f"q_{i + 1}" for i in range(p.m)]
                  + ["b", "residual_p", "residual_grad_max", "lambda", "entropy", "L", "iters"])
        rows, failed = [], False
        for pt in points:
            if isinstance(pt, SpectrumPoint):
                rows.append(list(pt.alpha) + list(pt.q) + [pt.b, pt.residual_p, float(np.max(np.abs(pt.residual_grad))),
                                                           pt.lyapunov, pt.entropy, pt.L, pt.newton_iterations])
            else:
                failed = True
                print(f"spectrum point {list(pt.alpha)} failed: {pt.message}", file=sys.stderr)
                rows.append(list(pt.alpha) + [math.nan] * (p.m + 5) + [pt.L, 0])
        return render(header, rows, cfg.format), EXIT_NUMERIC if failed else EXIT_OK
    if cfg.command == "distortion":
        lo, hi = (int(v) for v in cfg.l_range.split(":"))
        rows = []
        for i in range(p.m):
            for sign in (1, -1):
                fit = distortion_exponent(p, i, (lo, hi), sign=sign)
                rows.append([i + 1, sign, fit.slope, fit.intercept])
        return render(["cusp", "sign", "slope", "intercept"], rows, cfg.format), EXIT_OK
    if cfg.command == "oracle":
        alpha = _vector(cfg.alpha, p.m, "--alpha")
        qg = [pt[0] for pt in parse_grid(cfg.q_grid)]
        bg = [pt[0] for pt in parse_grid(cfg.b_grid)]
        o = brute_force_oracle(p, alpha, qg, bg, cfg.L, tail=cfg.tail)
        header = (["b_low", "b_high", "b_star"] + [f"q_{i + 1}" for i in range(p.m)] + ["min_low", "min_high"])
        return render(header, [[o.b_low, o.b_high, o.b_star] + list(o.q_star) + [o.min_low, o.min_high]],
                      cfg.format), EXIT_OK
    raise UsageError(f"unknown command {cfg.command!r}")


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = build_parser().parse_args(argv)
        cfg = RunConfig(ns.command, ns.config, ns.L, ns.tol, ns.newton_tol, ns.q, ns.b, ns.alpha, ns.alpha_grid,
                        ns.out, ns.format, ns.tail, ns.workers, ns.l_range, ns.q_grid, ns.b_grid)
        text, code = _run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfinitePressure as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PresentationError as exc:
        print(f"invalid presentation: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, SolverError, PressureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())
