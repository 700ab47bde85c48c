"""Command-line front end.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or invalid
configuration, 3 computation error.
"""
from __future__ import annotations

import argparse
import contextlib
import sys

import numpy as np

from . import kernels as kr
from .config import EXAMPLES, ConfigError, RunConfig, default_threads, parse_grid, parse_params, \
    parse_tolerances, read_param_file
from .errors import DomainError, InputError, ParameterError, QThetaError, UnsupportedSurfaceError
from .reports import write_reports

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2, 3

# errors that mean the request itself was invalid
_USAGE_ERRORS = (ConfigError, ParameterError, DomainError, UnsupportedSurfaceError, InputError)

WHAT_COLUMNS = {
    "kernel": ("t", "s", "u", "v", "re_K", "im_K"),
    "kahler": ("t", "s", "u", "v", "kahler_density"),
    "measure": ("t", "s", "u", "v", "measure_density"),
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--example", required=True, choices=EXAMPLES)
    p.add_argument("--params", default="", help="k=v,... (phi, kappa1, psi, a0, a, hbar, tau, alpha, N, M); "
                                                 "values may use pi, e.g. phi=pi/2")
    p.add_argument("--config", default=None, help="file with one key=value per line; --params overrides it")
    p.add_argument("--M", type=int, default=None, help="cylinder truncation (same as params M)")
    p.add_argument("--grid", default=None, help="nu,nv,umin,umax")
    p.add_argument("--tol", default="", help="check=value,... overriding default tolerances")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $QTHETA_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtheta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the verification suite of an example")
    _add_common(v)
    v.add_argument("--format", choices=("report", "csv"), default="report")
    g = sub.add_parser("grid", help="emit kernel, Kähler or measure densities on a grid as CSV")
    _add_common(g)
    g.add_argument("--what", choices=tuple(WHAT_COLUMNS), default="kernel")
    g.add_argument("--format", choices=("csv",), default="csv")
    a = sub.add_parser("acceptance", help="run the acceptance criteria")
    a.add_argument("--only", default="", help="comma-separated criterion numbers (default all)")
    a.add_argument("--out", default=None)
    return parser


def config_from_args(args) -> RunConfig:
    params = read_param_file(args.config) if args.config else {}
    params.update(parse_params(args.params))
    if args.M is not None:
        params["M"] = args.M
    threads = args.threads if args.threads is not None else default_threads()
    return RunConfig(example=args.example, params=params,
                     grid=parse_grid(args.grid) if args.grid else None,
                     tolerances=parse_tolerances(args.tol), out=args.out,
                     format=args.format, threads=threads)


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def cmd_verify(cfg: RunConfig) -> int:
    from .suites import run_suite
    reports = run_suite(cfg)
    with _output(cfg.out) as out:
        if cfg.format == "report":
            write_reports(reports, out)
        else:
            out.write("check_name,residual,tolerance,pass\n")
            for r in reports:
                out.write(f"{r.check_name},{r.residual:.17g},{r.tolerance:.17g},{str(bool(r.passed)).lower()}\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_grid(cfg: RunConfig, what: str) -> int:
    from .suites import build_example
    ex = build_example(cfg)
    ctx = ex.ctx
    grid = cfg.grid
    if grid is None:
        if ex.is_torus:
            grid = kr.GridSpec(0.0, ctx.eps * ex.rep.N, kr.MIN_GRID, kr.MIN_GRID)
        else:
            grid = kr.GridSpec(-4 * ctx.eps, 4 * ctx.eps, kr.MIN_GRID, kr.MIN_GRID)
    columns = WHAT_COLUMNS[what]
    rows = kr.grid_table_uv(ctx, grid, columns)
    if not np.all(np.isfinite(rows)):
        raise ArithmeticError("non-finite values in grid output")
    with _output(cfg.out) as out:
        kr.write_csv(rows, out, columns)
    return EXIT_OK


def cmd_acceptance(only: str, out_path) -> int:
    from .acceptance import CRITERIA, run_all
    try:
        numbers = [int(x) for x in only.split(",") if x.strip()] if only else None
    except ValueError:
        raise ConfigError(f"--only expects criterion numbers, got {only!r}") from None
    if numbers and any(n not in CRITERIA for n in numbers):
        raise ConfigError(f"criteria are numbered 1..{len(CRITERIA)}")
    results = run_all(numbers)
    with _output(out_path) as out:
        for r in results:
            out.write(r.line() + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "acceptance":
            return cmd_acceptance(args.only, args.out)
        cfg = config_from_args(args)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_grid(cfg, args.what)
    except _USAGE_ERRORS as exc:
        print(f"qtheta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qtheta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QThetaError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qtheta: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except Exception as exc:  # anything else is still a failed computation, not a failed check
        print(f"qtheta: computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
