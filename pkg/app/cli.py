"""
Command line entry point.

    python -m app solve --example ex51 --alpha 1.5 --N 64 --M 64
    python -m app convergence --example ex51 --scheme h3n3-fast --alpha 1.5 --N 160,320,640
    python -m app coeffs check --kmax 2000
    python -m app soe check --gamma 0.5 --eps 1e-12 --delta 1e-4 --T 1
    python -m app operator scan --mu 5 --alpha 1.5 --N 64,128,256

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import get_settings
from .exceptions import ConfigValidationError, FracwaveError, NumericalFailure
from .services.caputo_ops import TEST_FUNCTIONS, PowerTestFunction, truncation_error_scan
from .services.experiments import (
    ExperimentConfig,
    load_config_file,
    parse_float_list,
    parse_int_list,
    run_convergence,
    run_example_51,
    run_example_52,
)
from .services.kernel_coeffs import check_coefficient_properties
from .services.pde_solver import SCHEMES, SpatialGrid, check_compatibility, solve
from .services.problems import resolve_problem
from .services.soe_fast import VERIFICATION_POINTS, build_soe, kernel_error

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

DEFAULT_N = {"ex51": [160, 320, 640, 1280], "ex52": [32, 64, 128, 256]}
DEFAULT_ALPHAS = {"ex51": [1.1, 1.5, 1.9], "ex52": [1.3, 1.5, 1.9]}
DEFAULT_SCHEME = {"ex51": "h3n3-fast", "ex52": "h3n3-graded-fast"}
DEFAULT_R = {"ex52": 2.0}
PROPERTY_ALPHAS = [round(1.05 + 0.05 * i, 2) for i in range(19)]


class UsageError(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so bad usage maps to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = UsageError(prog="fracwave", description="Fractional diffusion-wave solvers and convergence studies")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=UsageError)

    solve_cmd = commands.add_parser("solve", help="solve one problem and write per-level norms")
    solve_cmd.add_argument("--example", default="ex51", help="ex51, ex52 or a problem spec file")
    solve_cmd.add_argument("--alpha", type=float, default=1.5)
    solve_cmd.add_argument("--N", type=int, default=64)
    solve_cmd.add_argument("--M", type=int, default=64)
    solve_cmd.add_argument("--scheme", choices=SCHEMES, default="h3n3-direct")
    solve_cmd.add_argument("--r", type=float, default=1.0)
    solve_cmd.add_argument("--eps", type=float, default=None)
    solve_cmd.add_argument("--out", default=None)

    conv = commands.add_parser("convergence", help="run a convergence sweep")
    conv.add_argument("--config", default=None, help="key=value file; flags override it")
    conv.add_argument("--example", default=None)
    conv.add_argument("--scheme", choices=SCHEMES, default=None)
    conv.add_argument("--alpha", default=None, help="comma separated list")
    conv.add_argument("--N", default=None, help="comma separated list")
    conv.add_argument("--M", default=None, help="comma separated list")
    conv.add_argument("--r", type=float, default=None)
    conv.add_argument("--eps", type=float, default=None)
    conv.add_argument("--full", action="store_true", help="full profile: M=5000 and the largest N")
    conv.add_argument("--no-timing", action="store_true", help="leave the seconds column blank")
    conv.add_argument("--out", default=None)

    coeffs = commands.add_parser("coeffs", help="coefficient property checks")
    coeffs_actions = coeffs.add_subparsers(dest="action", required=True, parser_class=UsageError)
    coeffs_check = coeffs_actions.add_parser("check")
    coeffs_check.add_argument("--kmax", type=int, default=2000)
    coeffs_check.add_argument("--alpha", default=None, help="comma separated list")
    coeffs_check.add_argument("--tau", type=float, default=None, help="defaults to 1/kmax")

    soe = commands.add_parser("soe", help="sum-of-exponentials checks")
    soe_actions = soe.add_subparsers(dest="action", required=True, parser_class=UsageError)
    soe_check = soe_actions.add_parser("check")
    soe_check.add_argument("--gamma", type=float, required=True)
    soe_check.add_argument("--eps", type=float, default=1e-12)
    soe_check.add_argument("--delta", type=float, required=True)
    soe_check.add_argument("--T", type=float, default=1.0)

    operator = commands.add_parser("operator", help="discrete Caputo operator checks")
    operator_actions = operator.add_subparsers(dest="action", required=True, parser_class=UsageError)
    scan = operator_actions.add_parser("scan")
    scan.add_argument("--mu", type=float, default=5.0)
    scan.add_argument("--alpha", type=float, default=1.5)
    scan.add_argument("--N", default="64,128,256,512")
    scan.add_argument("--T", type=float, default=1.0)
    scan.add_argument("--sigma-shift", type=float, default=0.0)
    scan.add_argument("--out", default=None)
    return parser


def _example_key(example: str) -> str:
    return example if example in DEFAULT_N else "custom"


def _run_solve(args) -> int:
    problem = resolve_problem(args.example, args.alpha)
    grid = SpatialGrid(L=problem.L, M=args.M)
    report = check_compatibility(problem, grid)
    for message in report.warnings:
        print(f"warning: {message}", file=sys.stderr)

    result = solve(problem, grid, args.N, args.scheme, r=args.r, soe_epsilon=args.eps)
    errors = result.level_errors(problem.exact) if problem.exact is not None else None

    out = Path(args.out or Path(get_settings().output_dir) / f"solve_{problem.name}_{args.scheme}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "t", "l2", "h1", "inf", "error"])
        for k, t in enumerate(result.times):
            writer.writerow([
                k,
                f"{t:.12g}",
                f"{result.norms['l2'][k]:.6g}",
                f"{result.norms['h1'][k]:.6g}",
                f"{result.norms['inf'][k]:.6g}",
                "" if errors is None else f"{errors[k]:.6g}",
            ])

    phases = " ".join(f"{name}={seconds:.3f}s" for name, seconds in result.timings.items())
    summary = f"{args.scheme} alpha={args.alpha:g} N={args.N} M={args.M}"
    if errors is not None:
        summary += f" E={float(np.max(errors)):.6e}"
    if result.soe_count is not None:
        summary += f" N_exp={result.soe_count}"
    print(f"{summary} {phases}")
    print(f"wrote {out}")
    return EXIT_OK


def _run_convergence(args) -> int:
    settings = get_settings()
    values = load_config_file(args.config) if args.config else {}
    if args.example is not None:
        values["example"] = args.example
    example = values.setdefault("example", "ex51")
    key = _example_key(example)

    if args.scheme is not None:
        values["scheme"] = args.scheme
    values.setdefault("scheme", DEFAULT_SCHEME.get(key, "h3n3-fast"))
    if args.alpha is not None:
        values["alphas"] = parse_float_list(args.alpha)
    values.setdefault("alphas", DEFAULT_ALPHAS.get(key, [1.5]))
    if args.N is not None:
        values["n_list"] = parse_int_list(args.N)
    if "n_list" not in values:
        n_list = DEFAULT_N.get(key, [32, 64, 128, 256])
        values["n_list"] = n_list if args.full else [n for n in n_list if n <= settings.desk_max_n]
    if args.M is not None:
        values["m_list"] = parse_int_list(args.M)
    values.setdefault("m_list", [settings.full_m if args.full else settings.desk_m])
    if args.r is not None:
        values["r"] = args.r
    if "r" not in values and values["scheme"].startswith("h3n3-graded"):
        values["r"] = DEFAULT_R.get(key, 1.0)
    if args.eps is not None:
        values["soe_epsilon"] = args.eps
    values.setdefault("soe_epsilon", settings.soe_epsilon)
    if args.out is not None:
        values["output"] = args.out
    values.setdefault(
        "output", str(Path(settings.output_dir) / f"convergence_{Path(example).stem}_{values['scheme']}.csv")
    )
    values["record_timing"] = not args.no_timing

    config = ExperimentConfig.build(**values)
    if config.example == "ex51":
        report = run_example_51(config)
    elif config.example == "ex52":
        report = run_example_52(config)
    else:
        report = run_convergence(config)
    print(report.to_table())
    print(f"wrote {config.output}")
    return EXIT_OK


def _run_coeffs_check(args) -> int:
    alphas = parse_float_list(args.alpha) if args.alpha else PROPERTY_ALPHAS
    tau = args.tau if args.tau is not None else 1.0 / args.kmax
    report = check_coefficient_properties(args.kmax, alphas, tau)
    print(report.summary())
    for alpha, ratio in report.sum1_ratio.items():
        print(f"  alpha={alpha:g} squared-sum ratio {ratio:.4f}")
    for violation in report.violations[:20]:
        print(f"  {violation.family} k={violation.k} alpha={violation.alpha:g} margin={violation.margin:.3e}")
    return EXIT_OK if report.ok else EXIT_NUMERICAL


def _run_soe_check(args) -> int:
    soe = build_soe(args.gamma, args.eps, args.delta, args.T)
    # a grid offset from the one used during construction
    fresh = np.geomspace(args.delta, args.T, VERIFICATION_POINTS + 7)
    error = kernel_error(soe.nodes, soe.weights, args.gamma, fresh)
    print(f"N_exp={soe.count} max_error={error:.3e} eps={args.eps:g}")
    return EXIT_OK if error <= args.eps else EXIT_NUMERICAL


def _run_operator_scan(args) -> int:
    function = TEST_FUNCTIONS.get(args.mu, PowerTestFunction(args.mu))
    rows = truncation_error_scan(function, args.alpha, parse_int_list(args.N), T=args.T, sigma_shift=args.sigma_shift)
    out = Path(args.out or Path(get_settings().output_dir) / f"operator_scan_mu{args.mu:g}_alpha{args.alpha:g}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["N", "max_error", "order"])
        for row in rows:
            writer.writerow([row.N, f"{row.max_error:.6g}", "" if row.order is None else f"{row.order:.4f}"])
    for row in rows:
        print(f"N={row.N:6d}  error={row.max_error:.4e}  order={'*' if row.order is None else f'{row.order:.4f}'}")
    print(f"wrote {out}")
    return EXIT_OK


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args = build_parser().parse_args(argv)
        if args.command == "solve":
            return _run_solve(args)
        if args.command == "convergence":
            return _run_convergence(args)
        if args.command == "coeffs":
            return _run_coeffs_check(args)
        if args.command == "soe":
            return _run_soe_check(args)
        return _run_operator_scan(args)
    except NumericalFailure as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FracwaveError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(cli_dispatch())
