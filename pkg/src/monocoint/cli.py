"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 empty window,
4 an experiment finished but failed its acceptance band.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import chains, estimator, experiments

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EMPTY_WINDOW = 3
EXIT_ACCEPTANCE = 4


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _parse_params(text: str | None) -> dict:
    if not text:
        return {}
    params = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise _CliError(f"bad --params entry {item!r}; expected key=value")
        params[key.strip()] = value.strip()
    return params


def _load_sample(path: str) -> estimator.TimeSeriesSample:
    try:
        return estimator.read_sample_csv(path)
    except (OSError, ValueError, StopIteration) as exc:
        raise _CliError(f"cannot read data {path}: {exc}") from None


def _fit(args) -> estimator.LocalizedFit:
    sample = _load_sample(args.data)
    try:
        window = chains.Window(args.x0, args.delta)
    except ValueError as exc:
        raise _CliError(str(exc)) from None
    try:
        return estimator.fit_localized(sample, window)
    except estimator.EmptyWindowError:
        raise _CliError("no observations in window", EXIT_EMPTY_WINDOW) from None


def cmd_simulate(args) -> int:
    try:
        spec = experiments.chain_from_params(args.chain, _parse_params(args.params))
    except ValueError as exc:
        raise _CliError(str(exc)) from None
    if args.n < 0 or args.seed < 0:
        raise _CliError("--n and --seed must be non-negative")
    chains.write_path_csv(chains.simulate(spec, args.n, args.seed), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    fit = _fit(args)
    if args.query is not None:
        try:
            value = fit.estimate(args.query)
        except estimator.QueryOutsideWindowError:
            raise _CliError("query outside window") from None
    if args.out:
        estimator.write_fit_csv(fit, args.out)
    if args.ecdf_out:
        estimator.write_ecdf_csv(fit.ecdf, args.ecdf_out)
    if args.query is not None:
        print(repr(value))
    return EXIT_OK


def cmd_invert(args) -> int:
    fit = _fit(args)
    result = fit.inverse(args.level)
    print(f"{result.value!r} {result.status.value}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise _CliError(f"cannot read config {args.config}: {exc}") from None
    try:
        parsed = experiments.parse_config_text(text)
    except ValueError as exc:
        raise _CliError(f"invalid config {args.config}: {exc}") from None
    workers = args.workers if args.workers is not None else parsed["workers"]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = parsed["format"]
    all_pass = True
    for name in parsed["experiments"]:
        report = experiments.RUNNERS[name](parsed["config"], workers=workers)
        dest = out_dir / f"{parsed['out']}_{name}.{fmt}"
        experiments.write_report(report, dest, fmt)
        status = "PASS" if report.passed else "FAIL"
        print(f"{name}: {status} -> {dest}")
        all_pass &= report.passed
    return EXIT_OK if all_pass else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monocoint",
        description="Localized monotone LSE for nonlinear cointegration with "
                    "Harris recurrent regressors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a chain path to CSV")
    p.add_argument("--chain", required=True, help="rw, ar1 or lazy")
    p.add_argument("--params", help="comma list, e.g. 'rho=0.5,sd=1'")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    def window_args(p):
        p.add_argument("--data", required=True, help="CSV with header x,z")
        p.add_argument("--x0", type=float, required=True)
        p.add_argument("--delta", type=float, required=True)

    p = sub.add_parser("fit", help="fit the localized monotone LSE")
    window_args(p)
    p.add_argument("--query", type=float, help="print the fit at this point")
    p.add_argument("--out", help="write the fit as CSV knot,value")
    p.add_argument("--ecdf-out", help="write the localized ECDF as CSV knot,height")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("invert", help="generalized inverse of the fit at a level")
    window_args(p)
    p.add_argument("--level", type=float, required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("experiment", help="run Monte Carlo experiments from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, help="override the config's worker count")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"monocoint {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
