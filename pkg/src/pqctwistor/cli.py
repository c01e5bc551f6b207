"""``verify`` command: run a check suite and print or save its report."""

from __future__ import annotations

import argparse
import configparser
import sys
from typing import Optional, Sequence

from .report import VerificationReport
from .suites import DEFAULT_F, SUITES, SuiteConfig, run_suite, workers_from_env

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def emit_report(report: VerificationReport, fmt: str = "text", timings: bool = False) -> bytes:
    """Serialize ``report`` as ``text`` (one line per check) or ``structured`` (JSON)."""
    if fmt == "text":
        return report.to_text().encode()
    if fmt == "structured":
        return report.to_json(timings=timings).encode()
    raise ValueError(f"unknown report format {fmt!r}")


def read_config(path: str) -> dict:
    """INI file with an optional ``[structure]`` section and a ``[tolerances]`` section.

    ``[structure]`` accepts ``n``, ``samples``, ``seed``, ``f``, ``tol`` and
    ``mutate_J``; ``[tolerances]`` maps check ids to thresholds.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str  # check ids are case sensitive
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    out: dict = {}
    if cp.has_section("structure"):
        sec = cp["structure"]
        try:
            for key in ("n", "samples", "seed"):
                if key in sec:
                    out[key] = sec.getint(key)
            if "tol" in sec:
                out["tol"] = sec.getfloat("tol")
            if "f" in sec:
                out["f"] = sec["f"]
            if "mutate_J" in sec:
                out["mutate_J"] = sec.getboolean("mutate_J")
        except ValueError as exc:
            raise UsageError(f"bad value in [structure]: {exc}") from None
    if cp.has_section("tolerances"):
        try:
            out["tolerances"] = tuple(sorted((k, float(v)) for k, v in cp["tolerances"].items()))
        except ValueError as exc:
            raise UsageError(f"bad value in [tolerances]: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description="Run numerical verification suites.")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--n", type=int, default=None, help="quaternionic dimension (default 1)")
    p.add_argument("--samples", type=int, default=None, help="nominal sample count (default 100)")
    p.add_argument("--tol", type=float, default=None, help="override every upper-bound threshold")
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (default 0)")
    p.add_argument("--f", default=None, metavar="SPEC",
                   help=f"conformal factor, const:<c> or poly:<c0>,<c1>,...[;a:b:c] (default {DEFAULT_F})")
    p.add_argument("--mutate-J", action="store_true", default=None,
                   help="use a deliberately wrong J in the integrability checks")
    p.add_argument("--json", metavar="PATH", help="also write the structured report here")
    p.add_argument("--config", metavar="INI", help="read defaults from an INI file")
    p.add_argument("--format", choices=("text", "structured"), default="text", help="stdout format")
    p.add_argument("--timings", action="store_true", help="record wall times (breaks byte reproducibility)")
    return p


def config_from_args(args: argparse.Namespace) -> SuiteConfig:
    values = read_config(args.config) if args.config else {}
    for key in ("n", "samples", "seed", "tol", "f", "mutate_J"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    try:
        return SuiteConfig(suite=args.suite, **values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        cfg = config_from_args(args)
        workers = workers_from_env()
    except (UsageError, ValueError) as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_suite(cfg, workers)
    if not args.timings:
        report = report.without_timings()
    sys.stdout.buffer.write(emit_report(report, args.format, args.timings))
    sys.stdout.flush()
    if args.json:
        with open(args.json, "wb") as fh:
            fh.write(emit_report(report, "structured", args.timings))
    return EXIT_PASS if report.overall_pass else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
