"""Command-line interface: ``deltaksmt [flags] FILE``."""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, TextIO

from .core import Status, format_rational
from .engine import Limits, solve
from .frontend import ParseError, bounds_analysis, load
from .linearise import Strategy

EXIT_DECIDED = 0
EXIT_UNDECIDED = 1
EXIT_INPUT_ERROR = 2

_ANSWER = {
    Status.SAT: "sat",
    Status.DELTA_SAT: "delta-sat",
    Status.UNSAT: "unsat",
    Status.UNKNOWN: "unknown",
    Status.RESOURCE_OUT: "unknown",
}


@dataclass(frozen=True)
class CliConfig:
    path: str
    delta: Fraction = Fraction(1, 1000)
    mode: Strategy = Strategy.LOCAL
    max_steps: int = 10**6
    trace: Optional[str] = None
    check_oracle: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")


_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/-][0-9A-Za-z~!@$%^&*_+=<>.?/-]*$")


def _symbol(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else f"|{name}|"


def _rational(text: str) -> Fraction:
    try:
        q = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if q <= 0:
        raise argparse.ArgumentTypeError("delta must be positive")
    return q


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="deltaksmt",
        description="Decide a bounded nonlinear real SMT-LIB problem up to delta.",
    )
    p.add_argument("file", help="input script (SMT-LIB subset)")
    p.add_argument("--delta", type=_rational, default=Fraction(1, 1000), help="weakening bound, e.g. 1/100 (default 1/1000)")
    p.add_argument("--mode", choices=[s.value for s in Strategy], default=Strategy.LOCAL.value, help="linearisation radius (default local)")
    p.add_argument("--max-steps", type=_positive, default=10**6, help="rule applications before giving up (default 10^6)")
    p.add_argument("--trace", metavar="PATH", help="write one JSON object per rule application")
    p.add_argument("--check-oracle", action="store_true", help="compare the answer with a branch-and-prune reference decider")
    return p


def parse_args(argv: Optional[Sequence[str]] = None) -> CliConfig:
    ns = build_parser().parse_args(argv)
    return CliConfig(ns.file, ns.delta, Strategy(ns.mode), ns.max_steps, ns.trace, ns.check_oracle)


def run(config: CliConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    try:
        with open(config.path, "rb") as fh:
            text = fh.read()
        script, sf = load(text)
    except OSError as exc:
        print(f"error: cannot read {config.path}: {exc.strerror or exc}", file=err)
        return EXIT_INPUT_ERROR
    except (ParseError, UnicodeDecodeError) as exc:
        print(f"error: {config.path}:{exc}", file=err)
        return EXIT_INPUT_ERROR

    report = bounds_analysis(sf)
    if not report.bounded:
        print(f"warning: no finite bounds for {', '.join(report.unbounded)}; termination is not guaranteed", file=err)

    trace_fh = None
    if config.trace:
        try:
            trace_fh = open(config.trace, "w", encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot write {config.trace}: {exc.strerror or exc}", file=err)
            return EXIT_INPUT_ERROR
    try:
        on_event = (lambda ev: trace_fh.write(ev.to_json() + "\n")) if trace_fh else None
        result = solve(sf, config.delta, config.mode, Limits(max_steps=config.max_steps), on_event)
    finally:
        if trace_fh:
            trace_fh.close()

    answer = _ANSWER[result.status]
    print(answer, file=out)
    if result.model is not None:
        for v in script.variables:
            print(f"(define-fun {_symbol(v)} () Real {format_rational(result.model[v])})", file=out)
    if result.note:
        print(f"note: {result.note}", file=err)

    code = EXIT_DECIDED if answer in ("sat", "delta-sat", "unsat") else EXIT_UNDECIDED
    if config.check_oracle:
        from .oracle import agreement, bp_decide

        ref = bp_decide(sf, config.delta)
        ok, why = agreement(sf, config.delta, answer, result.model, ref, script)
        print(f"oracle: {ref.status} ({'agree' if ok else 'DISAGREE'}: {why})", file=err)
        if not ok:
            code = EXIT_UNDECIDED
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT_ERROR if exc.code else 0
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
