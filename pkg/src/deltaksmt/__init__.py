"""A δ-complete decision procedure for bounded nonlinear real constraints.

Typical use::

    from deltaksmt import check
    result = check(open("problem.smt2").read(), delta="1/100")
    print(result.status, result.model)
"""

from fractions import Fraction

from .core import Assignment, LinearAtom, LinearClause, NonlinConstraint, SolverState, Status, Truth
from .engine import Limits, SolveResult, replay, solve
from .frontend import ParseError, bounds_analysis, delta_weaken, load, parse
from .linearise import Strategy

__version__ = "0.1.0"


def check(text, delta="1/1000", strategy="local", limits=None) -> SolveResult:
    """Parse an SMT-LIB script and decide it up to ``delta``."""
    _, sf = load(text)
    return solve(sf, Fraction(delta), Strategy(strategy), limits)


__all__ = [
    "Assignment",
    "LinearAtom",
    "LinearClause",
    "Limits",
    "NonlinConstraint",
    "ParseError",
    "SolveResult",
    "SolverState",
    "Status",
    "Strategy",
    "Truth",
    "bounds_analysis",
    "check",
    "delta_weaken",
    "load",
    "parse",
    "replay",
    "solve",
]
