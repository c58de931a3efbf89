# # Full-box versus local linearisation
#
# When a nonlinear constraint fails at the current point, the solver adds a
# clause that excludes a box around it.  Full-box mode derives the radius
# from a modulus of continuity valid on the whole domain.  Local mode reads
# it off the evaluation itself: the finest approximation of the point that
# the evaluator requested.

import statistics
from fractions import Fraction
from pathlib import Path

from deltaksmt.core import Assignment, NonlinConstraint, const, func, mul, sub, var
from deltaksmt.engine import Limits, solve
from deltaksmt.frontend import load
from deltaksmt.linearise import Strategy, linearise_fullbox, linearise_local
from deltaksmt.realeval import uniform_modulus

F = Fraction
x = var("x")
ROOT = Path(__file__).resolve().parent.parent

# %% One constraint, one point, several shapes of function
#
# f(x) - c >= 0 at x = 1/2 with c chosen so it fails by about 1/2.
delta = F(1, 16)
box = {"x": (F(-4), F(4))}
for label, f in [("5", const(5)), ("sin x", func("sin", x)), ("10 sin x", mul(const(10), func("sin", x))), ("exp x", func("exp", x))]:
    P = NonlinConstraint(sub(f, const(F(6))), ">=", variables=("x",))
    alpha = Assignment([("x", F(1, 2))])
    mu = uniform_modulus(P.term, box)
    full = linearise_fullbox(P, alpha, delta, mu)
    local = linearise_local(P, alpha, delta, mu)
    print(f"{label:9}  full-box eps = {str(full.eps):8}  local eps = {str(local.eps):8}  (local queries up to {local.max_query})")

# Local evaluation runs two bits beyond the target precision, so for
# functions with a small Lipschitz constant its radius comes out smaller
# than the global one.  Constants need no queries at all and get radius 1
# either way.  For steep functions over wide boxes the global bound is the
# pessimistic one.

# %% Linearisation counts across the bundled instances
print(f"\n{'instance':24} {'mode':9} {'answer':10} {'#L':>5} {'median eps':>11}")
for name in ["circle_delta", "constant_unsat", "disj_sin", "exp_unsat", "log_unsat", "sqrt2_delta", "reciprocal_unsat", "sin_exp_2d", "tanh_like"]:
    path = ROOT / "corpus" / f"{name}.smt2"
    _, sf = load(path.read_text())
    delta = next(F(l.split(":", 1)[1]) for l in path.read_text().splitlines() if l.startswith("; delta:"))
    for mode in Strategy:
        r = solve(sf, delta, mode, Limits(max_steps=50_000))
        eps = [F(ev["eps"]) for ev in r.linearisations()]
        med = f"{float(statistics.median(eps)):.2e}" if eps else "-"
        print(f"{path.stem:24} {mode.value:9} {r.status.value:10} {len(eps):5d} {med:>11}")
