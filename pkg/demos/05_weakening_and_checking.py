# # From SMT-LIB text to a checked answer
#
# The frontend splits a script into linear clauses and atomic nonlinear
# constraints.  A nonlinear atom that sits under a disjunction is replaced
# by a fresh variable t!i with t!i = term as a top-level constraint.

import subprocess
import sys
from fractions import Fraction
from pathlib import Path

from deltaksmt.engine import solve
from deltaksmt.frontend import bounds_analysis, delta_weaken, load
from deltaksmt.oracle import agreement, bp_decide, certify_delta_model, certify_model

F = Fraction
ROOT = Path(__file__).resolve().parent.parent

SRC = """
(declare-const x Real)
(assert (<= -4 x 4))
(assert (or (> (sin x) (/ 9 10)) (< x -3)))
(assert (>= x 0))
"""

# %% Separation
script, sf = load(SRC)
print("variables:", sf.variables)
for c in sf.linear:
    print("  linear:   ", c)
for c in sf.nonlinear:
    print("  nonlinear:", c)
for fv in sf.fresh_vars:
    print(f"  {fv.name} stands for {fv.term}")
print("bounded:", bounds_analysis(sf).bounded)

# %% Weakening moves every nonlinear constraint by delta
for c in delta_weaken(sf, F(1, 4)).nonlinear:
    print("  weakened:", c)

# %% Solve and certify the model independently
r = solve(sf, F(1, 4))
print("\nanswer:", r.status.value, {v: str(q) for v, q in r.model.items() if v in script.variables})
print("satisfies the weakening:", certify_delta_model(sf, F(1, 4), r.model))
# sin(1) is about 0.84: short of 9/10, but within the weakening
print("satisfies the original: ", certify_model(sf, r.model))

# %% Compare with branch and prune
ref = bp_decide(sf, F(1, 4))
print("branch and prune:", ref.status, "after", ref.nodes, "boxes")
print("agreement:", agreement(sf, F(1, 4), "delta-sat", r.model, ref, script))

# %% Disequalities weaken to True
#
# x = 1 and x*x != 1 is unsat, but its weakening drops the disequality, so
# delta-sat would also be a correct answer.
script, sf = load((ROOT / "corpus" / "distinct_weakened.smt2").read_text())
print("\ndistinct:", solve(sf, F(1, 16)).status.value, "| weakened constraints:", len(delta_weaken(sf, F(1, 16)).nonlinear))

# %% The same through the command line
out = subprocess.run(
    [sys.executable, "-m", "deltaksmt.cli", "--delta", "1/4", "--check-oracle", str(ROOT / "corpus" / "disj_sin.smt2")],
    capture_output=True,
    text=True,
)
print("\n$ deltaksmt --delta 1/4 --check-oracle corpus/disj_sin.smt2")
print(out.stdout + out.stderr, end="")
print("exit code", out.returncode)
