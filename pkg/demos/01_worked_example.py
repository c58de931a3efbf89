# # A complete unsat run
#
# The conjunct set below combines two nonlinear facts about the region
# between the hyperbola y = 1/x and two lines with two box-exclusion clauses
# that a previous run had learned.  Together with x >= 4/3 and x <= 220/223
# it is contradictory in its linear part alone, so the run is short.
#
#     python3 demos/01_worked_example.py            # short run, both modes
#     python3 demos/01_worked_example.py --core     # also the unlearned core (full box, ~20 s)

import sys
import time
from fractions import Fraction
from pathlib import Path

from deltaksmt.engine import solve
from deltaksmt.frontend import load
from deltaksmt.linearise import Strategy

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent

# %% Load and separate
script, sf = load((ROOT / "corpus" / "worked_example.smt2").read_text())
print(f"{len(script.assertions)} assertions over {script.variables}")
print(f"{len(sf.linear)} linear clauses, {len(sf.nonlinear)} nonlinear constraints")
for c in sf.nonlinear:
    print("  nonlinear:", c)

# %% Solve in both linearisation modes and print the trace
for mode in Strategy:
    r = solve(sf, Fraction(1, 100), mode)
    print(f"\n{mode.value}: {r.status.value} after {r.steps} steps")
    for ev in r.trace:
        print("  ", ev.to_json())

# %% The same problem without the learned clauses
#
# Here the solver has to find the exclusions itself.  Full-box mode needs a
# few thousand steps; local mode takes much longer because its radii are
# smaller (see demos/04_strategies.py).
if "--core" in sys.argv:
    _, core = load((HERE / "worked_example_core.smt2").read_text())
    t0 = time.perf_counter()
    r = solve(core, Fraction(1), Strategy.FULL_BOX)
    counts = r.rule_counts()
    print(f"\ncore, full-box: {r.status.value} after {r.steps} steps in {time.perf_counter() - t0:.1f}s")
    print("  rule counts:", dict(sorted(counts.items())))
