# # Linear reasoning: feasible sets, values, resolvents, backjumps
#
# The linear part of a state is a set of clauses over linear atoms.  With a
# partial assignment, the clauses that mention only assigned variables and
# one more variable z restrict z to a union of intervals.

from fractions import Fraction

from deltaksmt.core import Assignment, LinearClause, linear_atom
from deltaksmt.linarith import backjump_prefix, feasible_set, pick_value, resolvent

F = Fraction


def clause(*atoms):
    return LinearClause(tuple(atoms))


# x >= 1,  x <= 3,  (x <= 0 or y >= 5)
L = [
    clause(linear_atom(-1, ">=", x=1)),
    clause(linear_atom(3, ">=", x=-1)),
    clause(linear_atom(0, "<=", x=1), linear_atom(-5, ">=", y=1)),
]

# %% The feasible set of x with nothing assigned, and the simplest value in it
s = feasible_set(L, Assignment(), "x")
print("feasible x:", s, " pick:", pick_value(s))

# %% Assign x = 1; then y is forced up by the disjunction
alpha = Assignment([("x", F(1))])
s = feasible_set(L, alpha, "y")
print("feasible y:", s, " pick:", pick_value(s))

# %% A conflict: add y <= 2 so that y has nowhere to go
L2 = L + [clause(linear_atom(2, ">=", y=-1))]
print("feasible y:", feasible_set(L2, alpha, "y"))

# The resolvent eliminates y and yields clauses over x alone that are False
# at x = 1.  Here that is x <= 0, which clashes with x >= 1.
R = resolvent(L2, alpha, "y")
for c in R:
    print("resolvent:", c, "->", c.evaluate(alpha).name)

# %% Backjumping keeps the longest prefix of the assignment under which no
# new clause is False.  The clause x <= 0 is already False with x assigned,
# so the whole assignment is dropped.
print("backjump prefix:", backjump_prefix(R, alpha).as_dict())
L3 = L2 + list(R)
print("feasible x afterwards:", feasible_set(L3, Assignment(), "x"))
