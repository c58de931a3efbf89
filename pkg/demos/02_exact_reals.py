# # Evaluating real functions to a requested precision
#
# A real number is given by a name: a function k -> rational within 2**-k
# of it.  The evaluator asks the name for better and better approximations
# until interval arithmetic pins the result down to 2**-p, and reports the
# largest index it asked for.

from fractions import Fraction

import mpmath

from deltaksmt.core import func, mul, sub, var
from deltaksmt.realeval import (
    Name,
    approx,
    cauchy_to_xi,
    constant_name,
    eval_machine,
    p_of_delta,
    uniform_modulus,
    xi_name_of,
)

x, y = var("x"), var("y")

# %% sin(1/3) to increasing precision
for p in (4, 10, 30, 60):
    r = eval_machine(func("sin", x), constant_name(Fraction(1, 3)), p)
    print(f"p={p:2d}  value={float(r.value.to_fraction()):.18f}  max query={r.max_query}")
print("mpmath          ", mpmath.sin(mpmath.mpf(1) / 3))

# %% A name that is not on the dyadic grid, and its xi-name
#
# phi_k = 1/3 + (-2)**-k converges to 1/3 from alternating sides.  The
# conversion rounds phi_{n+4} to the grid of spacing 2**-(n+1).
phi = Name(lambda k: Fraction(1, 3) + Fraction(-1, 2) ** k)
psi = cauchy_to_xi(phi)
print("\n n  phi_n                psi_n      approx(1/3, n)")
for n in range(8):
    print(f"{n:2d}  {str(phi(n)):20} {str(psi(n)):10} {approx(Fraction(1, 3), n)}")
print("xi-name of 1/3:", [str(xi_name_of(Fraction(1, 3))(k)) for k in range(6)])

# %% Uniform moduli of continuity
#
# mu(k) says how close two arguments must be for the values to be 2**-k
# apart.  It is k shifted by log2 of a Lipschitz bound over the box.
box = {"x": (Fraction(-2), Fraction(2)), "y": (Fraction(-2), Fraction(2))}
for name, t in [("sin x", func("sin", x)), ("x*y", mul(x, y)), ("exp x - y", sub(func("exp", x), y))]:
    vs = {v: box[v] for v in t.variables()}
    mu = uniform_modulus(t, vs)
    print(f"{name:10} L <= {float(mu.lipschitz):8.3f}   mu(10) = {mu(10)}")

# %% Precision needed for a given weakening
for delta in (Fraction(1), Fraction(1, 10), Fraction(1, 1000)):
    print(f"delta={delta}: p={p_of_delta(delta)}")
