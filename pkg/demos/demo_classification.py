"""Recurrence and transience of rotor-router walks on Galton-Watson trees.

The walk can only escape along lines of descent made of "good" children --
children the rotor serves before the parent.  Averaging the rotor rows by
the offspring law gives the law of the number of good children per vertex;
its mean against 1 decides everything.  With uniform rotors this reduces to
"mean offspring at most 2 means recurrent".
"""

from fractions import Fraction

import rotorwalk as rw

HALF = Fraction(1, 2)

laws = [
    ("binary, p2=1", rw.OffspringDistribution.delta(2)),
    ("ternary, p3=1", rw.OffspringDistribution.delta(3)),
    ("half line, p1=1", rw.OffspringDistribution.delta(1)),
    ("mixed, p1=p2=1/2", rw.OffspringDistribution.from_dict({1: HALF, 2: HALF})),
    ("mixed, p2=p4=1/2", rw.OffspringDistribution.from_dict({2: HALF, 4: HALF})),
]

print(f"{'offspring law':24s} {'m':>5s} {'E[good]':>8s}  verdict")
for name, xi in laws:
    q = rw.RotorMatrix.uniform(xi.kmax)
    law = rw.good_children_law(xi, q)
    verdict = rw.classify(xi, q)
    print(f"{name:24s} {float(xi.mean):5.2f} {float(law.mean):8.3f}  {verdict.value}")

print()
print("The m = 2 boundary is handled in exact rational arithmetic:")
xi = rw.OffspringDistribution.delta(2)
law = rw.good_children_law(xi, rw.RotorMatrix.uniform(2))
print(f"  E[good children] = {law.mean} (exactly one) -> "
      f"{rw.classify(xi, rw.RotorMatrix.uniform(2)).value}")

print()
print("Rotor rows other than uniform shift the threshold.  All-good rows")
print("(every child served before the parent) make even the binary tree")
print("transient:")
all_good = rw.RotorMatrix([[Fraction(0), Fraction(1)],
                           [Fraction(0), Fraction(0), Fraction(1)]])
print(f"  E[good] = {rw.good_children_law(xi, all_good).mean} -> "
      f"{rw.classify(xi, all_good).value}")
