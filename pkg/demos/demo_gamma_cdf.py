"""The law of the escape probability over random trees, by fixed point.

gamma(T) satisfies gamma = 1 - 1/(1 + sum of the branch gammas), so its law
solves a distributional equation.  Iterating the induced operator on CDFs
(convolve, reparametrise by t/(1-t), mix by the offspring law) converges to
that law from any valid starting CDF.
"""

from fractions import Fraction

import rotorwalk as rw

HALF = Fraction(1, 2)

print("Deterministic branching pins the law to a point mass:")
for d in (1, 2, 3):
    xi = rw.OffspringDistribution.delta(d)
    result = rw.cdf_fixed_point(xi, grid=4096, tol=1e-6, max_iter=200)
    print(f"  d={d}: median {result.cdf.quantile(0.5):.6f} "
          f"(fixed point {(d - 1) / d:.6f}), {result.iterations} iterations, "
          f"converged={result.converged}")

print()
print("A genuinely random law spreads the mass out:")
xi = rw.OffspringDistribution.from_dict({1: HALF, 3: HALF})
result = rw.cdf_fixed_point(xi, grid=4096, tol=1e-6, max_iter=200)
cdf = result.cdf
print(f"  p1=p3=1/2: mean {cdf.mean():.4f}, quartiles "
      f"{cdf.quantile(0.25):.4f} / {cdf.quantile(0.5):.4f} / "
      f"{cdf.quantile(0.75):.4f}")

print()
print("Cross-check against sampled trees (truncated hitting probabilities):")
import numpy as np

q = rw.RotorMatrix.uniform(3)
vals = []
for seed in range(1000):
    arena = rw.make_arena(xi, q, seed)
    _, boundary = arena.truncate_view(14)
    vals.append(1 - rw.solve_hitting(arena, boundary).root_value)
se = np.std(vals) / np.sqrt(len(vals))
print(f"  Monte Carlo mean over 1000 trees: {np.mean(vals):.4f} (+- {se:.4f}) "
      f"vs fixed-point mean {cdf.mean():.4f}")

print()
print("The operator is monotone: ordered inputs stay ordered, which is what")
print("squeezes every valid start onto the same limit.")
lo = rw.DiscretizedCDF.point_mass(0.9, 512)   # stochastically larger
hi = rw.DiscretizedCDF.point_mass(0.1, 512)   # stochastically smaller
img_lo = rw.apply_cdf_operator(lo, xi)
img_hi = rw.apply_cdf_operator(hi, xi)
print(f"  K preserves the order: {bool((img_lo.values <= img_hi.values + 1e-12).all())}")
