"""Escape fraction of chained rotor walks vs the random-walk escape
probability.

On a transient tree, the fraction of rotor particles that escape converges
to the probability that a simple random walk never returns to the sink --
and it does so with fluctuations of order 1/n rather than 1/sqrt(n).  The
truncated runs below land within a few particles of n * gamma.
"""

import numpy as np

import rotorwalk as rw

xi = rw.OffspringDistribution.delta(3)
q = rw.RotorMatrix.uniform(3)

print("3-regular tree, uniform rotors: gamma = 2/3 exactly.")
print(f"{'seed':>4s} {'H':>3s} {'escapes':>8s} {'ratio':>9s} {'doubling history'}")
ratios = []
for seed in range(5):
    arena = rw.make_arena(xi, q, seed)
    result = rw.adaptive_escape_count(arena, 50_000)
    ratios.append(result.stats.ratio)
    hist = " -> ".join(f"E({h})={e}" for h, e in result.history)
    print(f"{seed:4d} {result.H:3d} {result.stats.escapes:8d} "
          f"{result.stats.ratio:9.5f} {hist}")
print(f"mean ratio {np.mean(ratios):.5f} vs gamma {2 / 3:.5f}")

print()
print("The escape fraction is pinned by the hitting probability of the same")
print("truncation (rotor particles shadow the harmonic measure):")
arena = rw.make_arena(xi, q, seed=0)
result = rw.adaptive_escape_count(arena, 50_000)
_, boundary = arena.truncate_view(10)
sol = rw.solve_hitting(arena, boundary)
print(f"  ratio = {result.stats.ratio:.5f}   1 - h(root) = {1 - sol.root_value:.5f}")

print()
print("Recurrent laws tell a different story: the truncated count follows")
print("the random-walk measure of the cut, not the (zero) infinite-tree")
print("escape count, so it stays near n * (1 - h):")
xi2 = rw.OffspringDistribution.delta(2)
arena2 = rw.make_arena(xi2, rw.RotorMatrix.uniform(2), seed=0)
stats = rw.escape_count(arena2, 10_000, 64)
print(f"  binary boundary law at H=64: {stats.escapes} escapes of {stats.n} "
      f"(1 - h = {rw.gamma_regular(2, 64, 1.0):.4f})")
