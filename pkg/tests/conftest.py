"""Shared fixtures and reference implementations used as oracles.

The reference walker below re-implements rotor dynamics with plain dicts and
no shared code with the compiled kernels, so kernel results can be checked
against an independent route.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

import rotorwalk as rw


@pytest.fixture
def delta2():
    return rw.OffspringDistribution.delta(2)


@pytest.fixture
def delta3():
    return rw.OffspringDistribution.delta(3)


@pytest.fixture
def mixed12():
    return rw.OffspringDistribution.from_dict({1: Fraction(1, 2), 2: Fraction(1, 2)})


class RefWalker:
    """Dict-based rotor walk over a frozen finite tree snapshot.

    Reads parent/children/depth/rotor once from the arena and then evolves
    its own copies; shares no stepping code with the package.
    """

    def __init__(self, arena: rw.TreeArena):
        self.parent = {}
        self.children = {}
        self.depth = {}
        self.rotor = {}
        for i in range(arena.size):
            node = arena.node(i)
            self.parent[i] = node.parent
            self.depth[i] = node.depth
            if node.children is not None:
                self.children[i] = list(node.children)
            if node.rotor is not None:
                self.rotor[i] = node.rotor

    def step(self, pos: int) -> int:
        d = len(self.children[pos])
        r = self.rotor[pos] + 1
        if r > d:
            r = 0
        self.rotor[pos] = r
        return self.parent[pos] if r == 0 else self.children[pos][r - 1]

    def walk(self, H: int) -> str:
        pos = 0
        while True:
            pos = self.step(pos)
            if pos == rw.SINK:
                return "returned"
            if self.depth[pos] >= H:
                return "reached_boundary"

    def chained_escapes(self, n: int, H: int) -> list[int]:
        return [1 if self.walk(H) == "reached_boundary" else 0 for _ in range(n)]


def fully_realized_arena(xi, q, seed: int, depth: int) -> rw.TreeArena:
    """Arena expanded to ``depth`` with every interior rotor realised."""
    arena = rw.make_arena(xi, q, seed)
    arena.truncate_view(depth)
    for i in range(arena.size):
        if arena._child_count[i] >= 0:
            arena.ensure_rotor(i)
    return arena
