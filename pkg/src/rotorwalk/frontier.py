"""The frontier process: particle-by-particle growth of a parked set.

Each injection drops one particle at the root.  A particle parks on the
first never-visited vertex it reaches, falls into the sink, or collides with
a parked particle, in which case the parked vertex is released and both
particles walk on (collision cascades are driven by an explicit stack; the
final state is order-independent by the Abelian property).  Completing the
parked set with the untouched vertices at the realised height yields a sink
set whose enclosed root component is finite.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .gw_tree import ROOT, TreeArena, UsageError, ValidationError

_STEP_BUDGET = 10**12


class FrontierState:
    """Mutable record of one frontier run on one arena.

    ``members`` each hold exactly one parked particle; ``sink_count``
    particles fell into the sink; together they account for every injection.
    ``realized_height`` is the deepest parking depth seen over the whole
    history (a lower bound for the worst case over all configurations, and
    the level used to complete the sink).
    """

    def __init__(self, arena: TreeArena):
        self.arena = arena
        self._in_frontier = np.zeros(arena.capacity, dtype=np.uint8)
        self._stack = np.zeros(256, dtype=np.int64)
        # [n_done, sink_count, member_count, realized_height,
        #  stack_size, steps, pos]
        self._state = np.array([0, 0, 0, 0, 0, 0, -2], dtype=np.int64)

    @property
    def n(self) -> int:
        return int(self._state[0])

    @property
    def sink_count(self) -> int:
        return int(self._state[1])

    @property
    def frontier_size(self) -> int:
        return int(self._state[2])

    @property
    def realized_height(self) -> int:
        return int(self._state[3])

    @property
    def steps(self) -> int:
        return int(self._state[5])

    @property
    def members(self) -> np.ndarray:
        """Sorted ids of the currently parked vertices."""
        return np.flatnonzero(self._in_frontier[:self.arena.size]).astype(np.int64)

    def is_member(self, i: int) -> bool:
        return bool(self._in_frontier[i])

    def _sync_capacity(self) -> None:
        cap = self.arena.capacity
        if self._in_frontier.shape[0] < cap:
            fresh = np.zeros(cap, dtype=np.uint8)
            fresh[:self._in_frontier.shape[0]] = self._in_frontier
            self._in_frontier = fresh

    def check_conservation(self) -> None:
        if self.frontier_size + self.sink_count != self.n:
            raise UsageError(
                f"particle conservation broken: {self.frontier_size} parked "
                f"+ {self.sink_count} sunk != {self.n} injected")


def new_frontier_state(arena: TreeArena) -> FrontierState:
    return FrontierState(arena)


def _drive(state: FrontierState, target_n: int) -> FrontierState:
    arena = state.arena
    while True:
        state._sync_capacity()
        meta = arena._kernel_meta()
        ev = K.frontier_kernel(
            arena._parent, arena._depth, arena._first_child, arena._child_count,
            arena._rotor, arena._rotor0, arena._visited, arena._rotor_u,
            arena._cum, arena._qcum_table(), arena._off_pool, arena._rot_pool,
            meta, state._in_frontier, state._stack, state._state,
            target_n, _STEP_BUDGET)
        arena._absorb_meta(meta)
        if ev == K.EV_DONE:
            state.check_conservation()
            return state
        if ev == K.EV_NEED_OFF_POOL:
            arena._refill_off()
        elif ev == K.EV_NEED_ROT_POOL:
            arena._refill_rot()
        elif ev == K.EV_NEED_GROW:
            arena._grow(arena.size + max(64, arena.dist.kmax))
        elif ev == K.EV_STACK_FULL:
            bigger = np.zeros(2 * state._stack.shape[0], dtype=np.int64)
            bigger[:state._stack.shape[0]] = state._stack
            state._stack = bigger
        else:
            raise UsageError("frontier cascade exceeded its step budget; "
                             "this indicates a bug")


def frontier_step(arena: TreeArena, state: FrontierState) -> FrontierState:
    """Inject one particle and drive its cascade to quiescence."""
    if state.arena is not arena:
        raise UsageError("state belongs to a different arena")
    return _drive(state, state.n + 1)


def build_frontier(arena: TreeArena, n: int) -> FrontierState:
    """Run ``n`` injections from the empty state."""
    if n < 1:
        raise ValidationError("need at least one injection")
    return _drive(FrontierState(arena), n)


def extend_frontier(arena: TreeArena, state: FrontierState, target_n: int) -> FrontierState:
    """Continue an existing run up to ``target_n`` total injections."""
    if state.arena is not arena:
        raise UsageError("state belongs to a different arena")
    if target_n < state.n:
        raise ValidationError(f"cannot shrink a frontier run ({state.n} > {target_n})")
    return _drive(state, target_n)


def complete_sink(arena: TreeArena, state: FrontierState) -> np.ndarray:
    """Parked set plus the untouched fill at the realised height.

    Returns the sorted sink ids: every parked vertex, together with every
    vertex at depth ``realized_height`` whose root path crosses no parked
    vertex.  The fill plugs the holes so the root component of the
    complement is finite; fill vertices are guaranteed untouched.
    """
    if state.arena is not arena:
        raise UsageError("state belongs to a different arena")
    if state.n == 0:
        raise UsageError("frontier is empty; inject at least one particle")
    rh = state.realized_height
    members = state.members
    if state._in_frontier[ROOT]:
        return members
    fill: list[int] = []
    stack = [ROOT]
    in_frontier = state._in_frontier
    known = in_frontier.shape[0]  # nodes created below are never members
    while stack:
        x = stack.pop()
        d = arena.ensure_children(x)
        fc = int(arena._first_child[x])
        for c in range(fc, fc + d):
            if c < known and in_frontier[c]:
                continue
            if int(arena._depth[c]) >= rh:
                if arena._visited[c]:
                    raise UsageError(
                        f"fill vertex {c} was visited; frontier bookkeeping is broken")
                fill.append(c)
            else:
                stack.append(c)
    sink = np.concatenate((members, np.asarray(fill, dtype=np.int64)))
    sink.sort()
    return sink


def path_boundary_ratio(arena: TreeArena, path) -> float:
    """Vertex-boundary-to-size ratio of a root path.

    For a path p the boundary inside the tree satisfies
    ``|boundary| + |p| = 1 + sum of child counts along p``, so the ratio
    comes out of the child counts alone.
    """
    path = [int(x) for x in path]
    if not path:
        raise ValidationError("empty path")
    if path[0] != ROOT:
        raise ValidationError("path must start at the root")
    for a, b in zip(path, path[1:]):
        arena._check_id(b)
        if int(arena._parent[b]) != a:
            raise ValidationError(f"{b} is not a child of {a}: not a root path")
    degree_sum = 0
    for x in path:
        degree_sum += arena.ensure_children(x)
    size = len(path)
    boundary = 1 + degree_sum - size
    return boundary / size
