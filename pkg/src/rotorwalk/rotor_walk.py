"""Rotor-router walks, chained escape counting, and multi-particle
legal sequences on a tree arena.

A walk starts at the root and follows the freshly incremented rotor at each
vertex.  On a depth-``H`` truncation it ends by stepping onto the sink
(returned) or onto a vertex at depth ``H`` (reached the absorbing boundary).
Successive walks chain: each starts in the configuration its predecessor
left behind.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from . import _kernels as K
from .gw_tree import ROOT, SINK, TreeArena, UsageError, ValidationError

#: Hard per-walk step cap.  Termination on a finite truncation is guaranteed,
#: so hitting this signals an implementation bug, not a mathematical event.
STEP_BUDGET = 10**10


class WalkKind(Enum):
    RETURNED = "returned"
    REACHED_BOUNDARY = "reached_boundary"


@dataclass(frozen=True)
class WalkOutcome:
    kind: WalkKind
    steps: int
    max_depth: int


@dataclass(frozen=True)
class EscapeStats:
    """Outcome record of ``n`` chained walks at truncation depth ``H``."""

    n: int
    escapes: int
    outcomes: np.ndarray
    H: int

    @property
    def ratio(self) -> float:
        return self.escapes / self.n

    def escapes_before(self, k: int) -> int:
        """Escapes among the first ``k`` walks."""
        return int(self.outcomes[:k].sum())

    def csv_row(self, seed: int) -> str:
        return f"{seed},{self.n},{self.H},{self.escapes},{self.ratio!r}"

    def rle(self) -> str:
        """Run-length encoding of the outcome bits, e.g. ``0x12 1x3 0x5``."""
        return rle_encode(self.outcomes)


def rle_encode(bits: np.ndarray) -> str:
    bits = np.asarray(bits)
    if bits.size == 0:
        return ""
    change = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [bits.size]))
    return " ".join(f"{int(bits[s])}x{int(e - s)}" for s, e in zip(starts, ends))


def rle_decode(text: str) -> np.ndarray:
    out: list[np.ndarray] = []
    for token in text.split():
        value, count = token.split("x")
        out.append(np.full(int(count), int(value), dtype=np.uint8))
    if not out:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate(out)


def _walk_args(arena: TreeArena):
    return (arena._parent, arena._depth, arena._first_child,
            arena._child_count, arena._rotor, arena._rotor0,
            arena._visited, arena._rotor_u,
            arena._cum, arena._qcum_table(),
            arena._off_pool, arena._rot_pool)


def _handle_resource_event(arena: TreeArena, ev: int) -> bool:
    """Refill a pool or grow the arrays; True when the event was consumed."""
    if ev == K.EV_NEED_OFF_POOL:
        arena._refill_off()
    elif ev == K.EV_NEED_ROT_POOL:
        arena._refill_rot()
    elif ev == K.EV_NEED_GROW:
        arena._grow(arena.size + max(64, arena.dist.kmax))
    else:
        return False
    return True


def step(arena: TreeArena, pos: int) -> int:
    """One rotor move: increment the rotor at ``pos``, go where it points.

    Children and rotor are materialised on demand, matching the lazy
    just-in-time configuration semantics.
    """
    if pos == SINK:
        raise UsageError("cannot step from the sink; it absorbs particles")
    arena._check_id(pos)
    d = arena.ensure_children(pos)
    r = arena.ensure_rotor(pos) + 1
    if r > d:
        r = 0
    arena._rotor[pos] = r
    if r == 0:
        return int(arena._parent[pos])
    return int(arena._first_child[pos]) + r - 1


def run_walk(arena: TreeArena, H: int, budget: int = STEP_BUDGET) -> WalkOutcome:
    """Walk one particle from the root until the sink or depth ``H``.

    The rotor trace persists in the arena so the next walk chains onto it.
    """
    if H < 1:
        raise ValidationError("truncation depth must be >= 1")
    pos = ROOT
    arena._visited[ROOT] = 1
    steps = 0
    max_depth = 0
    while True:
        meta = arena._kernel_meta()
        ev, pos, steps, max_depth = K.walk_kernel(
            *_walk_args(arena), meta, pos, H, steps, max_depth, budget)
        arena._absorb_meta(meta)
        if _handle_resource_event(arena, ev):
            continue
        if ev == K.EV_RETURNED:
            return WalkOutcome(WalkKind.RETURNED, int(steps), int(max_depth))
        if ev == K.EV_BOUNDARY:
            return WalkOutcome(WalkKind.REACHED_BOUNDARY, int(steps), int(max_depth))
        raise UsageError(
            f"walk exceeded the {budget}-step budget; this indicates a bug")


def escape_count(arena: TreeArena, n: int, H: int,
                 budget: int = STEP_BUDGET) -> EscapeStats:
    """Run ``n`` chained walks; escapes are walks that park at depth ``H``."""
    if n < 1:
        raise ValidationError("need at least one walk")
    if H < 1:
        raise ValidationError("truncation depth must be >= 1")
    outcomes = np.zeros(n, dtype=np.uint8)
    state = np.array([0, -2, 0, 0], dtype=np.int64)
    while True:
        meta = arena._kernel_meta()
        ev = K.escape_kernel(*_walk_args(arena), meta, outcomes, H, budget, state)
        arena._absorb_meta(meta)
        if _handle_resource_event(arena, ev):
            continue
        if ev == K.EV_DONE:
            break
        raise UsageError(
            f"walk exceeded the {budget}-step budget; this indicates a bug")
    escapes = int(outcomes.sum())
    return EscapeStats(n=n, escapes=escapes, outcomes=outcomes, H=H)


@dataclass(frozen=True)
class AdaptiveResult:
    """Escape stats at the stabilised depth, plus the doubling history."""

    stats: EscapeStats
    H: int
    history: tuple[tuple[int, int], ...]
    converged: bool


def adaptive_escape_count(arena: TreeArena, n: int, start_h: int = 4,
                          rel_tol: float = 1e-3, max_h: int = 4096) -> AdaptiveResult:
    """Double the truncation depth until the escape count stabilises.

    Each depth is run against the same initial configuration (rotors are
    reset between depths), so the counts are coupled and monotone.  Stops
    once the drop between consecutive depths falls below ``rel_tol * n``
    (at least one particle).
    """
    threshold = max(1.0, rel_tol * n)
    history: list[tuple[int, int]] = []
    prev = None
    h = start_h
    while True:
        arena.reset_rotors()
        stats = escape_count(arena, n, h)
        history.append((h, stats.escapes))
        if prev is not None and prev - stats.escapes < threshold:
            return AdaptiveResult(stats, h, tuple(history), True)
        if 2 * h > max_h:
            return AdaptiveResult(stats, h, tuple(history), False)
        prev = stats.escapes
        h *= 2


# -- multi-particle legal sequences ---------------------------------------


@dataclass(frozen=True)
class LegalOutcome:
    """Absorptions per boundary vertex, particles at the sink, moves made.

    The final rotor configuration lives in the arena the sequence ran on.
    """

    absorbed: dict[int, int]
    sink_count: int
    moves: int


def materialize_region(arena: TreeArena, sinks: Iterable[int],
                       node_budget: int = 10**7) -> np.ndarray:
    """Expand and realise rotors on the finite component enclosed by ``sinks``.

    Returns the interior node ids.  Raises if the sink set fails to enclose
    a finite region within the node budget.
    """
    sink_set = set(int(s) for s in sinks)
    interior: list[int] = []
    if ROOT in sink_set:
        return np.zeros(0, dtype=np.int64)
    stack = [ROOT]
    seen = {ROOT}
    while stack:
        x = stack.pop()
        interior.append(x)
        if len(interior) > node_budget:
            raise ValidationError(
                "sink set does not enclose a finite region within budget")
        d = arena.ensure_children(x)
        arena.ensure_rotor(x)
        fc = int(arena._first_child[x])
        for c in range(fc, fc + d):
            if c not in sink_set and c not in seen:
                seen.add(c)
                stack.append(c)
    return np.asarray(sorted(interior), dtype=np.int64)


def _kernel_scheduler_mode(scheduler) -> tuple[int, int] | None:
    if scheduler == "lifo":
        return 0, 0
    if scheduler == "fifo":
        return 1, 0
    if isinstance(scheduler, str) and scheduler.startswith("random:"):
        return 2, int(scheduler.split(":", 1)[1])
    if isinstance(scheduler, tuple) and len(scheduler) == 2 and scheduler[0] == "random":
        return 2, int(scheduler[1])
    return None


def run_legal_sequence(arena: TreeArena, sinks: Iterable[int],
                       placement: Mapping[int, int],
                       scheduler="lifo",
                       move_budget: int = STEP_BUDGET) -> LegalOutcome:
    """Drive legal moves to quiescence; returns the absorption profile.

    ``sinks`` are absorbing vertices (the global sink ``s`` always absorbs);
    ``placement`` maps node id to a particle count.  ``scheduler`` picks the
    next occupied non-sink vertex: ``"lifo"``, ``"fifo"``, ``"random:<seed>"``,
    or a callable ``f(occupied_ids) -> id`` for custom orders.  The final
    state is scheduler-independent; only the move order varies.
    """
    sink_ids = sorted(set(int(s) for s in sinks))
    if not sink_ids:
        raise ValidationError("sink set must be nonempty")
    for s in sink_ids:
        if s == SINK:
            raise ValidationError("the global sink is implicit; not a member of S")
        arena._check_id(s)
    sink_set = set(sink_ids)
    counts: dict[int, int] = {}
    absorbed = {s: 0 for s in sink_ids}
    sink_count = 0
    for node, c in placement.items():
        node = int(node)
        c = int(c)
        if c < 0:
            raise ValidationError("negative particle count")
        if node == SINK:
            raise ValidationError("cannot place particles on the sink")
        arena._check_id(node)
        if c == 0:
            continue
        if node in sink_set:
            absorbed[node] += c
        else:
            counts[node] = counts.get(node, 0) + c

    if not counts:
        return LegalOutcome(absorbed=absorbed, sink_count=0, moves=0)

    interior = set(materialize_region(arena, sink_ids).tolist())
    outside = sorted(set(counts) - interior)
    if outside:
        raise ValidationError(
            f"particles at {outside} lie outside the region enclosed by the sink set")

    mode = _kernel_scheduler_mode(scheduler)
    if mode is None and not callable(scheduler):
        raise ValidationError(f"unknown scheduler {scheduler!r}")

    if mode is not None:
        return _run_legal_kernel(arena, sink_set, counts, absorbed, mode, move_budget)
    return _run_legal_python(arena, sink_set, counts, absorbed, scheduler, move_budget)


def _run_legal_kernel(arena, sink_set, counts, absorbed, mode, move_budget):
    mode_id, rng_seed = mode
    size = arena.size
    particles = np.zeros(size, dtype=np.int64)
    for node, c in counts.items():
        particles[node] = c
    is_sink = np.zeros(size, dtype=np.uint8)
    for s in sink_set:
        is_sink[s] = 1
    absorbed_arr = np.zeros(size, dtype=np.int64)
    occupied = sorted(counts)
    cap = max(64, 4 * len(occupied), size // 4)
    worklist = np.zeros(cap, dtype=np.int64)
    worklist[:len(occupied)] = occupied
    state = np.array([len(occupied), 0, 0, 0, rng_seed], dtype=np.int64)
    while True:
        ev = K.legal_kernel(arena._parent, arena._first_child, arena._child_count,
                            arena._rotor, particles, is_sink, absorbed_arr,
                            worklist, state, mode_id, move_budget)
        if ev == K.EV_DONE:
            break
        if ev == K.EV_STACK_FULL:
            size_now, head = int(state[0]), int(state[1])
            bigger = np.zeros(2 * worklist.shape[0], dtype=np.int64)
            idx = (head + np.arange(size_now)) % worklist.shape[0]
            bigger[:size_now] = worklist[idx]
            worklist = bigger
            state[1] = 0
            continue
        raise UsageError(
            f"legal sequence exceeded the {move_budget}-move budget; this indicates a bug")
    for s in sink_set:
        absorbed[s] += int(absorbed_arr[s])
    return LegalOutcome(absorbed=absorbed, sink_count=int(state[2]),
                        moves=int(state[3]))


def _run_legal_python(arena, sink_set, counts, absorbed, scheduler, move_budget):
    """Reference loop for custom schedulers; small instances only."""
    sink_count = 0
    moves = 0
    while counts:
        occupied = tuple(sorted(counts))
        v = int(scheduler(occupied))
        if v not in counts:
            raise UsageError(f"scheduler chose unoccupied vertex {v}")
        if v in sink_set or v == SINK:
            raise UsageError(f"scheduler chose sink vertex {v}")
        counts[v] -= 1
        if counts[v] == 0:
            del counts[v]
        d = int(arena._child_count[v])
        r = int(arena._rotor[v]) + 1
        if r > d:
            r = 0
        arena._rotor[v] = r
        tgt = int(arena._parent[v]) if r == 0 else int(arena._first_child[v]) + r - 1
        moves += 1
        if tgt == SINK:
            sink_count += 1
        elif tgt in sink_set:
            absorbed[tgt] += 1
        else:
            counts[tgt] = counts.get(tgt, 0) + 1
        if moves >= move_budget:
            raise UsageError(
                f"legal sequence exceeded the {move_budget}-move budget; this indicates a bug")
    return LegalOutcome(absorbed=absorbed, sink_count=sink_count, moves=moves)
