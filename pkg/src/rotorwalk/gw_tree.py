"""Lazily grown Galton-Watson family trees with an attached absorbing sink.

A :class:`TreeArena` holds one sampled tree in flat numpy arrays.  Children
are drawn on first need, one inverse-CDF lookup per expansion, so arbitrarily
deep trees cost only what a walk actually touches.  The sink (the root's
parent) is a reserved pseudo-id, not a stored node: it has no rotor and
absorbs particles.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

#: Reserved id for the sink vertex, the absorbing parent of the root.
SINK = -1

#: Node id of the root in every arena.
ROOT = 0

_EXACT_TYPES = (Fraction, int)
_PROB_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """Input breaks a documented invariant (bad distribution, bad id, ...)."""


class UsageError(RuntimeError):
    """Operation applied in a state it does not support (e.g. re-expansion)."""


def _is_exact(values: Iterable) -> bool:
    return all(isinstance(v, _EXACT_TYPES) for v in values)


@dataclass(frozen=True)
class OffspringDistribution:
    """Offspring law (p_1, ..., p_kmax); every vertex has at least one child.

    Entries may be floats or :class:`fractions.Fraction`.  Exact entries keep
    downstream classification arithmetic exact.
    """

    probs: tuple

    def __init__(self, probs: Sequence):
        probs = tuple(probs)
        if not probs:
            raise ValidationError("offspring distribution needs at least p_1")
        for p in probs:
            if not isinstance(p, (int, float, Fraction)):
                raise ValidationError(f"probability entries must be numeric, got {p!r}")
            if p < 0:
                raise ValidationError(f"negative probability {p!r}")
        total = sum(probs)
        if abs(total - 1) > _PROB_SUM_TOL:
            raise ValidationError(f"offspring probabilities sum to {float(total)}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_dict(cls, entries: Mapping[int, object]) -> "OffspringDistribution":
        """Build from ``{k: p_k}``; ``k == 0`` is rejected (leaves are disallowed)."""
        if not entries:
            raise ValidationError("empty offspring specification")
        kmax = 0
        for k in entries:
            if not isinstance(k, int) or k < 0:
                raise ValidationError(f"offspring count must be a nonnegative int, got {k!r}")
            if k == 0:
                raise ValidationError("p_0 must be zero: leafless trees only")
            kmax = max(kmax, k)
        probs = [Fraction(0)] * kmax
        for k, p in entries.items():
            probs[k - 1] = p
        return cls(probs)

    @classmethod
    def delta(cls, k: int) -> "OffspringDistribution":
        """Deterministic offspring: every vertex has exactly ``k`` children."""
        if k < 1:
            raise ValidationError("deterministic offspring needs k >= 1")
        return cls.from_dict({k: Fraction(1)})

    @property
    def kmax(self) -> int:
        return len(self.probs)

    @property
    def mean(self):
        """Mean offspring number; exact when the entries are exact."""
        return sum((k + 1) * p for k, p in enumerate(self.probs))

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.probs)

    @property
    def is_deterministic(self) -> bool:
        return sum(1 for p in self.probs if p > 0) == 1

    def support(self) -> tuple[int, ...]:
        return tuple(k + 1 for k, p in enumerate(self.probs) if p > 0)

    def cumulative_floats(self) -> np.ndarray:
        cum = np.cumsum(np.asarray([float(p) for p in self.probs]))
        cum[-1] = 1.0
        return cum


@dataclass(frozen=True)
class Node:
    """Read-only view of one arena node."""

    id: int
    parent: int
    depth: int
    children: tuple[int, ...] | None
    rotor: int | None
    visited: bool

    @property
    def child_count(self) -> int | None:
        return None if self.children is None else len(self.children)


#: Uniform draws are buffered in chunks of this size so compiled kernels can
#: expand nodes without calling back into Python for every draw.
POOL_CHUNK = 1 << 16


class TreeArena:
    """One lazily sampled tree plus per-node rotor state.

    Single-writer: an arena belongs to one experiment at a time.  Parallelism
    happens across independent ``(seed, arena)`` instances.

    Child counts come from a dedicated offspring stream; every node also gets
    a pre-drawn uniform from a second stream, consumed later to realise its
    rotor.  Both draws happen exactly once per node, so the revealed tree and
    the revealed configuration never change after the fact, no matter which
    walks run in which order.  The streams are consumed strictly sequentially
    (through chunked buffers shared with the compiled kernels), so a given
    seed and expansion order always reproduce the same arena.
    """

    def __init__(self, dist: OffspringDistribution, seed: int,
                 rotor_matrix=None, initial_capacity: int = 1024):
        if not isinstance(dist, OffspringDistribution):
            raise ValidationError("dist must be an OffspringDistribution")
        self.dist = dist
        self.seed = int(seed)
        self.rotor_matrix = rotor_matrix
        self._offspring_rng = np.random.default_rng([self.seed, 0])
        self._rotor_u_rng = np.random.default_rng([self.seed, 1])
        self._cum = dist.cumulative_floats()
        self._off_pool = self._offspring_rng.random(POOL_CHUNK)
        self._off_idx = 0
        self._rot_pool = self._rotor_u_rng.random(POOL_CHUNK)
        self._rot_idx = 0
        self._qcum = None if rotor_matrix is None else _padded_qcum(rotor_matrix)
        cap = max(int(initial_capacity), 16)
        self._parent = np.full(cap, SINK, dtype=np.int64)
        self._depth = np.zeros(cap, dtype=np.int64)
        self._first_child = np.full(cap, -1, dtype=np.int64)
        self._child_count = np.full(cap, -1, dtype=np.int32)
        self._rotor = np.full(cap, -1, dtype=np.int32)
        self._rotor0 = np.full(cap, -1, dtype=np.int32)
        self._visited = np.zeros(cap, dtype=np.uint8)
        self._rotor_u = np.zeros(cap, dtype=np.float64)
        self.size = 1
        self._rotor_u[ROOT] = self._take_rot(1)[0]

    # -- pooled stream consumption ----------------------------------------

    def _take_off(self) -> float:
        if self._off_idx >= self._off_pool.shape[0]:
            self._refill_off()
        u = self._off_pool[self._off_idx]
        self._off_idx += 1
        return float(u)

    def _take_rot(self, k: int) -> np.ndarray:
        while self._rot_idx + k > self._rot_pool.shape[0]:
            self._refill_rot()
        out = self._rot_pool[self._rot_idx:self._rot_idx + k]
        self._rot_idx += k
        return out

    def _refill_off(self) -> None:
        self._off_pool = np.concatenate(
            (self._off_pool[self._off_idx:], self._offspring_rng.random(POOL_CHUNK)))
        self._off_idx = 0

    def _refill_rot(self) -> None:
        self._rot_pool = np.concatenate(
            (self._rot_pool[self._rot_idx:], self._rotor_u_rng.random(POOL_CHUNK)))
        self._rot_idx = 0

    # -- structure -------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self._parent.shape[0]

    def _grow(self, need: int) -> None:
        cap = self.capacity
        new_cap = max(2 * cap, need)
        for name in ("_parent", "_depth", "_first_child", "_child_count",
                     "_rotor", "_rotor0", "_visited", "_rotor_u"):
            old = getattr(self, name)
            fresh = np.empty(new_cap, dtype=old.dtype)
            fresh[:cap] = old
            fill = 0 if name in ("_visited", "_rotor_u", "_depth") else -1
            fresh[cap:] = fill
            setattr(self, name, fresh)

    def _check_id(self, i: int) -> None:
        if not 0 <= i < self.size:
            raise ValidationError(f"node id {i} outside arena (size {self.size})")

    def expand(self, i: int) -> int:
        """Sample and attach the children of node ``i``; returns the count.

        Expanding twice is an error: a second draw would silently decouple
        runs that share this arena's seed.
        """
        self._check_id(i)
        if self._child_count[i] >= 0:
            raise UsageError(f"node {i} already expanded")
        return self._expand_unchecked(i)

    def _expand_unchecked(self, i: int) -> int:
        u = self._take_off()
        k = int(np.searchsorted(self._cum, u, side="right")) + 1
        if k > self.dist.kmax:
            k = self.dist.kmax
        base = self.size
        if base + k > self.capacity:
            self._grow(base + k)
        self._parent[base:base + k] = i
        self._depth[base:base + k] = self._depth[i] + 1
        self._first_child[base:base + k] = -1
        self._child_count[base:base + k] = -1
        self._rotor[base:base + k] = -1
        self._rotor0[base:base + k] = -1
        self._visited[base:base + k] = 0
        self._rotor_u[base:base + k] = self._take_rot(k)
        self._first_child[i] = base
        self._child_count[i] = k
        self.size = base + k
        return k

    def ensure_children(self, i: int) -> int:
        """Idempotent expansion; returns the (possibly cached) child count."""
        self._check_id(i)
        c = self._child_count[i]
        if c >= 0:
            return int(c)
        return self._expand_unchecked(i)

    def ensure_rotor(self, i: int) -> int:
        """Realise the rotor of node ``i`` from its pre-drawn uniform."""
        self._check_id(i)
        r = self._rotor[i]
        if r >= 0:
            return int(r)
        d = self._child_count[i]
        if d < 0:
            raise UsageError(f"node {i} needs children sampled before its rotor")
        if self.rotor_matrix is None:
            raise UsageError("arena has no rotor matrix attached")
        row = self.rotor_matrix.cumulative_row(int(d))
        loc = int(np.searchsorted(row, self._rotor_u[i], side="right"))
        if loc > d:
            loc = d
        val = d - loc
        self._rotor[i] = val
        self._rotor0[i] = val
        return val

    def children(self, i: int) -> tuple[int, ...] | None:
        self._check_id(i)
        c = self._child_count[i]
        if c < 0:
            return None
        fc = int(self._first_child[i])
        return tuple(range(fc, fc + int(c)))

    def node(self, i: int) -> Node:
        self._check_id(i)
        r = int(self._rotor[i])
        return Node(
            id=i,
            parent=int(self._parent[i]),
            depth=int(self._depth[i]),
            children=self.children(i),
            rotor=None if r < 0 else r,
            visited=bool(self._visited[i]),
        )

    def depth_of(self, i: int) -> int:
        self._check_id(i)
        return int(self._depth[i])

    def truncate_view(self, H: int) -> tuple[np.ndarray, np.ndarray]:
        """Force expansion to depth ``H``; return (interior ids, boundary ids).

        Interior nodes have depth < H, boundary nodes sit exactly at H.  The
        boundary is the cut used as an absorbing set by truncated experiments.
        """
        if H < 0:
            raise ValidationError("truncation depth must be nonnegative")
        if H > 0:
            self.expand_to_depth(H)
        depths = self._depth[:self.size]
        interior = np.flatnonzero(depths < H).astype(np.int64)
        boundary = np.flatnonzero(depths == H).astype(np.int64)
        return interior, boundary

    def expand_to_depth(self, H: int) -> None:
        """Materialise every node above depth ``H`` (compiled bulk scan)."""
        from . import _kernels as K  # deferred: numba compile on first use
        cursor = np.zeros(1, dtype=np.int64)
        while True:
            meta = self._kernel_meta()
            ev = K.expand_to_depth_kernel(
                self._parent, self._depth, self._first_child, self._child_count,
                self._rotor, self._rotor0, self._visited, self._rotor_u,
                self._cum, self._off_pool, self._rot_pool, meta, H, cursor)
            self._absorb_meta(meta)
            if ev == K.EV_DONE:
                return
            if ev == K.EV_NEED_OFF_POOL:
                self._refill_off()
            elif ev == K.EV_NEED_ROT_POOL:
                self._refill_rot()
            elif ev == K.EV_NEED_GROW:
                self._grow(self.size + max(64, self.dist.kmax))

    # -- rotor state management -------------------------------------------

    def reset_rotors(self) -> None:
        """Restore every realised rotor to its initial value and clear visits.

        The tree structure and all one-time draws survive, so two runs
        separated by a reset see the exact same (tree, configuration) pair.
        """
        n = self.size
        self._rotor[:n] = self._rotor0[:n]
        self._visited[:n] = 0

    def rotor_snapshot(self) -> np.ndarray:
        return self._rotor[:self.size].copy()

    def restore_rotors(self, snapshot: np.ndarray) -> None:
        if snapshot.shape[0] > self.size:
            raise ValidationError("snapshot larger than arena")
        self._rotor[:snapshot.shape[0]] = snapshot

    def set_rotor(self, i: int, value: int) -> None:
        """Pin an explicit rotor value (used by hand-built test fixtures)."""
        self._check_id(i)
        d = self._child_count[i]
        if d < 0:
            raise UsageError(f"node {i} needs children sampled before its rotor")
        if not 0 <= value <= d:
            raise ValidationError(f"rotor {value} outside 0..{int(d)}")
        self._rotor[i] = value
        if self._rotor0[i] < 0:
            self._rotor0[i] = value

    # -- compiled-kernel support -------------------------------------------

    def _kernel_meta(self) -> np.ndarray:
        """[size, offspring pool index, rotor pool index] handed to kernels."""
        return np.array([self.size, self._off_idx, self._rot_idx], dtype=np.int64)

    def _absorb_meta(self, meta: np.ndarray) -> None:
        self.size = int(meta[0])
        self._off_idx = int(meta[1])
        self._rot_idx = int(meta[2])

    def _qcum_table(self) -> np.ndarray:
        if self._qcum is None:
            raise UsageError("arena has no rotor matrix attached")
        return self._qcum

    # -- serialization ----------------------------------------------------

    def snapshot(self) -> str:
        """Line-oriented dump: ``id parent depth child_count rotor`` per node."""
        lines = []
        for i in range(self.size):
            lines.append(f"{i} {int(self._parent[i])} {int(self._depth[i])} "
                         f"{int(self._child_count[i])} {int(self._rotor[i])}")
        return "\n".join(lines) + "\n"


def _padded_qcum(rotor_matrix) -> np.ndarray:
    """Cumulative rotor rows padded into one dense table for the kernels."""
    kmax = rotor_matrix.kmax
    table = np.ones((kmax + 1, kmax + 1), dtype=np.float64)
    for d in range(1, kmax + 1):
        table[d, :d + 1] = rotor_matrix.cumulative_row(d)
    return table


def new_tree(dist: OffspringDistribution, seed: int, rotor_matrix=None) -> TreeArena:
    """Fresh arena holding only the root, children not yet sampled."""
    return TreeArena(dist, seed, rotor_matrix=rotor_matrix)
