"""Simple-random-walk quantities on truncated trees and the distributional
fixed point of the escape probability.

Three layers: an exact harmonic solver for the probability of hitting the
sink before an absorbing set (two-pass tree elimination, O(size)); monotone
upper/lower bounds for the never-return probability gamma via its recursion
over root branches; and a grid operator on CDFs whose iteration converges to
the law of gamma over random trees.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .gw_tree import (
    ROOT,
    SINK,
    OffspringDistribution,
    TreeArena,
    UsageError,
    ValidationError,
)


# -- hitting probabilities -------------------------------------------------


class HittingSolution:
    """Probability of reaching the sink before the absorbing set, per vertex.

    ``h`` is 1 at the sink, 0 on the absorbing set and beyond, harmonic in
    between: at an interior vertex it averages the neighbour values.
    """

    def __init__(self, arena: TreeArena, interior: np.ndarray,
                 sink_ids: np.ndarray, values: np.ndarray, edge_sum: float):
        self.arena = arena
        self.interior = interior
        self.sink_ids = sink_ids
        self._h = values
        self._edge_sum = float(edge_sum)

    @property
    def root_value(self) -> float:
        return self.h_of(ROOT)

    def h_of(self, i: int) -> float:
        if i == SINK:
            return 1.0
        return float(self._h[i])

    def dense(self) -> np.ndarray:
        """h over all arena ids (0 on sinks and untouched vertices)."""
        return self._h

    def max_residual(self) -> float:
        """Worst violation of the interior averaging property."""
        if self.interior.size == 0:
            return 0.0
        arena = self.arena
        worst = 0.0
        for x in self.interior:
            x = int(x)
            d = int(arena._child_count[x])
            fc = int(arena._first_child[x])
            p = int(arena._parent[x])
            hp = 1.0 if p == SINK else float(self._h[p])
            total = hp + float(self._h[fc:fc + d].sum())
            worst = max(worst, abs(total - (d + 1) * float(self._h[x])))
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("id,h\n")
        for x in self.interior:
            buf.write(f"{int(x)},{float(self._h[x])!r}\n")
        for s in self.sink_ids:
            buf.write(f"{int(s)},0.0\n")
        return buf.getvalue()


def solve_hitting(arena: TreeArena, sinks) -> HittingSolution:
    """Exact solve of the sink-hitting probability on the enclosed component.

    ``sinks`` must cut every root path inside the revealed tree; reaching an
    unexpanded vertex means the cut fails (the tree continues below it).
    """
    sink_ids = np.asarray(sorted(set(int(s) for s in sinks)), dtype=np.int64)
    if sink_ids.size == 0:
        raise ValidationError("sink set must be nonempty")
    for s in sink_ids:
        arena._check_id(int(s))
    is_sink = np.zeros(arena.size, dtype=np.uint8)
    is_sink[sink_ids] = 1
    h = np.zeros(arena.size, dtype=np.float64)
    if is_sink[ROOT]:
        return HittingSolution(arena, np.zeros(0, dtype=np.int64), sink_ids, h, 1.0)
    # parent-before-child order over the interior
    order = np.empty(arena.size, dtype=np.int64)
    stack = np.empty(arena.size, dtype=np.int64)
    count = K.interior_order_kernel(arena._first_child, arena._child_count,
                                    is_sink, order, stack, ROOT)
    if count < 0:
        raise ValidationError(
            f"vertex {-count - 1} is unexpanded and not absorbing: the sink "
            "set does not separate the root from the unexplored tree")
    order_arr = order[:count].copy()
    edge_sum = K.hitting_kernel(arena._parent, arena._first_child,
                                arena._child_count, is_sink, h, order_arr, ROOT)
    return HittingSolution(arena, order_arr, sink_ids, h, float(edge_sum))


def k_constant(solution: HittingSolution) -> float:
    """Unit constant plus the sum of h-differences over all tree edges.

    Edges below the absorbing set contribute nothing (h vanishes there), so
    the sum closes over the enclosed component plus its boundary edges.
    """
    return 1.0 + solution._edge_sum


def k_closed_form(height: int, h_root: float) -> float:
    """Telescoped form ``1 + (height + 1) (1 - h(root))``.

    Exact whenever all absorption happens at one level (every absorbing
    vertex at ``height``); an upper bound otherwise.
    """
    return 1.0 + (height + 1) * (1.0 - h_root)


# -- gamma bounds -----------------------------------------------------------


@dataclass(frozen=True)
class GammaBounds:
    """Bracketing values for the never-return probability of the SRW."""

    lower: float
    upper: float
    H: int

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValidationError(f"invalid bounds {self.lower}..{self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def gamma_regular(d: int, H: int, boundary: float) -> float:
    """Escape recursion on the d-regular tree, depth ``H``, scalar form."""
    v = float(boundary)
    for _ in range(H):
        v = 1.0 - 1.0 / (1.0 + d * v)
    return v


def gamma_bounds(arena: TreeArena, H: int) -> GammaBounds:
    """Evaluate the branch recursion bottom-up with boundary 0 and 1.

    The recursion is monotone in the boundary values, so boundary 0 gives a
    lower and boundary 1 an upper bound for the infinite-tree value.
    Deterministic offspring laws use the scalar recursion (every subtree is
    the same regular tree), which keeps large depths cheap.
    """
    if H < 0:
        raise ValidationError("depth must be nonnegative")
    dist = arena.dist
    if dist.is_deterministic:
        d = dist.support()[0]
        return GammaBounds(gamma_regular(d, H, 0.0), gamma_regular(d, H, 1.0), H)
    if H == 0:
        return GammaBounds(0.0, 1.0, 0)
    interior, boundary = arena.truncate_view(H)
    lower = _gamma_eval(arena, interior, boundary, 0.0)
    upper = _gamma_eval(arena, interior, boundary, 1.0)
    return GammaBounds(lower, upper, H)


def _gamma_eval(arena: TreeArena, interior: np.ndarray, boundary: np.ndarray,
                boundary_value: float) -> float:
    size = arena.size
    child_sum = np.zeros(size, dtype=np.float64)
    if boundary_value != 0.0:
        np.add.at(child_sum, arena._parent[boundary],
                  np.full(boundary.size, boundary_value))
    depths = arena._depth[interior]
    idx = np.argsort(depths, kind="stable")
    ids = interior[idx]
    sorted_d = depths[idx]
    top = int(sorted_d[-1]) if sorted_d.size else 0
    starts = np.searchsorted(sorted_d, np.arange(top + 2))
    root_val = 0.0
    for lv in range(top, -1, -1):
        level_ids = ids[starts[lv]:starts[lv + 1]]
        vals = 1.0 - 1.0 / (1.0 + child_sum[level_ids])
        if lv == 0:
            root_val = float(vals[0])
        else:
            np.add.at(child_sum, arena._parent[level_ids], vals)
    return root_val


# -- the CDF operator -------------------------------------------------------


@dataclass(frozen=True)
class DiscretizedCDF:
    """CDF sampled on the uniform grid ``t_i = i / G`` over [0, 1]."""

    values: np.ndarray

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise ValidationError("need a 1-d grid with at least two points")
        if values[0] != 0.0:
            raise ValidationError(f"F(0) must be 0, got {values[0]}")
        if abs(values[-1] - 1.0) > 1e-9:
            raise ValidationError(f"F(1) must be 1, got {values[-1]}")
        if np.any(np.diff(values) < -1e-12):
            raise ValidationError("CDF values must be nondecreasing")
        values = values.copy()
        values[-1] = 1.0
        np.maximum.accumulate(values, out=values)
        np.clip(values, 0.0, 1.0, out=values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, grid: int = 4096) -> "DiscretizedCDF":
        return cls(np.linspace(0.0, 1.0, grid + 1))

    @classmethod
    def point_mass(cls, x: float, grid: int = 4096) -> "DiscretizedCDF":
        if not 0.0 <= x <= 1.0:
            raise ValidationError("point mass must sit in [0, 1]")
        ts = np.linspace(0.0, 1.0, grid + 1)
        vals = (ts >= x).astype(np.float64)
        vals[0] = 0.0
        vals[-1] = 1.0
        return cls(vals)

    @property
    def grid(self) -> int:
        return self.values.size - 1

    def ts(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.size)

    def quantile(self, q: float) -> float:
        """Smallest grid point with F(t) >= q."""
        idx = int(np.searchsorted(self.values, q, side="left"))
        return min(idx, self.grid) / self.grid

    def mean(self) -> float:
        """Mean of the distribution, via the tail integral of 1 - F."""
        return float(np.trapezoid(1.0 - self.values, dx=1.0 / self.grid))

    def sup_distance(self, other: "DiscretizedCDF") -> float:
        if self.grid != other.grid:
            raise ValidationError("grids differ")
        return float(np.max(np.abs(self.values - other.values)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,F\n")
        ts = self.ts()
        for t, v in zip(ts, self.values):
            buf.write(f"{float(t)!r},{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscretizedCDF":
        lines = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("#")]
        if lines and lines[0].startswith("t,"):
            lines = lines[1:]
        vals = [float(ln.split(",")[1]) for ln in lines]
        return cls(np.asarray(vals))


def _atom_masses(cdf: DiscretizedCDF) -> np.ndarray:
    """Cell masses split evenly onto both endpoints (centred placement)."""
    masses = np.diff(cdf.values)
    atoms = np.zeros(cdf.values.size, dtype=np.float64)
    atoms[1:] += 0.5 * masses
    atoms[:-1] += 0.5 * masses
    return atoms


def apply_cdf_operator(cdf: DiscretizedCDF, xi: OffspringDistribution) -> DiscretizedCDF:
    """One application of the escape-law operator.

    Mixes, with the offspring weights, the k-fold convolution CDFs evaluated
    at ``t / (1 - t)``: the image of a law under "escape probability of a
    tree whose branches carry i.i.d. copies".  Beyond the convolution grid
    the k-fold CDF is exactly 1 (it lives on [0, k]).
    """
    G = cdf.grid
    atoms = _atom_masses(cdf)
    ts = cdf.ts()
    with np.errstate(divide="ignore"):
        s = ts[1:-1] / (1.0 - ts[1:-1])
    out = np.zeros(G + 1, dtype=np.float64)
    conv = atoms
    for k in range(1, xi.kmax + 1):
        if k > 1:
            conv = np.convolve(conv, atoms)
        p = float(xi.probs[k - 1])
        if p == 0.0:
            continue
        # conv has support {0, 1/G, ..., k}; cumulative gives the CDF
        cum = np.cumsum(conv)
        xp = np.linspace(0.0, float(k), conv.size)
        out[1:-1] += p * np.interp(s, xp, cum, left=0.0, right=1.0)
    out[0] = 0.0
    out[-1] = 1.0
    np.clip(out, 0.0, 1.0, out=out)
    np.maximum.accumulate(out, out=out)
    return DiscretizedCDF(out)


@dataclass(frozen=True)
class FixedPointResult:
    cdf: DiscretizedCDF
    iterations: int
    final_delta: float
    converged: bool
    deltas: tuple[float, ...]


def cdf_fixed_point(xi: OffspringDistribution, grid: int = 4096,
                    tol: float = 1e-6, max_iter: int = 200,
                    start: DiscretizedCDF | None = None) -> FixedPointResult:
    """Iterate the operator from a valid CDF until the sup-norm settles.

    Non-convergence within ``max_iter`` is reported in the result flag, not
    raised: grid effects can stall the sup-norm even though the iteration
    converges weakly.
    """
    current = start if start is not None else DiscretizedCDF.uniform(grid)
    if start is not None and start.grid != grid:
        raise ValidationError("start iterate does not match the grid")
    deltas: list[float] = []
    for i in range(1, max_iter + 1):
        nxt = apply_cdf_operator(current, xi)
        delta = nxt.sup_distance(current)
        deltas.append(delta)
        current = nxt
        if delta <= tol:
            return FixedPointResult(current, i, delta, True, tuple(deltas))
    return FixedPointResult(current, max_iter, deltas[-1], False, tuple(deltas))
