"""Rotor distribution matrices, the good-children law, and the
recurrence/transience classification it induces.

A rotor matrix is lower triangular: row ``k`` is a distribution over
``l = 0..k`` and a vertex with ``k`` children draws its rotor as ``k - l``.
A child index ``j`` is *good* when the rotor sits strictly below it: the walk
serves good children before the parent, so infinite all-good lines of descent
are the only escape routes.  The number of good children of a random vertex
follows the product law ``xi . Q``; its mean against 1 decides recurrence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .gw_tree import (
    Node,
    OffspringDistribution,
    TreeArena,
    UsageError,
    ValidationError,
    _is_exact,
    _PROB_SUM_TOL,
)

#: Classification boundary ties (mean good children == 1) count as recurrent.
_CLASSIFY_TOL = 1e-12


def parse_number(text) -> Fraction | float:
    """Parse ``"a/b"``, decimal strings, and plain numbers.

    Strings become exact fractions whenever possible so that boundary
    classifications cannot flip on floating point noise.
    """
    if isinstance(text, (Fraction, int)):
        return text
    if isinstance(text, float):
        return text
    if isinstance(text, str):
        try:
            return Fraction(text.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse number {text!r}") from exc
    raise ValidationError(f"cannot parse number {text!r}")


class RotorMatrix:
    """Lower-triangular matrix of rotor row distributions Q_1..Q_kmax."""

    def __init__(self, rows: Sequence[Sequence]):
        rows = tuple(tuple(r) for r in rows)
        if not rows:
            raise ValidationError("rotor matrix needs at least row k=1")
        for k, row in enumerate(rows, start=1):
            if len(row) != k + 1:
                raise ValidationError(
                    f"row for k={k} must have {k + 1} entries, got {len(row)}")
            for q in row:
                if not isinstance(q, (int, float, Fraction)):
                    raise ValidationError(f"rotor entries must be numeric, got {q!r}")
                if q < 0:
                    raise ValidationError(f"negative rotor probability {q!r}")
            total = sum(row)
            if abs(total - 1) > _PROB_SUM_TOL:
                raise ValidationError(
                    f"rotor row k={k} sums to {float(total)}, not 1")
        self.rows = rows
        self._cum = [None] + [
            self._cumrow(row) for row in rows
        ]

    @staticmethod
    def _cumrow(row) -> np.ndarray:
        cum = np.cumsum(np.asarray([float(q) for q in row]))
        cum[-1] = 1.0
        return cum

    @classmethod
    def uniform(cls, kmax: int) -> "RotorMatrix":
        """Rows Q_k uniform on {0..k}; kept as exact fractions."""
        if kmax < 1:
            raise ValidationError("uniform rotor matrix needs kmax >= 1")
        return cls([[Fraction(1, k + 1)] * (k + 1) for k in range(1, kmax + 1)])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "RotorMatrix":
        return cls([[parse_number(q) for q in row] for row in rows])

    @classmethod
    def from_config(cls, source, kmax: int | None = None) -> "RotorMatrix":
        """Load from a config file, JSON text, or the keyword ``uniform``.

        Accepted shapes: the bare string ``"uniform"`` (requires ``kmax``),
        a JSON list of rows, or a JSON object ``{"q": ...}`` with an optional
        ``"k_max"``.  Entries may be numbers or ``"a/b"`` strings.
        """
        if isinstance(source, (str, Path)) and Path(str(source)).is_file():
            source = Path(str(source)).read_text()
        if isinstance(source, str):
            text = source.strip()
            if text.lower() == "uniform":
                if kmax is None:
                    raise ValidationError("uniform rotor matrix needs kmax")
                return cls.uniform(kmax)
            try:
                source = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"cannot parse rotor config: {exc}") from exc
        if isinstance(source, dict):
            if "k_max" in source:
                kmax = int(source["k_max"])
            source = source.get("q", source.get("rows"))
            if source is None:
                raise ValidationError("rotor config object needs a 'q' or 'rows' key")
            if isinstance(source, str):
                return cls.from_config(source, kmax=kmax)
        if isinstance(source, (list, tuple)):
            return cls.from_rows(source)
        raise ValidationError(f"unsupported rotor config {source!r}")

    @property
    def kmax(self) -> int:
        return len(self.rows)

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(row) for row in self.rows)

    def row(self, k: int) -> tuple:
        if not 1 <= k <= self.kmax:
            raise ValidationError(f"no rotor row for k={k} (kmax={self.kmax})")
        return self.rows[k - 1]

    def cumulative_row(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.kmax:
            raise ValidationError(f"no rotor row for k={k} (kmax={self.kmax})")
        return self._cum[k]

    def sample(self, d: int, rng: np.random.Generator) -> int:
        row = self.cumulative_row(d)
        loc = int(np.searchsorted(row, rng.random(), side="right"))
        if loc > d:
            loc = d
        return d - loc


def sample_rotor(d: int, q: RotorMatrix, rng: np.random.Generator) -> int:
    """One rotor draw for a vertex with ``d`` children."""
    return q.sample(d, rng)


def good_children(node: Node) -> set[int]:
    """Child indices (1-based) the walk will serve before the parent."""
    if node.children is None:
        raise UsageError(f"node {node.id} has unsampled children")
    if node.rotor is None:
        raise UsageError(f"node {node.id} has no rotor set")
    return set(range(node.rotor + 1, len(node.children) + 1))


@dataclass(frozen=True)
class GoodChildrenLaw:
    """Distribution (nu_0, ..., nu_kmax) of the number of good children."""

    probs: tuple

    def __init__(self, probs: Sequence):
        probs = tuple(probs)
        for p in probs:
            if p < 0:
                raise ValidationError(f"negative probability {p!r}")
        total = sum(probs)
        if abs(total - 1) > _PROB_SUM_TOL:
            raise ValidationError(f"good-children law sums to {float(total)}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self):
        return sum(l * p for l, p in enumerate(self.probs))

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.probs)


def good_children_law(xi: OffspringDistribution, q: RotorMatrix) -> GoodChildrenLaw:
    """Product law ``xi . Q``: mixes rotor rows by the offspring weights."""
    if q.kmax < xi.kmax:
        raise ValidationError(
            f"rotor matrix covers k<={q.kmax} but offspring reach {xi.kmax}")
    exact = xi.is_exact and q.is_exact
    zero = Fraction(0) if exact else 0.0
    probs = []
    for l in range(xi.kmax + 1):
        acc = zero
        for k in range(max(l, 1), xi.kmax + 1):
            p = xi.probs[k - 1]
            if p == 0:
                continue
            acc += p * q.row(k)[l]
        probs.append(acc)
    return GoodChildrenLaw(probs)


class Classification(Enum):
    RECURRENT = "recurrent"
    TRANSIENT = "transient"


def classify(xi: OffspringDistribution, q: RotorMatrix) -> Classification:
    """Recurrent iff the mean number of good children is at most 1.

    Exact rational arithmetic is used whenever the inputs are exact, so the
    boundary case (mean exactly 1) never flips on rounding.
    """
    law = good_children_law(xi, q)
    mean = law.mean
    if law.is_exact:
        recurrent = mean <= 1
    else:
        recurrent = float(mean) <= 1 + _CLASSIFY_TOL
    return Classification.RECURRENT if recurrent else Classification.TRANSIENT


def make_arena(xi: OffspringDistribution, q: RotorMatrix, seed: int) -> TreeArena:
    """Arena whose rotors are realised lazily from the matrix ``q``."""
    if q.kmax < xi.kmax:
        raise ValidationError(
            f"rotor matrix covers k<={q.kmax} but offspring reach {xi.kmax}")
    return TreeArena(xi, seed, rotor_matrix=q)
