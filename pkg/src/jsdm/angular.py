"""Interval-set algebra on the spatial-frequency circle [-1/2, 1/2).

Angular occupancy of a user channel is a finite union of intervals of
normalized spatial frequency.  The domain is circular: +1/2 and -1/2 are
the same point, and an interval may wrap through it.  All values are
immutable and all operations are pure, so sets can be shared freely.

Conventions:

* Intervals are half-open ``[lo, hi)``.  Bins therefore partition the
  circle exactly and boundary points are never double counted.
* A wrapped interval (``hi < lo``) is stored internally as two
  non-wrapping pieces; constructors accept the wrapped form.
* Endpoints closer than ``MERGE_TOL`` are considered abutting and are
  merged during canonicalization (endpoints derived from arcsines are
  computed, not exact).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

MERGE_TOL = 1e-12


def wrap_frequency(x: float) -> float:
    """Map a spatial frequency onto [-1/2, 1/2)."""
    return (x + 0.5) % 1.0 - 0.5


@dataclass(frozen=True)
class AngularInterval:
    """Half-open arc [lo, hi) on the circle; wraps through +-1/2 when hi < lo."""

    lo: float
    hi: float

    def __post_init__(self):
        object.__setattr__(self, "lo", wrap_frequency(self.lo))
        object.__setattr__(self, "hi", wrap_frequency(self.hi))
        if self.lo == self.hi:
            raise ValueError(
                "degenerate interval (lo == hi); the empty set is AngularSet.empty()"
            )

    @property
    def wraps(self) -> bool:
        return self.hi < self.lo

    @property
    def measure(self) -> float:
        if self.wraps:
            return 1.0 - (self.lo - self.hi)
        return self.hi - self.lo

    def pieces(self) -> tuple[tuple[float, float], ...]:
        """The interval as one or two non-wrapping (lo, hi) pieces."""
        if not self.wraps:
            return ((self.lo, self.hi),)
        out = []
        if self.lo < 0.5:
            out.append((self.lo, 0.5))
        if self.hi > -0.5:
            out.append((-0.5, self.hi))
        return tuple(out)


IntervalLike = Union[AngularInterval, Sequence[float]]


def _split(item: IntervalLike) -> tuple[tuple[float, float], ...]:
    if isinstance(item, AngularInterval):
        return item.pieces()
    lo, hi = item
    # Raw pairs may be pieces straight from another set; only re-wrap when
    # the pair leaves the principal domain.
    if -0.5 <= lo < hi <= 0.5:
        return ((lo, hi),)
    return AngularInterval(lo, hi).pieces()


def _canonicalize(pieces: Iterable[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    kept = [(lo, hi) for lo, hi in pieces if hi - lo > MERGE_TOL]
    kept.sort()
    merged: list[list[float]] = []
    for lo, hi in kept:
        if merged and lo <= merged[-1][1] + MERGE_TOL:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)


class AngularSet:
    """Canonical finite union of disjoint, non-abutting arcs.

    The canonical form (sorted non-wrapping pieces, wraps cut at +-1/2) is
    unique, so sets with equal membership compare equal structurally.
    """

    __slots__ = ("_pieces", "_los")

    def __init__(self, intervals: Iterable[IntervalLike] = ()):
        raw: list[tuple[float, float]] = []
        for item in intervals:
            raw.extend(_split(item))
        self._pieces = _canonicalize(raw)
        self._los = [lo for lo, _ in self._pieces]

    @classmethod
    def _from_pieces(cls, pieces: Iterable[tuple[float, float]]) -> "AngularSet":
        out = object.__new__(cls)
        out._pieces = _canonicalize(pieces)
        out._los = [lo for lo, _ in out._pieces]
        return out

    @classmethod
    def empty(cls) -> "AngularSet":
        return cls()

    @classmethod
    def full(cls) -> "AngularSet":
        return cls._from_pieces([(-0.5, 0.5)])

    @classmethod
    def from_interval(cls, lo: float, hi: float) -> "AngularSet":
        return cls([AngularInterval(lo, hi)])

    @property
    def pieces(self) -> tuple[tuple[float, float], ...]:
        return self._pieces

    @property
    def is_empty(self) -> bool:
        return not self._pieces

    @property
    def measure(self) -> float:
        return sum(hi - lo for lo, hi in self._pieces)

    def intervals(self) -> Iterator[AngularInterval]:
        """Yield the member arcs, re-joining the two pieces of a wrap."""
        pieces = list(self._pieces)
        if (
            len(pieces) >= 2
            and pieces[0][0] <= -0.5 + MERGE_TOL
            and pieces[-1][1] >= 0.5 - MERGE_TOL
            and self.measure < 1.0 - MERGE_TOL
        ):
            first, last = pieces.pop(0), pieces.pop()
            pieces.append((last[0], first[1]))
        for lo, hi in pieces:
            yield AngularInterval(lo, hi)

    def contains(self, x: float) -> bool:
        x = wrap_frequency(x)
        i = bisect_right(self._los, x) - 1
        return i >= 0 and x < self._pieces[i][1]

    def union(self, other: "AngularSet") -> "AngularSet":
        return AngularSet._from_pieces(self._pieces + other._pieces)

    def intersect(self, other: "AngularSet") -> "AngularSet":
        out = []
        for alo, ahi in self._pieces:
            for blo, bhi in other._pieces:
                lo, hi = max(alo, blo), min(ahi, bhi)
                if hi > lo:
                    out.append((lo, hi))
        return AngularSet._from_pieces(out)

    def complement(self) -> "AngularSet":
        out = []
        cursor = -0.5
        for lo, hi in self._pieces:
            if lo > cursor:
                out.append((cursor, lo))
            cursor = hi
        if cursor < 0.5:
            out.append((cursor, 0.5))
        return AngularSet._from_pieces(out)

    def difference(self, other: "AngularSet") -> "AngularSet":
        return self.intersect(other.complement())

    def translate(self, delta: float) -> "AngularSet":
        """Rotate the whole set by delta (mod 1) around the circle."""
        if self.measure >= 1.0 - MERGE_TOL:
            return AngularSet.full()
        shifted = []
        for lo, hi in self._pieces:
            nlo, nhi = wrap_frequency(lo + delta), wrap_frequency(hi + delta)
            if nlo == nhi:  # piece of (numerically) full width
                return AngularSet.full()
            shifted.extend(AngularInterval(nlo, nhi).pieces())
        return AngularSet._from_pieces(shifted)

    def approx_equal(self, other: "AngularSet", tol: float = 1e-9) -> bool:
        """True when the symmetric difference has measure at most tol."""
        return (self.difference(other).measure + other.difference(self).measure) <= tol

    __or__ = union
    __and__ = intersect
    __sub__ = difference
    __invert__ = complement

    def __eq__(self, other) -> bool:
        if not isinstance(other, AngularSet):
            return NotImplemented
        return self._pieces == other._pieces

    def __hash__(self) -> int:
        return hash(self._pieces)

    def __bool__(self) -> bool:
        return not self.is_empty

    def __repr__(self) -> str:
        body = ", ".join(f"[{lo:.6g}, {hi:.6g})" for lo, hi in self._pieces)
        return f"AngularSet({body})"


def union(a: AngularSet, b: AngularSet) -> AngularSet:
    return a.union(b)


def intersect(a: AngularSet, b: AngularSet) -> AngularSet:
    return a.intersect(b)


def difference(a: AngularSet, b: AngularSet) -> AngularSet:
    return a.difference(b)


def measure(a: AngularSet) -> float:
    return a.measure


def is_effectively_empty(a: AngularSet, epsilon: float) -> bool:
    """True iff measure(a) < epsilon (strict; with epsilon = 0 nothing qualifies)."""
    return a.measure < epsilon


def angular_bin(i: int, m: int) -> AngularInterval:
    """Bin i of the m-way quantization of the circle.

    Bin i has width 1/m and is centered at i/m - 1/2, wrapped into
    [-1/2, 1/2); bin 0 straddles the wrap point.
    """
    if not 0 <= i < m:
        raise IndexError(f"bin index {i} out of range for {m} bins")
    center = i / m - 0.5
    half = 0.5 / m
    return AngularInterval(wrap_frequency(center - half), wrap_frequency(center + half))


def bin_index(f: float, m: int) -> int:
    """Index of the bin containing spatial frequency f."""
    f = wrap_frequency(f)
    return int((f + 0.5) * m + 0.5) % m
