"""Intervals over Limit endpoints, plus unit-scale affine index maps.

Every interval is stored closed on both Limit endpoints; openness of the
underlying real interval lives in the endpoint eps tags. Intersection is
max of starts / min of stops, and emptiness is simply start > stop, so
there is no separate empty representation to normalize.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .limits import ABOVE, BELOW, EPS, EXACT, Limit, as_limit, lim_cmp


class EmptyIntervalError(ValueError):
    pass


class Interval(NamedTuple):
    start: Limit
    stop: Limit

    # -- constructors ----------------------------------------------------
    @staticmethod
    def closed(a, b) -> "Interval":
        return Interval(as_limit(a), as_limit(b))

    @staticmethod
    def right_open(a, b) -> "Interval":
        return Interval(as_limit(a), as_limit(b).below)

    @staticmethod
    def left_open(a, b) -> "Interval":
        return Interval(as_limit(a).above, as_limit(b))

    @staticmethod
    def open(a, b) -> "Interval":
        return Interval(as_limit(a).above, as_limit(b).below)

    @staticmethod
    def pinpoint(x) -> "Interval":
        lx = as_limit(x)
        return Interval(lx, lx)

    @staticmethod
    def full() -> "Interval":
        return Interval(Limit(-math.inf), Limit(math.inf))

    @staticmethod
    def from_kind(a, b, kind: str) -> "Interval":
        try:
            ctor = _KINDS[kind]
        except KeyError:
            raise ValueError(f"unknown interval kind {kind!r}") from None
        return ctor(a, b)

    # -- predicates ------------------------------------------------------
    @property
    def is_empty(self) -> bool:
        return self.start > self.stop

    @property
    def is_pinpoint(self) -> bool:
        if self.is_empty:
            raise EmptyIntervalError("empty interval has no pinpoint status")
        return self.start == self.stop and self.start.eps == EXACT

    def contains(self, x) -> bool:
        lx = as_limit(x)
        return lim_cmp(self.start, lx) <= 0 and lim_cmp(lx, self.stop) <= 0

    # -- algebra ---------------------------------------------------------
    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.start, other.start), min(self.stop, other.stop))

    def length(self) -> float:
        """Plain-real measure of the interval; eps widths do not count."""
        if self.is_empty:
            raise EmptyIntervalError(f"length of empty interval {self}")
        raw = self.stop.val - self.start.val
        return max(raw, 0.0)

    def touches_below(self, other: "Interval") -> bool:
        """True when other starts exactly one eps after self ends."""
        return other.start == self.stop + EPS

    def __str__(self) -> str:
        s, e = self.start, self.stop
        if s.eps in (EXACT, ABOVE) and e.eps in (EXACT, BELOW):
            lb = "[" if s.eps == EXACT else "("
            rb = "]" if e.eps == EXACT else ")"
            return f"{lb}{Limit(s.val)!s}, {Limit(e.val)!s}{rb}"
        return f"[{s}, {e}]"


_KINDS = {
    "closed": Interval.closed,
    "right_open": Interval.right_open,
    "left_open": Interval.left_open,
    "open": Interval.open,
}


class AffineMap(NamedTuple):
    """g(i) = scale*i + offset with scale restricted to +1 or -1.

    Unit scales keep piecewise-constant structure piecewise-constant and
    make preimages of intervals intervals again.
    """

    offset: float
    scale: int = 1

    def __call__(self, i: float) -> float:
        if self.scale not in (1, -1):
            raise ValueError("AffineMap scale must be +1 or -1")
        return self.scale * i + self.offset

    def inverse(self, x: float) -> float:
        if self.scale not in (1, -1):
            raise ValueError("AffineMap scale must be +1 or -1")
        return (x - self.offset) * self.scale

    def preimage(self, iv: Interval) -> Interval:
        """The set of i with g(i) in iv.

        For scale -1 the endpoints swap roles and their eps tags flip,
        which Limit negation already does.
        """
        if self.scale == 1:
            return Interval(iv.start - self.offset, iv.stop - self.offset)
        if self.scale == -1:
            return Interval(-(iv.stop - self.offset), -(iv.start - self.offset))
        raise ValueError("AffineMap scale must be +1 or -1")
