"""Fibertree storage for piecewise-constant tensors over real indices.

A tensor is a list of per-rank level descriptors plus one flat leaf value
array. Discrete ranks use dense levels; continuous ranks use pinpoint,
interval or regular levels whose entries are sorted, pairwise disjoint
pieces. Everything not covered by a stored piece takes the tensor's fill
value, which is how finite data denotes a function on the whole line.

Positions: level l is split into fibers, one per position of level l-1
(the root has a single fiber, position 0). A sparse fiber f owns entries
ptr[f]..ptr[f+1]; a dense fiber f owns positions f*size..(f+1)*size. Leaf
positions index ``values``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from bisect import bisect_left
from typing import Iterator, Optional, Sequence, Union

from .intervals import Interval
from .limits import ABOVE, BELOW, EPS, EXACT, Limit, as_limit


class StorageError(ValueError):
    pass


class UnsortedError(StorageError):
    def __init__(self, level: int, fiber: int, pos: int):
        super().__init__(
            f"level {level} fiber {fiber}: pieces out of order at position {pos}"
        )
        self.level, self.fiber, self.pos = level, fiber, pos


class OverlapError(StorageError):
    def __init__(self, message: str):
        super().__init__(message)
        self.level = self.fiber = self.pos = None

    @classmethod
    def stored(cls, level: int, fiber: int, pos: int) -> "OverlapError":
        err = cls(
            f"level {level} fiber {fiber}: pieces at positions {pos} and {pos + 1} overlap"
        )
        err.level, err.fiber, err.pos = level, fiber, pos
        return err


class InvalidPieceError(StorageError):
    pass


FILL = None  # payload marker for gap pieces in covers


# ---------------------------------------------------------------------------
# level descriptors


@dataclass(frozen=True)
class DenseLevel:
    size: int

    kind = "dense"
    continuous = False

    def validate(self, level: int, n_fibers: int) -> int:
        if self.size <= 0:
            raise InvalidPieceError(f"level {level}: dense size must be positive")
        return n_fibers * self.size


@dataclass(frozen=True)
class PinpointLevel:
    ptr: tuple
    crd: tuple

    kind = "pinpoint"
    continuous = True

    def validate(self, level: int, n_fibers: int) -> int:
        _check_ptr(self.ptr, level, n_fibers, len(self.crd))
        for f in range(n_fibers):
            lo, hi = self.ptr[f], self.ptr[f + 1]
            for p in range(lo, hi):
                if math.isnan(self.crd[p]) or math.isinf(self.crd[p]):
                    raise InvalidPieceError(f"level {level}: bad coordinate {self.crd[p]!r}")
                if p > lo:
                    if self.crd[p] < self.crd[p - 1]:
                        raise UnsortedError(level, f, p)
                    if self.crd[p] == self.crd[p - 1]:
                        raise OverlapError.stored(level, f, p - 1)
        return len(self.crd)

    def interval(self, p: int) -> Interval:
        return Interval.pinpoint(self.crd[p])


@dataclass(frozen=True)
class IntervalLevel:
    ptr: tuple
    left: tuple
    right: tuple
    lclose: Union[bool, tuple] = True
    rclose: Union[bool, tuple] = True

    kind = "interval"
    continuous = True

    @property
    def homogeneous(self) -> bool:
        return isinstance(self.lclose, bool) and isinstance(self.rclose, bool)

    def _lflag(self, p: int) -> bool:
        return self.lclose if isinstance(self.lclose, bool) else self.lclose[p]

    def _rflag(self, p: int) -> bool:
        return self.rclose if isinstance(self.rclose, bool) else self.rclose[p]

    def interval(self, p: int) -> Interval:
        start = Limit(self.left[p], EXACT if self._lflag(p) else ABOVE)
        stop = Limit(self.right[p], EXACT if self._rflag(p) else BELOW)
        return Interval(start, stop)

    def validate(self, level: int, n_fibers: int) -> int:
        n = len(self.left)
        if len(self.right) != n:
            raise InvalidPieceError(f"level {level}: left/right length mismatch")
        for flags in (self.lclose, self.rclose):
            if not isinstance(flags, bool) and len(flags) != n:
                raise InvalidPieceError(f"level {level}: inclusiveness flag length mismatch")
        _check_ptr(self.ptr, level, n_fibers, n)
        for v in (*self.left, *self.right):
            if math.isnan(v):
                raise InvalidPieceError(f"level {level}: NaN endpoint")
        _check_sorted_disjoint(self, level, n_fibers)
        return n


@dataclass(frozen=True)
class RegularLevel:
    """Evenly described pieces [stride*x, stride*x + length) for integer x.

    Observationally identical to the interval level it denotes; the xs
    array is the only per-entry storage. ``ptr`` may be omitted for the
    single-fiber case.
    """

    stride: float
    length: float
    rclose: bool
    xs: tuple
    ptr: Optional[tuple] = None

    kind = "regular"
    continuous = True

    def spans(self, n_fibers: int) -> tuple:
        if self.ptr is not None:
            return self.ptr
        return (0, len(self.xs))

    def interval(self, p: int) -> Interval:
        lo = self.stride * self.xs[p]
        hi = lo + self.length
        if self.length == 0:
            return Interval.pinpoint(lo)
        stop = Limit(hi, EXACT if self.rclose else BELOW)
        return Interval(Limit(lo), stop)

    def validate(self, level: int, n_fibers: int) -> int:
        if self.stride <= 0 or math.isnan(self.stride) or math.isinf(self.stride):
            raise InvalidPieceError(f"level {level}: regular stride must be positive and finite")
        if self.length < 0 or math.isnan(self.length):
            raise InvalidPieceError(f"level {level}: regular piece length must be >= 0")
        ptr = self.spans(n_fibers)
        if self.ptr is None and n_fibers != 1:
            raise InvalidPieceError(f"level {level}: regular level needs ptr for {n_fibers} fibers")
        _check_ptr(ptr, level, n_fibers, len(self.xs))
        for x in self.xs:
            if x != int(x):
                raise InvalidPieceError(f"level {level}: regular xs must be integers")
        _check_sorted_disjoint(self, level, n_fibers)
        return len(self.xs)


Level = Union[DenseLevel, PinpointLevel, IntervalLevel, RegularLevel]


def _check_ptr(ptr, level: int, n_fibers: int, n_entries: int) -> None:
    if len(ptr) != n_fibers + 1 or ptr[0] != 0 or ptr[-1] != n_entries:
        raise InvalidPieceError(
            f"level {level}: ptr must run 0..{n_entries} over {n_fibers} fibers, got {list(ptr)}"
        )
    for i in range(n_fibers):
        if ptr[i + 1] < ptr[i]:
            raise InvalidPieceError(f"level {level}: ptr not monotone at fiber {i}")


def _check_sorted_disjoint(lv, level: int, n_fibers: int) -> None:
    ptr = lv.spans(n_fibers) if isinstance(lv, RegularLevel) else lv.ptr
    for f in range(n_fibers):
        lo, hi = ptr[f], ptr[f + 1]
        prev = None
        for p in range(lo, hi):
            iv = lv.interval(p)
            if iv.is_empty:
                raise InvalidPieceError(
                    f"level {level} fiber {f}: piece at position {p} is empty ({iv})"
                )
            if prev is not None:
                if iv.start.val < prev.start.val:
                    raise UnsortedError(level, f, p)
                if not (prev.stop < iv.start):
                    raise OverlapError.stored(level, f, p - 1)
            prev = iv


def level_ptr(lv: Level, n_fibers: int) -> tuple:
    if isinstance(lv, RegularLevel):
        return lv.spans(n_fibers)
    return lv.ptr


# ---------------------------------------------------------------------------
# tensors


@dataclass(frozen=True)
class ContTensor:
    name: str
    levels: tuple
    values: tuple
    fill: Union[float, bool] = 0.0

    def __post_init__(self):
        n = 1
        fibers = []
        for i, lv in enumerate(self.levels):
            fibers.append(n)
            n = lv.validate(i, n)
        if len(self.values) != n:
            raise InvalidPieceError(
                f"tensor {self.name}: expected {n} leaf values, got {len(self.values)}"
            )
        object.__setattr__(self, "_fiber_counts", tuple(fibers))

    @property
    def ndim(self) -> int:
        return len(self.levels)

    def n_fibers(self, level: int) -> int:
        return self._fiber_counts[level]

    def n_entries(self, level: int) -> int:
        lv = self.levels[level]
        if isinstance(lv, DenseLevel):
            return self.n_fibers(level) * lv.size
        return level_ptr(lv, self.n_fibers(level))[-1]

    @property
    def is_pinpoint_tensor(self) -> bool:
        """True when every continuous rank stores zero-width pieces only."""
        for lv in self.levels:
            if isinstance(lv, (PinpointLevel,)):
                continue
            if isinstance(lv, DenseLevel):
                continue
            if isinstance(lv, RegularLevel) and lv.length == 0:
                continue
            return False
        return True

    # -- access ----------------------------------------------------------
    def fiber_entries(self, level: int, fiber: int):
        """Stored (Interval, position) pairs of one fiber, in order."""
        lv = self.levels[level]
        if isinstance(lv, DenseLevel):
            raise TypeError("dense levels have no piece entries")
        lo, hi = _span(lv, self.n_fibers(level), fiber)
        return [(lv.interval(p), p) for p in range(lo, hi)]

    def fiber_cover(self, level: int, fiber: int):
        """Entries plus reconstructed fill gaps, tiling the whole line.

        A fiber index of None (missing subtree) yields one full-line gap.
        """
        if fiber is FILL:
            return [(Interval.full(), FILL)]
        entries = self.fiber_entries(level, fiber)
        out = []
        cursor = Limit(-math.inf)
        for iv, p in entries:
            if cursor <= iv.start - EPS:
                gap = Interval(cursor, iv.start - EPS)
                if not gap.is_empty:
                    out.append((gap, FILL))
            out.append((iv, p))
            cursor = iv.stop + EPS
        tail = Interval(cursor, Limit(math.inf))
        if not tail.is_empty and (not entries or entries[-1][0].stop < Limit(math.inf)):
            out.append((tail, FILL))
        return out

    def locate(self, level: int, fiber: int, x) -> Optional[int]:
        """Position of the stored piece containing x, or None."""
        if fiber is FILL:
            return FILL
        lv = self.levels[level]
        lx = as_limit(x)
        lo, hi = _span(lv, self.n_fibers(level), fiber)
        if lo == hi:
            return FILL
        if isinstance(lv, PinpointLevel):
            i = bisect_left(lv.crd, lx.val, lo, hi)
            if i < hi and lv.crd[i] == lx.val and lx.eps == EXACT:
                return i
            return FILL
        # first piece whose stop >= x, then containment check
        i = lo
        jlo, jhi = lo, hi
        while jlo < jhi:
            mid = (jlo + jhi) // 2
            if lv.interval(mid).stop < lx:
                jlo = mid + 1
            else:
                jhi = mid
        i = jlo
        if i < hi and lv.interval(i).contains(lx):
            return i
        return FILL

    def at(self, *coords):
        """Evaluate the tensor at one point; fill where nothing is stored."""
        if len(coords) != self.ndim:
            raise TypeError(f"tensor {self.name} has {self.ndim} ranks, got {len(coords)} coords")
        pos = 0
        for level, (lv, c) in enumerate(zip(self.levels, coords)):
            if isinstance(lv, DenseLevel):
                ci = int(c)
                if ci != c or not (0 <= ci < lv.size):
                    raise IndexError(f"coordinate {c!r} outside dense rank of size {lv.size}")
                pos = pos * lv.size + ci
            else:
                pos = self.locate(level, pos, c)
                if pos is FILL:
                    return self.fill
        return self.values[pos]

    def pieces(self, include_fill: bool = False) -> Iterator[tuple]:
        """Yield (coordinate path, value) over the whole tensor.

        Paths hold ints for dense ranks and Intervals for continuous
        ranks. With include_fill, gap pieces appear with the fill value
        and full-line / None wildcards below them.
        """
        yield from self._walk(0, 0, (), include_fill)

    def _walk(self, level: int, fiber: int, path: tuple, include_fill: bool):
        if level == self.ndim:
            yield path, self.values[fiber]
            return
        lv = self.levels[level]
        if isinstance(lv, DenseLevel):
            base = fiber * lv.size
            for c in range(lv.size):
                yield from self._walk(level + 1, base + c, path + (c,), include_fill)
            return
        source = self.fiber_cover(level, fiber) if include_fill else self.fiber_entries(level, fiber)
        for iv, p in source:
            if p is FILL:
                yield path + (iv,) + self._fill_tail(level + 1), self.fill
            else:
                yield from self._walk(level + 1, p, path + (iv,), include_fill)

    def _fill_tail(self, level: int) -> tuple:
        return tuple(
            Interval.full() if lv.continuous else None for lv in self.levels[level:]
        )


def _span(lv, n_fibers: int, fiber: int):
    ptr = level_ptr(lv, n_fibers)
    if not (0 <= fiber < len(ptr) - 1):
        raise IndexError(f"fiber {fiber} out of range")
    return ptr[fiber], ptr[fiber + 1]


# ---------------------------------------------------------------------------
# builders


def _as_interval(key) -> Interval:
    if isinstance(key, Interval):
        return key
    if isinstance(key, tuple) and len(key) == 2:
        return Interval.closed(*key)
    if isinstance(key, tuple) and len(key) == 3:
        return Interval.from_kind(key[0], key[1], key[2])
    if isinstance(key, (int, float)):
        return Interval.pinpoint(key)
    raise TypeError(f"cannot read {key!r} as an interval")


def build_level(spec, fibers: Sequence[Sequence]):
    """Assemble one level from per-fiber key lists, validating as we go.

    spec: ("dense", size) | ("pinpoint",) | ("interval",)
        | ("regular", stride, length, rclose)
    fibers: for sparse kinds, one key list per fiber (coords, intervals,
        or integer xs). Dense ignores fibers.
    """
    kind = spec[0]
    if kind == "dense":
        return DenseLevel(size=spec[1])
    ptr = [0]
    for f in fibers:
        ptr.append(ptr[-1] + len(f))
    if kind == "pinpoint":
        crd = tuple(float(c) for f in fibers for c in f)
        return PinpointLevel(ptr=tuple(ptr), crd=crd)
    if kind == "interval":
        ivs = [_as_interval(k) for f in fibers for k in f]
        left, right, lflags, rflags = [], [], [], []
        for iv in ivs:
            if iv.start.eps not in (EXACT, ABOVE) or iv.stop.eps not in (EXACT, BELOW):
                raise InvalidPieceError(f"cannot store {iv} in an interval level")
            left.append(iv.start.val)
            right.append(iv.stop.val)
            lflags.append(iv.start.eps == EXACT)
            rflags.append(iv.stop.eps == EXACT)
        lclose = lflags[0] if lflags and all(x == lflags[0] for x in lflags) else tuple(lflags)
        rclose = rflags[0] if rflags and all(x == rflags[0] for x in rflags) else tuple(rflags)
        if not lflags:
            lclose, rclose = True, True
        return IntervalLevel(
            ptr=tuple(ptr), left=tuple(left), right=tuple(right), lclose=lclose, rclose=rclose
        )
    if kind == "regular":
        _, stride, length, rclose = spec
        xs = tuple(int(x) for f in fibers for x in f)
        return RegularLevel(
            stride=float(stride), length=float(length), rclose=bool(rclose),
            xs=xs, ptr=tuple(ptr) if len(fibers) != 1 else None,
        )
    raise ValueError(f"unknown level kind {kind!r}")


def build_tensor(name: str, specs: Sequence, root, fill=0.0) -> ContTensor:
    """Build a tensor from nested per-fiber structure.

    Dense fibers are plain lists (length == size) of children; sparse
    fibers are lists of (key, child) pairs. Children at the last level
    are leaf values.
    """
    levels = []
    fibers = [root]
    for spec in specs:
        kind = spec[0]
        next_fibers = []
        if kind == "dense":
            size = spec[1]
            for f in fibers:
                if len(f) != size:
                    raise InvalidPieceError(
                        f"tensor {name}: dense fiber needs exactly {size} children, got {len(f)}"
                    )
                next_fibers.extend(f)
            levels.append(build_level(spec, []))
        else:
            keys = []
            for f in fibers:
                keys.append([k for k, _ in f])
                next_fibers.extend(sub for _, sub in f)
            levels.append(build_level(spec, keys))
        fibers = next_fibers
    values = tuple(fibers)
    return ContTensor(name=name, levels=tuple(levels), values=values, fill=fill)


def tensor_1d(name: str, pieces, fill=0.0, kind: str = "auto") -> ContTensor:
    """Convenience: a rank-1 tensor from (key, value) pairs.

    kind "auto" picks a pinpoint level when every key is a bare number,
    else an interval level.
    """
    if kind == "auto":
        kind = "pinpoint" if all(isinstance(k, (int, float)) for k, _ in pieces) else "interval"
    return build_tensor(name, [(kind,)], [(k, v) for k, v in pieces], fill=fill)
