"""Per-level iteration templates over real-line fibers.

Each continuous fiber unfurls into a two-phase sequence: the stored span
(walked by a stepper, alternating gap and piece segments) followed by an
unbounded fill tail. Templates are symbolic - endpoints are expression
nodes over a runtime position - so the compiler can merge several of
them into one co-iterating loop. ``concrete_walk`` interprets a template
directly against one fiber; it exists to pin the encoding to the storage
layer's own cover and as a reference for the executor's stepping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .intervals import Interval
from .limits import EPS, Limit
from .storage import (
    FILL, ContTensor, DenseLevel, PinpointLevel, RegularLevel, level_ptr,
)
from .ir import EndRef, LastStop, LimC, LExpr, PExpr, PVar, SExpr


def static_pinpoint(level) -> bool:
    """Every piece of this level is a single point, known statically."""
    if isinstance(level, PinpointLevel):
        return True
    return isinstance(level, RegularLevel) and level.length == 0


@dataclass(frozen=True)
class Run:
    """A segment with one uniform payload: FILL, or a descent position."""

    payload: object


@dataclass(frozen=True)
class Descend:
    """Payload marker: the access continues below at this position."""

    pos: PExpr


@dataclass(frozen=True)
class Phase:
    stop: LExpr
    body: object  # Run | StepperCue
    pinpoint: bool = False


@dataclass(frozen=True)
class Sequence:
    phases: tuple


@dataclass(frozen=True)
class StepperCue:
    """Stepper over one fiber's entries; builds per-position phases."""

    tensor: str
    level: int
    fiber: PExpr
    shift: Optional[SExpr] = None
    pinpoint: bool = False
    fill: Union[float, bool] = 0.0

    def left(self, pos: PExpr) -> LExpr:
        return EndRef(self.tensor, self.level, "C" if self.pinpoint else "L", pos, 0, self.shift)

    def right(self, pos: PExpr) -> LExpr:
        return EndRef(self.tensor, self.level, "C" if self.pinpoint else "R", pos, 0, self.shift)

    def gap_stop(self, pos: PExpr) -> LExpr:
        return EndRef(self.tensor, self.level, "C" if self.pinpoint else "L", pos, -1, self.shift)

    def gap_phase(self, pos: PExpr) -> Phase:
        return Phase(stop=self.gap_stop(pos), body=Run(FILL))

    def piece_phase(self, pos: PExpr) -> Phase:
        return Phase(stop=self.right(pos), body=Run(Descend(pos)), pinpoint=self.pinpoint)

    def phases(self, pos: PExpr) -> tuple:
        return (self.gap_phase(pos), self.piece_phase(pos))


def unfurl(tensor: ContTensor, level_idx: int, fiber: PExpr,
           shift: Optional[SExpr] = None) -> Sequence:
    """Template for walking one continuous fiber over the whole line."""
    level = tensor.levels[level_idx]
    if isinstance(level, DenseLevel):
        raise TypeError("dense ranks are iterated by counting, not unfurled")
    cue = StepperCue(
        tensor=tensor.name, level=level_idx, fiber=fiber, shift=shift,
        pinpoint=static_pinpoint(level), fill=tensor.fill,
    )
    return Sequence(phases=(
        Phase(stop=LastStop(tensor.name, level_idx, fiber, shift), body=cue),
        Phase(stop=LimC(Limit(math.inf)), body=Run(FILL)),
    ))


# ---------------------------------------------------------------------------
# concrete evaluation (reference semantics; executor mirrors this)


def last_stop_value(tensor: ContTensor, level_idx: int, fiber: int) -> Limit:
    """Stop of the fiber's final piece; just below -inf when empty.

    The below--inf value makes the stored-span phase range empty, so an
    empty fiber falls through to the fill tail with no special case.
    """
    lo, hi = _span_of(tensor, level_idx, fiber)
    if lo == hi:
        return Limit(-math.inf, -1)
    return tensor.levels[level_idx].interval(hi - 1).stop


def seek_pos(tensor: ContTensor, level_idx: int, lo: int, hi: int, target: Limit) -> int:
    """First position in [lo, hi) whose piece stop is >= target."""
    lv = tensor.levels[level_idx]
    while lo < hi:
        mid = (lo + hi) // 2
        if lv.interval(mid).stop < target:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _span_of(tensor: ContTensor, level_idx: int, fiber: int):
    ptr = level_ptr(tensor.levels[level_idx], tensor.n_fibers(level_idx))
    return ptr[fiber], ptr[fiber + 1]


def _eval_lx(e, tensor: ContTensor, env: dict) -> Limit:
    if isinstance(e, LimC):
        return e.value
    if isinstance(e, LastStop):
        if e.shift is not None:
            raise NotImplementedError("walker evaluates unshifted templates only")
        ls = last_stop_value(tensor, e.level, _eval_pos(e.fiber, env))
        return Limit(ls.val, max(-1, min(1, ls.eps + e.eps_off)))
    if isinstance(e, EndRef):
        if e.shift is not None:
            raise NotImplementedError("walker evaluates unshifted templates only")
        p = _eval_pos(e.pos, env)
        iv = tensor.levels[e.level].interval(p)
        base = {"L": iv.start, "R": iv.stop, "C": iv.start}[e.side]
        return Limit(base.val, max(-1, min(1, base.eps + e.eps_off)))
    raise TypeError(f"walker cannot evaluate {e!r}")


def _eval_pos(p, env: dict) -> int:
    if isinstance(p, PVar):
        return env[p.slot]
    raise TypeError(f"walker cannot evaluate position {p!r}")


def concrete_walk(tensor: ContTensor, level_idx: int, fiber: int):
    """Interpret the fiber's template, yielding (Interval, payload) regions.

    Payloads are FILL or entry positions; the result tiles the line and
    must agree with ContTensor.fiber_cover.
    """
    seq = unfurl(tensor, level_idx, PVar(0, "f"))
    env = {0: fiber}
    out = []
    cursor = Limit(-math.inf)
    for ph in seq.phases:
        stop = _eval_lx(ph.stop, tensor, env)
        if Interval(cursor, stop).is_empty:
            continue
        if isinstance(ph.body, Run):
            out.append((Interval(cursor, stop), ph.body.payload))
            cursor = stop + EPS
            continue
        cue = ph.body
        lo, hi = _span_of(tensor, level_idx, fiber)
        pos_var = PVar(1, "p")
        for p in range(seek_pos(tensor, level_idx, lo, hi, cursor), hi):
            env[1] = p
            gap_stop = _eval_lx(cue.gap_stop(pos_var), tensor, env)
            if not Interval(cursor, gap_stop).is_empty:
                out.append((Interval(cursor, gap_stop), FILL))
                cursor = gap_stop + EPS
            piece_stop = _eval_lx(cue.piece_phase(pos_var).stop, tensor, env)
            out.append((Interval(cursor, piece_stop), p))
            cursor = piece_stop + EPS
        if cursor != stop + EPS:
            raise AssertionError("stepper did not consume its phase range")
    return out


__all__ = [
    "Run", "Descend", "Phase", "Sequence", "StepperCue", "static_pinpoint",
    "unfurl", "concrete_walk", "last_stop_value", "seek_pos",
]
