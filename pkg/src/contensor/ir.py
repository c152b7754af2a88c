"""Symbolic IR: scalar/endpoint expressions and finite plan statements.

A Plan is what lowering produces from a program plus tensor bindings: a
tree of discrete loops, co-iteration while loops, interval bindings,
guards and writes. Expressions reference bound tensors by name and leave
positions in runtime slots, so the same plan walks every fiber without
being re-derived per fiber.

Execution lives in executor.py; nothing here evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .limits import Limit


# ---------------------------------------------------------------------------
# position expressions


@dataclass(frozen=True)
class PRoot:
    def render(self) -> str:
        return "root"


@dataclass(frozen=True)
class PVar:
    slot: int
    name: str

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class PDense:
    parent: "PExpr"
    size: int
    index: "SExpr"

    def render(self) -> str:
        return f"({self.parent.render()}*{self.size} + {render(self.index)})"


PExpr = Union[PRoot, PVar, PDense]


# ---------------------------------------------------------------------------
# scalar expressions


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class BoolC:
    value: bool


@dataclass(frozen=True)
class Var:
    slot: int
    name: str


@dataclass(frozen=True)
class LeafVal:
    tensor: str
    pos: PExpr
    fill: Union[float, bool]


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Mul:
    args: tuple


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Sub:
    a: "SExpr"
    b: "SExpr"


@dataclass(frozen=True)
class Div:
    a: "SExpr"
    b: "SExpr"


@dataclass(frozen=True)
class Neg:
    a: "SExpr"


@dataclass(frozen=True)
class Not:
    a: "SExpr"


@dataclass(frozen=True)
class Cmp:
    op: str  # < <= > >= == !=
    a: "SExpr"
    b: "SExpr"


@dataclass(frozen=True)
class LenOf:
    slot: int
    name: str


@dataclass(frozen=True)
class Dif:
    """Differential marker d(i); consumed by loop collapse, never executed."""

    index: str


SExpr = Union[Num, BoolC, Var, LeafVal, Add, Mul, And, Or, Sub, Div, Neg, Not, Cmp, LenOf, Dif]


# ---------------------------------------------------------------------------
# endpoint expressions


@dataclass(frozen=True)
class LimC:
    value: Limit


@dataclass(frozen=True)
class EndRef:
    """One endpoint of a stored piece, shifted back through the access map."""

    tensor: str
    level: int
    side: str  # "L" | "R"
    pos: PExpr
    eps_off: int = 0
    shift: Optional[SExpr] = None


@dataclass(frozen=True)
class LastStop:
    """Stop of a fiber's final piece; empty fibers give Limit(-inf, -1)."""

    tensor: str
    level: int
    fiber: PExpr
    shift: Optional[SExpr] = None
    eps_off: int = 0


@dataclass(frozen=True)
class IvStart:
    slot: int
    name: str


@dataclass(frozen=True)
class IvStop:
    slot: int
    name: str


LExpr = Union[LimC, EndRef, LastStop, IvStart, IvStop]


# ---------------------------------------------------------------------------
# plan statements


@dataclass(frozen=True)
class Block:
    stmts: tuple = ()


@dataclass(frozen=True)
class DiscLoop:
    slot: int
    name: str
    lo: int
    hi: int  # inclusive
    body: "Stmt"


@dataclass(frozen=True)
class LetScalar:
    slot: int
    name: str
    expr: SExpr


@dataclass(frozen=True)
class Probe:
    """Find the piece containing a pinned coordinate; -1 when in a gap."""

    slot: int
    name: str
    tensor: str
    level: int
    parent: PExpr
    coord: SExpr


@dataclass(frozen=True)
class IntersectLet:
    slot: int
    name: str
    starts: tuple  # tuple[LExpr]
    stops: tuple
    pinpoint: bool = False


@dataclass(frozen=True)
class Guard:
    slot: int
    name: str
    body: "Stmt"


@dataclass(frozen=True)
class Cond:
    test: SExpr
    body: "Stmt"


@dataclass(frozen=True)
class Pin:
    """Collapse a loop over a pinpoint region to a scalar binding."""

    slot: int
    name: str
    iv_slot: int
    iv_name: str


@dataclass(frozen=True)
class StepperRT:
    pos_slot: int
    pos_name: str
    tensor: str
    level: int
    fiber: PExpr
    shift: Optional[SExpr] = None


@dataclass(frozen=True)
class WhileCoiter:
    range_slot: int
    range_name: str
    cursor_slot: int
    cursor_name: str
    curr_slot: int
    curr_name: str
    steppers: tuple  # tuple[StepperRT]
    body: "Stmt"


@dataclass(frozen=True)
class Accumulate:
    output: str
    path: tuple  # tuple[SExpr], discrete coordinates
    op: str  # = += |= &= max= min=
    value: SExpr
    two_tensor: bool = False


@dataclass(frozen=True)
class EmitPiece:
    """Write along a continuous output rank.

    Path components: ("d", SExpr) discrete, ("p", SExpr) pinpoint,
    ("iv", slot, name) an interval region variable.
    """

    output: str
    path: tuple
    op: str
    value: SExpr
    two_tensor: bool = False


@dataclass(frozen=True)
class SumGuard:
    """Apply a reduction only where the region has zero length.

    Emitted for += over a continuum without a differential when the
    caller opts into guard semantics; the validator rejects that shape
    otherwise, so there is no runtime-fault variant.
    """

    iv_slot: int
    iv_name: str
    body: Union[Accumulate, EmitPiece]


Stmt = Union[
    Block, DiscLoop, LetScalar, Probe, IntersectLet, Guard, Cond, Pin,
    WhileCoiter, Accumulate, EmitPiece, SumGuard,
]


@dataclass(frozen=True)
class OutputDecl:
    name: str
    comps: tuple  # ("dense", size) | ("pinpoint",) | ("interval",)
    fill: Union[float, bool]


@dataclass(frozen=True)
class Plan:
    body: Stmt
    output: OutputDecl
    n_slots: int
    bindings: dict = field(compare=False, default_factory=dict)


class Namer:
    """Allocates runtime slots with unique, stable display names."""

    def __init__(self):
        self.names = []
        self._used = set()

    def slot(self, base: str) -> tuple:
        name = base
        k = 0
        while name in self._used:
            k += 1
            name = f"{base}{k}"
        self._used.add(name)
        self.names.append(name)
        return len(self.names) - 1, name

    @property
    def count(self) -> int:
        return len(self.names)


# ---------------------------------------------------------------------------
# rendering


def _fmt_num(v: float) -> str:
    if v != v:
        return "nan"
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    if v == int(v):
        return str(int(v))
    return repr(v)


_CHAIN = {Add: " + ", Mul: "*", And: " and ", Or: " or "}


def render(e) -> str:
    """Deterministic one-line form of any expression."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, BoolC):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, LeafVal):
        return f"{e.tensor}.val[{e.pos.render()}]"
    if isinstance(e, (Add, Mul, And, Or)):
        sep = _CHAIN[type(e)]
        return "(" + sep.join(render(a) for a in e.args) + ")"
    if isinstance(e, Sub):
        return f"({render(e.a)} - {render(e.b)})"
    if isinstance(e, Div):
        return f"({render(e.a)} / {render(e.b)})"
    if isinstance(e, Neg):
        return f"(-{render(e.a)})"
    if isinstance(e, Not):
        return f"(not {render(e.a)})"
    if isinstance(e, Cmp):
        return f"({render(e.a)} {e.op} {render(e.b)})"
    if isinstance(e, LenOf):
        return f"len({e.name})"
    if isinstance(e, Dif):
        return f"d({e.index})"
    if isinstance(e, LimC):
        return str(e.value)
    if isinstance(e, EndRef):
        side = {"L": "left", "R": "right", "C": "crd"}[e.side]
        s = f"{e.tensor}.{side}[{e.pos.render()}]"
        if e.shift is not None:
            s = f"({s} - {render(e.shift)})"
        if e.eps_off > 0:
            s += "+eps" * e.eps_off
        if e.eps_off < 0:
            s += "-eps" * (-e.eps_off)
        return s
    if isinstance(e, LastStop):
        s = f"{e.tensor}.last_stop(lvl{e.level}, {e.fiber.render()})"
        if e.shift is not None:
            s = f"({s} - {render(e.shift)})"
        if e.eps_off > 0:
            s += "+eps" * e.eps_off
        if e.eps_off < 0:
            s += "-eps" * (-e.eps_off)
        return s
    if isinstance(e, IvStart):
        return f"{e.name}.start"
    if isinstance(e, IvStop):
        return f"{e.name}.stop"
    if isinstance(e, (PRoot, PVar, PDense)):
        return e.render()
    raise TypeError(f"cannot render {e!r}")


def _emit_comp(c) -> str:
    if c[0] == "d":
        return render(c[1])
    if c[0] == "p":
        return f"@{render(c[1])}"
    return c[2]


def pretty(stmt, indent: int = 0) -> str:
    """Readable indented form of a plan statement tree."""
    pad = "  " * indent
    if isinstance(stmt, Block):
        if not stmt.stmts:
            return pad + "pass"
        return "\n".join(pretty(s, indent) for s in stmt.stmts)
    if isinstance(stmt, DiscLoop):
        return (
            f"{pad}for {stmt.name} in {stmt.lo}..{stmt.hi}:\n"
            + pretty(stmt.body, indent + 1)
        )
    if isinstance(stmt, LetScalar):
        return f"{pad}let {stmt.name} = {render(stmt.expr)}"
    if isinstance(stmt, Probe):
        return (
            f"{pad}probe {stmt.name} = {stmt.tensor}.lvl{stmt.level}"
            f"[{stmt.parent.render()}].find({render(stmt.coord)})"
        )
    if isinstance(stmt, IntersectLet):
        starts = ", ".join(render(a) for a in stmt.starts)
        stops = ", ".join(render(a) for a in stmt.stops)
        tag = " (pinpoint)" if stmt.pinpoint else ""
        return f"{pad}{stmt.name} = [max({starts}), min({stops})]{tag}"
    if isinstance(stmt, Guard):
        return f"{pad}guard {stmt.name}.start <= {stmt.name}.stop:\n" + pretty(stmt.body, indent + 1)
    if isinstance(stmt, Cond):
        return f"{pad}if {render(stmt.test)}:\n" + pretty(stmt.body, indent + 1)
    if isinstance(stmt, Pin):
        return f"{pad}pin {stmt.name} = {stmt.iv_name}.start"
    if isinstance(stmt, WhileCoiter):
        lines = [f"{pad}coiterate {stmt.cursor_name} over {stmt.range_name}:"]
        for s in stmt.steppers:
            shift = f" - {render(s.shift)}" if s.shift is not None else ""
            lines.append(
                f"{pad}  stepper {s.pos_name}: {s.tensor}.lvl{s.level}"
                f"[{s.fiber.render()}]{shift}"
            )
        lines.append(f"{pad}  {stmt.curr_name} = [{stmt.cursor_name}, min stops]")
        lines.append(pretty(stmt.body, indent + 1))
        return "\n".join(lines)
    if isinstance(stmt, Accumulate):
        path = ", ".join(render(p) for p in stmt.path)
        return f"{pad}{stmt.output}[{path}] {stmt.op} {render(stmt.value)}"
    if isinstance(stmt, EmitPiece):
        path = ", ".join(_emit_comp(c) for c in stmt.path)
        return f"{pad}emit {stmt.output}[{path}] {stmt.op} {render(stmt.value)}"
    if isinstance(stmt, SumGuard):
        return f"{pad}when len({stmt.iv_name}) == 0:\n" + pretty(stmt.body, indent + 1)
    raise TypeError(f"cannot pretty-print {stmt!r}")


__all__ = [
    "PRoot", "PVar", "PDense", "PExpr",
    "Num", "BoolC", "Var", "LeafVal", "Add", "Mul", "And", "Or", "Sub", "Div",
    "Neg", "Not", "Cmp", "LenOf", "Dif", "SExpr",
    "LimC", "EndRef", "LastStop", "IvStart", "IvStop", "LExpr",
    "Block", "DiscLoop", "LetScalar", "Probe", "IntersectLet", "Guard", "Cond",
    "Pin", "StepperRT", "WhileCoiter", "Accumulate", "EmitPiece", "SumGuard",
    "Stmt", "OutputDecl", "Plan", "Namer", "render", "pretty", "replace",
]
