"""Plan cleanup: constant folding, identity writes, dead bindings.

Lowering a continuous loop enumerates every combination of stored span
versus fill tail, so most generated regions compute the fill value and
write an identity. Every rule here strictly shrinks the tree, and the
driver runs them to a fixpoint, which is what collapses that blowup
back down to the regions that can matter.
"""

from __future__ import annotations

import math
import operator

from .ir import (
    Accumulate, Add, And, Block, BoolC, Cmp, Cond, DiscLoop, Div, EmitPiece,
    EndRef, Guard, IntersectLet, IvStart, IvStop, LastStop, LeafVal, LenOf,
    LetScalar, LimC, Mul, Neg, Not, Num, Or, PDense, PRoot, PVar, Pin, Plan,
    Probe, StepperRT, Sub, SumGuard, Var, WhileCoiter,
)

_CMP = {
    "<": operator.lt, "<=": operator.le, ">": operator.gt,
    ">=": operator.ge, "==": operator.eq, "!=": operator.ne,
}


def simplify_expr(e):
    if isinstance(e, (Num, BoolC, Var, LenOf, LeafVal)):
        return e
    if isinstance(e, (Add, Mul)):
        args = []
        for a in e.args:
            a = simplify_expr(a)
            if type(a) is type(e):
                args.extend(a.args)
            else:
                args.append(a)
        consts = [a.value for a in args if isinstance(a, Num)]
        rest = [a for a in args if not isinstance(a, Num)]
        if isinstance(e, Add):
            c = sum(consts)
            if not rest:
                return Num(c)
            if c != 0.0:
                rest.append(Num(c))
        else:
            c = math.prod(consts) if consts else 1.0
            if c == 0.0:
                return Num(0.0)
            if not rest:
                return Num(c)
            if c != 1.0:
                rest.insert(0, Num(c))
        if len(rest) == 1:
            return rest[0]
        return type(e)(tuple(rest))
    if isinstance(e, (And, Or)):
        absorb = isinstance(e, Or)  # true absorbs or, false absorbs and
        args = []
        for a in e.args:
            a = simplify_expr(a)
            if type(a) is type(e):
                args.extend(a.args)
            elif isinstance(a, BoolC):
                if a.value == absorb:
                    return BoolC(absorb)
            else:
                args.append(a)
        if not args:
            return BoolC(not absorb)
        if len(args) == 1:
            return args[0]
        return type(e)(tuple(args))
    if isinstance(e, Sub):
        a, b = simplify_expr(e.a), simplify_expr(e.b)
        if isinstance(a, Num) and isinstance(b, Num):
            return Num(a.value - b.value)
        if isinstance(b, Num) and b.value == 0.0:
            return a
        return Sub(a, b)
    if isinstance(e, Div):
        a, b = simplify_expr(e.a), simplify_expr(e.b)
        if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
            return Num(a.value / b.value)
        if isinstance(b, Num) and b.value == 1.0:
            return a
        return Div(a, b)
    if isinstance(e, Neg):
        a = simplify_expr(e.a)
        if isinstance(a, Num):
            return Num(-a.value)
        if isinstance(a, Neg):
            return a.a
        return Neg(a)
    if isinstance(e, Not):
        a = simplify_expr(e.a)
        if isinstance(a, BoolC):
            return BoolC(not a.value)
        if isinstance(a, Not):
            return a.a
        return Not(a)
    if isinstance(e, Cmp):
        a, b = simplify_expr(e.a), simplify_expr(e.b)
        if isinstance(a, Num) and isinstance(b, Num):
            return BoolC(_CMP[e.op](a.value, b.value))
        return Cmp(e.op, a, b)
    return e


_IDENTITY = {"+=": 0.0, "max=": -math.inf, "min=": math.inf}
_BOOL_IDENTITY = {"|=": False, "&=": True}


def _write_is_noop(op, value, fill):
    if isinstance(value, Num):
        if op in _IDENTITY and value.value == _IDENTITY[op]:
            return True
        if op == "=" and not isinstance(fill, bool) and value.value == fill:
            return True
    if isinstance(value, BoolC):
        if op in _BOOL_IDENTITY and value.value == _BOOL_IDENTITY[op]:
            return True
        if op == "=" and isinstance(fill, bool) and value.value == fill:
            return True
    return False


def _empty(s) -> bool:
    return isinstance(s, Block) and not s.stmts


def simplify_stmt(s, fill):
    if isinstance(s, Block):
        out = []
        for x in s.stmts:
            x = simplify_stmt(x, fill)
            if isinstance(x, Block):
                out.extend(x.stmts)
            else:
                out.append(x)
        return Block(tuple(out))
    if isinstance(s, DiscLoop):
        body = simplify_stmt(s.body, fill)
        if _empty(body) or s.lo > s.hi:
            return Block()
        return DiscLoop(s.slot, s.name, s.lo, s.hi, body)
    if isinstance(s, LetScalar):
        return LetScalar(s.slot, s.name, simplify_expr(s.expr))
    if isinstance(s, Probe):
        return Probe(s.slot, s.name, s.tensor, s.level, s.parent, simplify_expr(s.coord))
    if isinstance(s, IntersectLet):
        return IntersectLet(s.slot, s.name, s.starts, s.stops, s.pinpoint)
    if isinstance(s, Guard):
        body = simplify_stmt(s.body, fill)
        if _empty(body):
            return Block()
        return Guard(s.slot, s.name, body)
    if isinstance(s, Cond):
        test = simplify_expr(s.test)
        body = simplify_stmt(s.body, fill)
        if isinstance(test, BoolC):
            return body if test.value else Block()
        if _empty(body):
            return Block()
        return Cond(test, body)
    if isinstance(s, Pin):
        return s
    if isinstance(s, WhileCoiter):
        body = simplify_stmt(s.body, fill)
        if _empty(body):
            return Block()
        return WhileCoiter(
            s.range_slot, s.range_name, s.cursor_slot, s.cursor_name,
            s.curr_slot, s.curr_name, s.steppers, body,
        )
    if isinstance(s, Accumulate):
        value = simplify_expr(s.value)
        if _write_is_noop(s.op, value, fill):
            return Block()
        return Accumulate(s.output, s.path, s.op, value, s.two_tensor)
    if isinstance(s, EmitPiece):
        value = simplify_expr(s.value)
        if _write_is_noop(s.op, value, fill):
            return Block()
        return EmitPiece(s.output, s.path, s.op, value, s.two_tensor)
    if isinstance(s, SumGuard):
        body = simplify_stmt(s.body, fill)
        if _empty(body):
            return Block()
        return SumGuard(s.iv_slot, s.iv_name, body)
    raise TypeError(f"cannot simplify {s!r}")


# ---------------------------------------------------------------------------
# dead binding elimination


def _uses_pexpr(p, acc):
    if isinstance(p, PVar):
        acc.add(p.slot)
    elif isinstance(p, PDense):
        _uses_pexpr(p.parent, acc)
        _uses_expr(p.index, acc)
    # PRoot: nothing


def _uses_lexpr(e, acc):
    if isinstance(e, (IvStart, IvStop)):
        acc.add(e.slot)
    elif isinstance(e, EndRef):
        _uses_pexpr(e.pos, acc)
        if e.shift is not None:
            _uses_expr(e.shift, acc)
    elif isinstance(e, LastStop):
        _uses_pexpr(e.fiber, acc)
        if e.shift is not None:
            _uses_expr(e.shift, acc)
    # LimC: nothing


def _uses_expr(e, acc):
    if isinstance(e, Var):
        acc.add(e.slot)
    elif isinstance(e, LenOf):
        acc.add(e.slot)
    elif isinstance(e, LeafVal):
        _uses_pexpr(e.pos, acc)
    elif isinstance(e, (Add, Mul, And, Or)):
        for a in e.args:
            _uses_expr(a, acc)
    elif isinstance(e, (Sub, Div)):
        _uses_expr(e.a, acc)
        _uses_expr(e.b, acc)
    elif isinstance(e, (Neg, Not)):
        _uses_expr(e.a, acc)
    elif isinstance(e, Cmp):
        _uses_expr(e.a, acc)
        _uses_expr(e.b, acc)
    # Num, BoolC, Dif: nothing


def used_slots(s, acc=None):
    """Slots referenced anywhere below s, not counting binding positions."""
    if acc is None:
        acc = set()
    if isinstance(s, Block):
        for x in s.stmts:
            used_slots(x, acc)
    elif isinstance(s, DiscLoop):
        used_slots(s.body, acc)
    elif isinstance(s, LetScalar):
        _uses_expr(s.expr, acc)
    elif isinstance(s, Probe):
        _uses_pexpr(s.parent, acc)
        _uses_expr(s.coord, acc)
    elif isinstance(s, IntersectLet):
        for a in s.starts + s.stops:
            _uses_lexpr(a, acc)
    elif isinstance(s, Guard):
        acc.add(s.slot)
        used_slots(s.body, acc)
    elif isinstance(s, Cond):
        _uses_expr(s.test, acc)
        used_slots(s.body, acc)
    elif isinstance(s, Pin):
        acc.add(s.iv_slot)
    elif isinstance(s, WhileCoiter):
        acc.add(s.range_slot)
        for st in s.steppers:
            _uses_pexpr(st.fiber, acc)
            if st.shift is not None:
                _uses_expr(st.shift, acc)
        used_slots(s.body, acc)
    elif isinstance(s, Accumulate):
        for p in s.path:
            _uses_expr(p, acc)
        _uses_expr(s.value, acc)
    elif isinstance(s, EmitPiece):
        for c in s.path:
            if c[0] == "iv":
                acc.add(c[1])
            else:
                _uses_expr(c[1], acc)
        _uses_expr(s.value, acc)
    elif isinstance(s, SumGuard):
        acc.add(s.iv_slot)
        used_slots(s.body, acc)
    return acc


def _drop_dead(s, used):
    """Remove binders whose slot is never read; one sweep."""
    if isinstance(s, Block):
        out = []
        for x in s.stmts:
            x = _drop_dead(x, used)
            if not _empty(x):
                out.append(x)
        return Block(tuple(out))
    if isinstance(s, (LetScalar, Probe, IntersectLet, Pin)) and s.slot not in used:
        return Block()
    if isinstance(s, DiscLoop):
        return DiscLoop(s.slot, s.name, s.lo, s.hi, _drop_dead(s.body, used))
    if isinstance(s, Guard):
        return Guard(s.slot, s.name, _drop_dead(s.body, used))
    if isinstance(s, Cond):
        return Cond(s.test, _drop_dead(s.body, used))
    if isinstance(s, WhileCoiter):
        return WhileCoiter(
            s.range_slot, s.range_name, s.cursor_slot, s.cursor_name,
            s.curr_slot, s.curr_name, s.steppers, _drop_dead(s.body, used),
        )
    if isinstance(s, SumGuard):
        return SumGuard(s.iv_slot, s.iv_name, _drop_dead(s.body, used))
    return s


def simplify_body(body, fill):
    while True:
        nxt = simplify_stmt(body, fill)
        nxt = _drop_dead(nxt, used_slots(nxt))
        if nxt == body:
            return body
        body = nxt


def simplify_plan(plan: Plan) -> Plan:
    body = simplify_body(plan.body, plan.output.fill)
    return Plan(body=body, output=plan.output, n_slots=plan.n_slots, bindings=plan.bindings)
