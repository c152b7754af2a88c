"""Lowering: a validated program plus tensor bindings becomes a Plan.

The strategy, per continuous loop:

1. Find the accesses the loop index drives next (its participants).
2. Case-split each participant into stored span versus fill tail; every
   combination becomes a clipped region (IntersectLet + Guard).
3. Inside span regions, co-iterate the participants' pieces with one
   while loop, splitting each step into gap/piece combinations the same
   way.
4. A region known to be a single point pins the index to a scalar,
   which unlocks probes into the remaining accesses; otherwise the index
   stays regional and the assignment collapses it (an emitted piece, a
   length factor for d(idx), or nothing for idempotent ops).

When one participant stores only isolated points, it alone is stepped
and the others are probed after pinning; their values in gap regions
are unresolvable then, which is sound only when the pinning tensor's
fill annihilates them. Simplification performs that annihilation; any
survivor is reported as an internal lowering failure rather than being
guessed at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from itertools import product

from .lang import (
    EAccess, EBin, EBool, EDif, ENum, EUn, EVar, IDEMPOTENT_OPS, Program,
    SAssign, SFor, SIf, SLet, affine_terms, validate,
)
from .limits import Limit
from .looplets import static_pinpoint
from .storage import ContTensor, DenseLevel
from .ir import (
    Accumulate, Add, And, Block, BoolC, Cmp, Cond, DiscLoop, Div, EmitPiece,
    EndRef, Guard, IntersectLet, IvStart, IvStop, LastStop, LeafVal, LenOf,
    LetScalar, LimC, Mul, Namer, Neg, Not, Num, Or, OutputDecl, PDense, PRoot,
    PVar, Pin, Plan, Probe, StepperRT, Sub, SumGuard, Var, WhileCoiter,
)
from .simplify import simplify_expr, simplify_plan, _write_is_noop


class CompileError(ValueError):
    """User-level problem: bad bindings, unbound tensors, bad shapes."""


class ValidityError(CompileError):
    def __init__(self, diags):
        super().__init__("; ".join(str(d) for d in diags))
        self.diags = diags


class UnloweredError(RuntimeError):
    """Internal invariant breach: the plan would not be finite/faithful."""


@dataclass(frozen=True)
class _Access:
    tensor: ContTensor
    idx: tuple  # ((const, vars), ...) per rank
    pos: object = PRoot()
    rank: int = 0
    miss: bool = False
    poison: bool = False


class _Ctx:
    def __init__(self, namer, bindings, difs, loops, shared):
        self.namer = namer
        self.bindings = bindings
        self.difs = difs
        self.loops = loops  # var -> SFor
        self.shared = shared  # {"decl": OutputDecl|None, "op": str}
        self.scalars = {}  # var -> Var
        self.accesses = {}  # id(EAccess) -> _Access
        self.pending = {}  # var -> (iv_slot, iv_name)

    def fork(self):
        c = _Ctx(self.namer, self.bindings, self.difs, self.loops, self.shared)
        c.scalars = dict(self.scalars)
        c.accesses = dict(self.accesses)
        c.pending = dict(self.pending)
        return c


# ---------------------------------------------------------------------------
# collection


def _walk_lang_exprs(e, acc):
    acc.append(e)
    if isinstance(e, (EBin,)):
        _walk_lang_exprs(e.a, acc)
        _walk_lang_exprs(e.b, acc)
    elif isinstance(e, EUn):
        _walk_lang_exprs(e.a, acc)
    elif isinstance(e, EAccess):
        for ix in e.indices:
            _walk_lang_exprs(ix, acc)


def _collect(program):
    """All input accesses, loops, differentials and the assignment."""
    loops = {}
    exprs = []
    assign = [None]

    def stmts(body):
        for s in body:
            if isinstance(s, SFor):
                loops[s.var] = s
                stmts(s.body)
            elif isinstance(s, SIf):
                _walk_lang_exprs(s.cond, exprs)
                stmts(s.body)
            elif isinstance(s, SLet):
                _walk_lang_exprs(s.expr, exprs)
            elif isinstance(s, SAssign):
                assign[0] = s
                _walk_lang_exprs(s.rhs, exprs)

    stmts(program.body)
    accesses = [e for e in exprs if isinstance(e, EAccess)]
    difs = {e.index for e in exprs if isinstance(e, EDif)}
    return loops, accesses, difs, assign[0]


# ---------------------------------------------------------------------------
# value building


def _affine_expr(const, vars, ctx):
    args = [ctx.scalars[v] for v in vars]
    if const != 0.0 or not args:
        args.append(Num(const))
    if len(args) == 1:
        return args[0]
    return Add(tuple(args))


def _shift_expr(entry, var, ctx):
    """Access-map shift for one rank: everything except the loop index."""
    const, vars = entry
    others = [v for v in vars if v != var]
    if const == 0.0 and not others:
        return None
    return _affine_expr(const, others, ctx)


def _fill_const(t: ContTensor):
    return BoolC(t.fill) if isinstance(t.fill, bool) else Num(t.fill)


_BIN = {"+": Add, "*": Mul, "&&": And, "||": Or}


def _build_value(e, ctx, leaves):
    if isinstance(e, ENum):
        return Num(e.value)
    if isinstance(e, EBool):
        return BoolC(e.value)
    if isinstance(e, EVar):
        # unresolved names can only survive in regions a fill constant kills
        return ctx.scalars.get(e.name) or Var(-1, e.name)
    if isinstance(e, EAccess):
        a = ctx.accesses[id(e)]
        if a.miss:
            return _fill_const(a.tensor)
        if a.poison or a.rank != a.tensor.ndim:
            return LeafVal(a.tensor.name, PVar(-1, "unresolved"), a.tensor.fill)
        leaves.append(a.pos)
        return LeafVal(a.tensor.name, a.pos, a.tensor.fill)
    if isinstance(e, EBin):
        a = _build_value(e.a, ctx, leaves)
        b = _build_value(e.b, ctx, leaves)
        if e.op in _BIN:
            return _BIN[e.op]((a, b))
        if e.op == "-":
            return Sub(a, b)
        if e.op == "/":
            return Div(a, b)
        return Cmp(e.op, a, b)
    if isinstance(e, EUn):
        a = _build_value(e.a, ctx, leaves)
        return Neg(a) if e.op == "-" else Not(a)
    raise UnloweredError(f"cannot lower {e!r} to a value")


def _flatten_mul(e):
    if isinstance(e, EBin) and e.op == "*":
        return _flatten_mul(e.a) + _flatten_mul(e.b)
    return [e]


def _summand_value(rhs, ctx):
    """Assignment value with d() factors stripped; returns (expr, leaf count)."""
    leaves = []
    factors = [f for f in _flatten_mul(rhs) if not isinstance(f, EDif)]
    if not factors:
        return Num(1.0), 0
    built = [_build_value(f, ctx, leaves) for f in factors]
    value = built[0] if len(built) == 1 else Mul(tuple(built))
    return value, len(leaves)


# ---------------------------------------------------------------------------
# advancement: resolve ranks whose index is now a scalar


def _advance(ctx, out):
    changed = True
    while changed:
        changed = False
        for key, a in list(ctx.accesses.items()):
            if a.miss or a.poison or a.rank >= a.tensor.ndim:
                continue
            const, vars = a.idx[a.rank]
            if not all(v in ctx.scalars for v in vars):
                continue
            coord = _affine_expr(const, vars, ctx)
            lv = a.tensor.levels[a.rank]
            if isinstance(lv, DenseLevel):
                pos = PDense(a.pos, lv.size, coord)
            else:
                slot, name = ctx.namer.slot(f"q_{a.tensor.name}{a.rank}")
                out.append(Probe(slot, name, a.tensor.name, a.rank, a.pos, coord))
                pos = PVar(slot, name)
            ctx.accesses[key] = dc_replace(a, pos=pos, rank=a.rank + 1)
            changed = True


# ---------------------------------------------------------------------------
# statement lowering


def _lower_block(stmts, ctx):
    out = []
    for s in stmts:
        if isinstance(s, SFor):
            if s.continuous:
                out.extend(_lower_cont(s, ctx))
            else:
                out.extend(_lower_disc(s, ctx))
        elif isinstance(s, SIf):
            c2 = ctx.fork()
            leaves = []
            test = simplify_expr(_build_value(s.cond, c2, leaves))
            # numeric conditions follow truthiness, like the interpreter
            if test == BoolC(False) or test == Num(0.0):
                continue  # this region misses the condition's tensor entirely
            inner = _lower_block(s.body, c2)
            if not inner:
                continue
            if test == BoolC(True) or (isinstance(test, Num) and test.value):
                out.extend(inner)
            else:
                out.append(Cond(test, Block(tuple(inner))))
        elif isinstance(s, SLet):
            slot, name = ctx.namer.slot(s.name)
            leaves = []
            out.append(LetScalar(slot, name, _build_value(s.expr, ctx, leaves)))
            ctx.scalars[s.name] = Var(slot, name)
            _advance(ctx, out)
        elif isinstance(s, SAssign):
            out.extend(_lower_assign(s, ctx))
        else:
            raise UnloweredError(f"unhandled statement {s!r}")
    return out


def _lower_disc(s: SFor, ctx):
    slot, name = ctx.namer.slot(s.var)
    c2 = ctx.fork()
    c2.scalars[s.var] = Var(slot, name)
    inner = []
    _advance(c2, inner)
    inner += _lower_block(s.body, c2)
    return [DiscLoop(slot, name, int(s.lo), int(s.hi), Block(tuple(inner)))]


def _participants(ctx, var):
    cands = []
    for key, a in ctx.accesses.items():
        if a.miss or a.poison or a.rank >= a.tensor.ndim:
            continue
        const, vars = a.idx[a.rank]
        if var in vars and all(v in ctx.scalars for v in vars if v != var):
            cands.append(key)
    return cands


def _fiber_weight(a: _Access):
    # average entries per fiber; prefer stepping the sparsest level
    n = a.tensor.n_entries(a.rank)
    return n / max(1, a.tensor.n_fibers(a.rank))


def _lower_cont(s: SFor, ctx):
    var = s.var
    lo, hi = Limit(float(s.lo)), Limit(float(s.hi))
    cands = _participants(ctx, var)
    pinlike = [
        k for k in cands
        if static_pinpoint(ctx.accesses[k].tensor.levels[ctx.accesses[k].rank])
    ]
    if pinlike:
        # one point-stepper pins the index; the rest get probed after the pin
        best = min(pinlike, key=lambda k: _fiber_weight(ctx.accesses[k]))
        steppable = [best]
    else:
        steppable = cands
    rest = [k for k in cands if k not in steppable]
    out = []

    if not cands:
        slot, name = ctx.namer.slot("iv")
        out.append(IntersectLet(slot, name, (LimC(lo),), (LimC(hi),)))
        c2 = ctx.fork()
        inner = _finish_region(s, slot, name, False, c2, rest)
        if inner:
            out.append(Guard(slot, name, Block(tuple(inner))))
        return out

    for combo in product((True, False), repeat=len(steppable)):
        c2 = ctx.fork()
        starts = [] if lo.val == -math.inf else [LimC(lo)]
        stops = [] if hi.val == math.inf else [LimC(hi)]
        steppers = []
        for key, in_span in zip(steppable, combo):
            a = c2.accesses[key]
            shift = _shift_expr(a.idx[a.rank], var, c2)
            last = LastStop(a.tensor.name, a.rank, a.pos, shift)
            if in_span:
                stops.append(last)
                steppers.append(key)
            else:
                starts.append(dc_replace(last, eps_off=1))
                c2.accesses[key] = dc_replace(a, miss=True)
        if not starts:
            starts = [LimC(Limit(-math.inf))]
        if not stops:
            stops = [LimC(Limit(math.inf))]
        rslot, rname = ctx.namer.slot("iv")
        out.append(IntersectLet(rslot, rname, tuple(starts), tuple(stops)))

        if not steppers:
            inner = _finish_region(s, rslot, rname, False, c2, rest)
            if inner:
                out.append(Guard(rslot, rname, Block(tuple(inner))))
            continue

        cur_slot, cur_name = ctx.namer.slot("cur")
        seg_slot, seg_name = ctx.namer.slot("seg")
        rts = []
        pos_vars = {}
        for key in steppers:
            a = c2.accesses[key]
            pslot, pname = ctx.namer.slot(f"p_{a.tensor.name}{a.rank}")
            rts.append(StepperRT(
                pslot, pname, a.tensor.name, a.rank, a.pos,
                _shift_expr(a.idx[a.rank], var, c2),
            ))
            pos_vars[key] = (pslot, pname)

        sub_stmts = []
        for sub in product((True, False), repeat=len(steppers)):
            c3 = c2.fork()
            s3 = [IvStart(seg_slot, seg_name)]
            t3 = [IvStop(seg_slot, seg_name)]
            pinflag = False
            for key, in_piece in zip(steppers, sub):
                a = c3.accesses[key]
                pv = PVar(pos_vars[key][0], pos_vars[key][1])
                shift = _shift_expr(a.idx[a.rank], var, c3)
                pp = static_pinpoint(a.tensor.levels[a.rank])
                side = "C" if pp else "L"
                if in_piece:
                    s3.append(EndRef(a.tensor.name, a.rank, side, pv, 0, shift))
                    pinflag = pinflag or pp
                    c3.accesses[key] = dc_replace(a, pos=pv, rank=a.rank + 1)
                else:
                    t3.append(EndRef(a.tensor.name, a.rank, side, pv, -1, shift))
                    c3.accesses[key] = dc_replace(a, miss=True)
            sslot, sname = ctx.namer.slot("r")
            sub_stmts.append(IntersectLet(sslot, sname, tuple(s3), tuple(t3), pinflag))
            inner = _finish_region(s, sslot, sname, pinflag, c3, rest)
            if inner:
                sub_stmts.append(Guard(sslot, sname, Block(tuple(inner))))
        out.append(WhileCoiter(
            rslot, rname, cur_slot, cur_name, seg_slot, seg_name,
            tuple(rts), Block(tuple(sub_stmts)),
        ))
    return out


def _finish_region(s: SFor, iv_slot, iv_name, pinpoint, ctx, rest):
    """Lower the loop body inside one region of the loop's index."""
    var = s.var
    if pinpoint:
        if var in ctx.difs:
            return []  # a d(var) factor makes a zero-length region contribute 0
        slot, name = ctx.namer.slot(var)
        ctx.scalars[var] = Var(slot, name)
        stmts = [Pin(slot, name, iv_slot, iv_name)]
        _advance(ctx, stmts)
        stmts += _lower_block(s.body, ctx)
        return stmts
    for key in rest:
        ctx.accesses[key] = dc_replace(ctx.accesses[key], poison=True)
    ctx.pending[var] = (iv_slot, iv_name)
    return _lower_block(s.body, ctx)


def _op_fill(op, value):
    if op == "|=":
        return False
    if op == "&=":
        return True
    if op == "max=":
        return -math.inf
    if op == "min=":
        return math.inf
    if op == "+=":
        return 0.0
    boolish = isinstance(value, (And, Or, Not, Cmp, BoolC)) or (
        isinstance(value, LeafVal) and isinstance(value.fill, bool)
    )
    return False if boolish else 0.0


def _lower_assign(s: SAssign, ctx):
    value, nleaves = _summand_value(s.rhs, ctx)
    value = simplify_expr(value)
    fill = _op_fill(s.op, value)
    if _write_is_noop(s.op, value, fill):
        return []

    path = []
    decl = []
    used_pending = set()
    for ix in s.indices:
        v = ix.name
        if v in ctx.scalars:
            loop = ctx.loops[v]
            if loop.continuous:
                path.append(("p", ctx.scalars[v]))
                decl.append(("pinpoint",))
            else:
                if loop.lo < 0:
                    raise CompileError(
                        f"output index {v!r} runs from {int(loop.lo)}; dense "
                        "output ranks start at 0"
                    )
                path.append(("d", ctx.scalars[v]))
                decl.append(("dense", int(loop.hi) + 1))
        elif v in ctx.pending:
            slot, name = ctx.pending[v]
            path.append(("iv", slot, name))
            decl.append(("interval",))
            used_pending.add(v)
        else:
            raise UnloweredError(f"output index {v!r} is neither scalar nor regional")

    sum_iv = None
    for v, (slot, name) in ctx.pending.items():
        if v in used_pending:
            continue
        if v in ctx.difs:
            value = Mul((value, LenOf(slot, name)))
        elif s.op in IDEMPOTENT_OPS:
            pass  # constant over the region; one write stands for all of it
        elif s.op == "+=":
            sum_iv = (slot, name)
        else:
            raise UnloweredError(f"cannot collapse {v!r} under {s.op!r}")

    d = OutputDecl(s.target, tuple(decl), fill)
    if ctx.shared["decl"] is None:
        ctx.shared["decl"] = d
    elif ctx.shared["decl"] != d:
        raise UnloweredError(
            "regions disagree about the output's shape; a mask whose fill "
            "does not annihilate the summand cannot be lowered"
        )

    two = nleaves >= 2
    if any(c[0] != "d" for c in path):
        node = EmitPiece(s.target, tuple(path), s.op, value, two)
    else:
        node = Accumulate(s.target, tuple(c[1] for c in path), s.op, value, two)
    if sum_iv is not None:
        node = SumGuard(sum_iv[0], sum_iv[1], node)
    return [node]


# ---------------------------------------------------------------------------
# entry


def _check_lowered(stmt):
    bad = []

    def expr(e):
        if isinstance(e, LeafVal):
            pexpr(e.pos)
        elif isinstance(e, Var) and e.slot < 0:
            bad.append(e)
        elif isinstance(e, (Add, Mul, And, Or)):
            for a in e.args:
                expr(a)
        elif isinstance(e, (Sub, Div)):
            expr(e.a)
            expr(e.b)
        elif isinstance(e, (Neg, Not)):
            expr(e.a)
        elif isinstance(e, Cmp):
            expr(e.a)
            expr(e.b)

    def pexpr(p):
        if isinstance(p, PVar) and p.slot < 0:
            bad.append(p)
        elif isinstance(p, PDense):
            pexpr(p.parent)

    def walk(x):
        if isinstance(x, Block):
            for y in x.stmts:
                walk(y)
        elif isinstance(x, (DiscLoop, Guard, Cond, WhileCoiter, SumGuard)):
            if isinstance(x, Cond):
                expr(x.test)
            walk(x.body)
        elif isinstance(x, LetScalar):
            expr(x.expr)
        elif isinstance(x, Probe):
            pexpr(x.parent)
            expr(x.coord)
        elif isinstance(x, (Accumulate, EmitPiece)):
            for c in (x.path if isinstance(x, Accumulate) else [p[1] for p in x.path if p[0] != "iv"]):
                expr(c)
            expr(x.value)

    walk(stmt)
    if bad:
        raise UnloweredError(
            "a value depending on unresolved structure survived simplification"
        )


def compile_program(program: Program, bindings, *, sum_guard=False,
                    opt_bounds=False, stages=None) -> Plan:
    """Lower a program against concrete tensors.

    stages, if given, is a dict filled with the pre-simplification plan
    under "plan" (the final plan goes under "post-simplify").
    """
    for name, t in bindings.items():
        if not isinstance(t, ContTensor):
            raise CompileError(f"binding {name!r} is not a tensor")
    # the program's identifier is authoritative; IR refers to tensors by it
    bindings = {
        name: t if t.name == name else dc_replace(t, name=name)
        for name, t in bindings.items()
    }
    diags = validate(program, bindings, sum_guard=sum_guard)
    if diags:
        raise ValidityError(diags)

    loops, accesses, difs, assign = _collect(program)
    if assign is None:
        raise CompileError("program has no assignment")
    namer = Namer()
    ctx = _Ctx(namer, bindings, difs, loops, {"decl": None})
    for e in accesses:
        if e.tensor not in bindings:
            raise CompileError(f"tensor {e.tensor!r} is not bound")
        t = bindings[e.tensor]
        idx = tuple(affine_terms(ix) for ix in e.indices)
        # a tensor with no stored pieces is its fill everywhere
        ctx.accesses[id(e)] = _Access(tensor=t, idx=idx, miss=not t.values)
    if assign.target in bindings:
        raise CompileError(f"output {assign.target!r} is also bound as an input")

    top = []
    _advance(ctx, top)
    top += _lower_block(program.body, ctx)
    if ctx.shared["decl"] is None:
        # every region proved write-free; the output is all fill
        leaves = []
        c2 = ctx.fork()
        try:
            v = simplify_expr(_build_value(assign.rhs, c2, leaves))
        except UnloweredError:
            v = Num(0.0)
        ctx.shared["decl"] = OutputDecl(
            assign.target, tuple(_default_decl(assign, ctx)), _op_fill(assign.op, v)
        )
    plan = Plan(Block(tuple(top)), ctx.shared["decl"], namer.count, dict(bindings))
    if stages is not None:
        stages["plan"] = plan
    plan = simplify_plan(plan)
    if opt_bounds:
        from .bounds import prune_bounds

        plan = simplify_plan(prune_bounds(plan))
    _check_lowered(plan.body)
    if stages is not None:
        stages["post-simplify"] = plan
    return plan


def _default_decl(assign, ctx):
    for ix in assign.indices:
        loop = ctx.loops[ix.name]
        if loop.continuous:
            yield ("pinpoint",)
        else:
            yield ("dense", int(loop.hi) + 1)


def dump_looplets(program: Program, bindings) -> str:
    """Readable per-access iteration templates over each continuous rank."""
    from .looplets import unfurl

    _, accesses, _, _ = _collect(program)
    lines = []
    seen = set()
    for e in accesses:
        t = bindings.get(e.tensor)
        if t is None:
            continue
        for r, lv in enumerate(t.levels):
            if not lv.continuous or (e.tensor, r) in seen:
                continue
            seen.add((e.tensor, r))
            f = PVar(0, "f")
            seq = unfurl(t, r, f)
            cue = seq.phases[0].body
            p = PVar(1, "p")
            from .ir import render

            lines.append(f"{e.tensor} rank {r} ({lv.kind}):")
            lines.append(f"  span [-inf, {render(seq.phases[0].stop)}]: step entries p:")
            lines.append(f"    gap   [.., {render(cue.gap_stop(p))}] -> fill")
            lines.append(
                f"    piece [{render(cue.left(p))}, {render(cue.right(p))}] -> descend"
                + ("  (pinpoint)" if cue.pinpoint else "")
            )
            lines.append("  tail  (.., inf] -> fill")
    return "\n".join(lines) + ("\n" if lines else "")


__all__ = [
    "CompileError", "ValidityError", "UnloweredError",
    "compile_program", "dump_looplets",
]
