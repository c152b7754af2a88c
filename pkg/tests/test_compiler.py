import pytest

from contensor.compiler import (
    CompileError, UnloweredError, ValidityError, compile_program, dump_looplets,
)
from contensor.ir import (
    Accumulate, Block, Cond, EmitPiece, Guard, LenOf, Pin, Plan, Probe,
    WhileCoiter, pretty,
)
from contensor.lang import parse
from contensor.storage import build_tensor, tensor_1d


DOT_INTEGRAL = """
for i = -inf:inf
  s += A[i] * B[i] * d(i)
end
"""

DOT_SUM = """
for i = -inf:inf
  s += A[i] * B[i]
end
"""

MASKED_CONV = """
for i = -inf:inf
  if Mask[i]
    for j = -inf:inf
      Z[i] += A[i + j] * B[j] * d(j)
    end
  end
end
"""


def iv_tensors(pieces, fill=0.0):
    return tensor_1d("A", pieces, fill, kind="interval")


def collect(stmt, cls):
    found = []

    def walk(s):
        if isinstance(s, cls):
            found.append(s)
        if isinstance(s, Block):
            for x in s.stmts:
                walk(x)
        elif hasattr(s, "body"):
            walk(s.body)

    walk(stmt)
    return found


def test_dot_integral_collapses_to_one_region():
    A = tensor_1d("A", [((1.0, 3.0), 2.0)], 0.0, kind="interval")
    B = tensor_1d("B", [((2.0, 5.0), 3.0)], 0.0, kind="interval")
    stages = {}
    plan = compile_program(parse(DOT_INTEGRAL), {"A": A, "B": B}, stages=stages)
    # before cleanup: every span/tail and piece/gap combination is present
    assert len(collect(stages["plan"].body, WhileCoiter)) == 3
    # after: a single co-iteration with a single guarded accumulate
    loops = collect(plan.body, WhileCoiter)
    assert len(loops) == 1
    assert len(loops[0].steppers) == 2
    accs = collect(plan.body, Accumulate)
    assert len(accs) == 1
    assert accs[0].op == "+="
    assert accs[0].two_tensor
    assert any(isinstance(a, LenOf) for a in accs[0].value.args)


def test_dot_sum_pins_one_side_and_probes_the_other():
    A = tensor_1d("A", [(1.5, 2.0), (4.0, 5.0)], 0.0)
    B = tensor_1d("B", [(1.5, 3.0)], 0.0)
    plan = compile_program(parse(DOT_SUM), {"A": A, "B": B})
    assert len(collect(plan.body, Pin)) == 1
    assert len(collect(plan.body, Probe)) == 1
    (acc,) = collect(plan.body, Accumulate)
    # a sum at isolated points carries no region-length factor
    assert not any(isinstance(a, LenOf) for a in getattr(acc.value, "args", ()))


def test_masked_conv_shape():
    Mask = tensor_1d("Mask", [(0.5, True), (2.0, True)], False)
    A = tensor_1d("A", [((1.0, 3.0), 2.0)], 0.0, kind="interval")
    B = tensor_1d("B", [((0.0, 1.0), 1.0)], 0.0, kind="interval")
    plan = compile_program(parse(MASKED_CONV), {"Mask": Mask, "A": A, "B": B})
    pins = collect(plan.body, Pin)
    assert [p.name for p in pins] == ["i"]
    # the inner co-iteration runs the shifted A stepper against B
    inner = [w for w in collect(plan.body, WhileCoiter) if len(w.steppers) == 2]
    assert len(inner) == 1
    shifts = [st.shift for st in inner[0].steppers]
    assert sum(s is not None for s in shifts) == 1
    (emit,) = collect(plan.body, EmitPiece)
    assert emit.path[0][0] == "p"  # output written at the pinned point
    assert plan.output.comps == (("pinpoint",),)


def test_all_fill_input_gives_empty_body():
    A = build_tensor("A", [("interval",)], [], fill=0.0)
    B = build_tensor("B", [("interval",)], [], fill=0.0)
    plan = compile_program(parse(DOT_INTEGRAL), {"A": A, "B": B})
    assert plan.body == Block()
    assert plan.output.comps == ()
    assert plan.output.fill == 0.0


def test_validity_failure_carries_diags():
    A = tensor_1d("A", [((0.0, 1.0), 1.0)], 0.0, kind="interval")
    with pytest.raises(ValidityError) as e:
        compile_program(parse(DOT_SUM), {"A": A, "B": A})
    assert any(d.code == "R-SUM" for d in e.value.diags)


def test_missing_binding_is_a_compile_error():
    A = tensor_1d("A", [(1.0, 1.0)], 0.0)
    with pytest.raises(CompileError, match="B"):
        compile_program(parse(DOT_SUM), {"A": A})


def test_output_cannot_be_an_input():
    A = tensor_1d("A", [(1.0, 1.0)], 0.0)
    B = tensor_1d("B", [(1.0, 1.0)], 0.0)
    s = tensor_1d("s", [(1.0, 1.0)], 0.0)
    with pytest.raises(CompileError, match="s"):
        compile_program(parse(DOT_SUM), {"A": A, "B": B, "s": s})


def test_idempotent_collapse_drops_region_var():
    A = tensor_1d("A", [((1.0, 3.0), True)], False, kind="interval")
    B = tensor_1d("B", [((2.0, 5.0), True)], False, kind="interval")
    prog = parse("""
for i = -inf:inf
  any |= A[i] && B[i]
end
""")
    plan = compile_program(prog, {"A": A, "B": B})
    (acc,) = collect(plan.body, Accumulate)
    assert acc.op == "|="
    assert not collect(plan.body, Pin)


def test_guard_mode_wraps_interval_sums():
    from contensor.ir import SumGuard

    A = tensor_1d("A", [((1.0, 3.0), 2.0)], 0.0, kind="interval")
    B = tensor_1d("B", [((2.0, 5.0), 3.0)], 0.0, kind="interval")
    with pytest.raises(ValidityError):
        compile_program(parse(DOT_SUM), {"A": A, "B": B})
    plan = compile_program(parse(DOT_SUM), {"A": A, "B": B}, sum_guard=True)
    assert len(collect(plan.body, SumGuard)) == 1


def test_interval_output_from_regional_index():
    Q = tensor_1d("Q", [((0.0, 2.0), True)], False, kind="interval")
    D = tensor_1d("D", [((1.0, 3.0), True)], False, kind="interval")
    prog = parse("""
for x = -inf:inf
  Out[x] |= Q[x] && D[x]
end
""")
    plan = compile_program(prog, {"Q": Q, "D": D})
    assert plan.output.comps == (("interval",),)
    (emit,) = collect(plan.body, EmitPiece)
    assert emit.path[0][0] == "iv"


def test_negative_dense_output_range_rejected():
    A = tensor_1d("A", [(1.0, 1.0)], 0.0)
    prog = parse("""
for i = -2:2
  for x = -inf:inf
    Z[i] += A[x]
  end
end
""")
    with pytest.raises(CompileError, match="-2"):
        compile_program(prog, {"A": A})


def test_plan_equality_ignores_bindings():
    A = tensor_1d("A", [(1.0, 2.0)], 0.0)
    B = tensor_1d("B", [(1.0, 3.0)], 0.0)
    p1 = compile_program(parse(DOT_SUM), {"A": A, "B": B})
    p2 = compile_program(parse(DOT_SUM), {"A": A, "B": B})
    assert isinstance(p1, Plan) and p1 == p2


def test_pretty_renders_without_crashing():
    A = tensor_1d("A", [((1.0, 3.0), 2.0)], 0.0, kind="interval")
    B = tensor_1d("B", [((2.0, 5.0), 3.0)], 0.0, kind="interval")
    plan = compile_program(parse(DOT_INTEGRAL), {"A": A, "B": B})
    text = pretty(plan.body)
    assert "coiterate" in text and "guard" in text


def test_dump_looplets_mentions_each_continuous_rank():
    A = tensor_1d("A", [((1.0, 3.0), 2.0)], 0.0, kind="interval")
    B = tensor_1d("B", [(2.0, 3.0)], 0.0)
    out = dump_looplets(parse(DOT_SUM), {"A": A, "B": B})
    assert "A rank 0 (interval)" in out
    assert "B rank 0 (pinpoint)" in out
    assert "tail" in out and "piece" in out


def test_shifted_access_uses_scalar_shift():
    Mask = tensor_1d("Mask", [(0.0, True)], False)
    A = tensor_1d("A", [((0.0, 2.0), 1.0)], 0.0, kind="interval")
    B = tensor_1d("B", [((0.0, 2.0), 1.0)], 0.0, kind="interval")
    plan = compile_program(parse(MASKED_CONV), {"Mask": Mask, "A": A, "B": B})
    text = pretty(plan.body)
    assert "- i" in text  # stored endpoints mapped back into loop coordinates


def test_finite_bounds_clip_the_top_region():
    A = tensor_1d("A", [((1.0, 3.0), 2.0)], 0.0, kind="interval")
    prog = parse("""
for i = 0.0:10.0
  s += A[i] * d(i)
end
""")
    plan = compile_program(prog, {"A": A})
    text = pretty(plan.body)
    assert "max(0" in text and "min(10" in text
