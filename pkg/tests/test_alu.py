import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmtsim.alu import (
    Assign,
    AluKind,
    BinOp,
    Const,
    HoleOp,
    HoleSlot,
    If,
    IntLit,
    OperandRef,
    Opt,
    Return,
    SlotKind,
    StateRef,
    collect_holes,
    eval_alu,
    format_alu,
    parse_alu,
    slot_names,
    wrap32,
)
from rmtsim.errors import AluSyntaxError, MissingBinding, OutOfRangeBinding, ValidationError

RAW = "stateless alu raw(pkt_0): return arith_op(pkt_0, C())"
IF_ELSE_RAW = """
stateful alu if_else_raw(pkt_0) state(s0):
    if rel_op(pkt_0, C()) { s0 = arith_op(s0, Opt(pkt_0)) } else { s0 = arith_op(s0, C()) }
    return s0
"""


def slot(kind, ordinal, size):
    return HoleSlot(kind, ordinal, size)


def bind_all(program, values):
    return dict(zip(program.hole_slots, values))


# -- parsing ----------------------------------------------------------------


def test_raw_program_structure():
    prog = parse_alu(RAW)
    assert prog.kind is AluKind.STATELESS
    assert prog.packet_operands == ("pkt_0",)
    assert prog.state_vars == ()
    op0 = slot(SlotKind.OPCODE, 0, 2)
    imm0 = slot(SlotKind.IMMEDIATE, 0, 1 << 32)
    assert prog.hole_slots == (op0, imm0)
    assert prog.body == (Return(HoleOp("arith", OperandRef("pkt_0"), Const(imm0), op0)),)


def test_if_else_raw_hole_order():
    prog = parse_alu(IF_ELSE_RAW)
    assert [(s.kind, s.ordinal, s.size) for s in prog.hole_slots] == [
        (SlotKind.OPCODE, 0, 4),
        (SlotKind.IMMEDIATE, 0, 1 << 32),
        (SlotKind.OPCODE, 1, 2),
        (SlotKind.OPTCTRL, 0, 2),
        (SlotKind.OPCODE, 2, 2),
        (SlotKind.IMMEDIATE, 1, 1 << 32),
    ]


def test_hole_order_matches_independent_walk():
    prog = parse_alu(IF_ELSE_RAW)
    # walk the AST by hand in pre-order
    (if_stmt, ret) = prog.body
    cond = if_stmt.cond
    then_val = if_stmt.then[0].value
    else_val = if_stmt.orelse[0].value
    walk = [cond.slot, cond.right.slot, then_val.slot, then_val.right.slot,
            else_val.slot, else_val.right.slot]
    assert list(prog.hole_slots) == walk == list(collect_holes(prog.body))


def test_name_argument_overrides_header():
    assert parse_alu(RAW, "renamed").name == "renamed"
    assert parse_alu(RAW).name == "raw"


def test_empty_source_is_syntax_error_at_zero():
    with pytest.raises(AluSyntaxError) as info:
        parse_alu("")
    assert info.value.offset == 0


@pytest.mark.parametrize("source, offset", [
    ("stateless alu raw(pkt_0) return pkt_0", 25),
    ("stateless alu raw(pkt_0): return pkt_0 +", 40),
    ("stateless alu raw(pkt_0): return (pkt_0", 39),
])
def test_syntax_errors_report_position(source, offset):
    with pytest.raises(AluSyntaxError) as info:
        parse_alu(source)
    assert info.value.offset == offset


@pytest.mark.parametrize("source, fragment", [
    ("stateless alu a(x): return y", "undeclared"),
    ("stateless alu a(x): return Mux1(x)", "at least two"),
    ("stateless alu a(x) state(s): return x", "stateless"),
    ("stateful alu a(x): return x", "at least one state"),
    ("stateful alu a(x) state(s): s = x", "does not return"),
    ("stateful alu a(x) state(s): s = x\n s = x + 1\n return s", "assigned twice"),
    ("stateful alu a(x) state(s): return s\n s = 1", "unreachable"),
    ("stateful alu a(x) state(s): if x { return 1 } s = x", "does not return"),
    ("stateful alu a(x) state(s): let t = s + 1\n s = x\n return t", "used after a write"),
])
def test_validation_errors(source, fragment):
    with pytest.raises(ValidationError, match=fragment):
        parse_alu(source)


def test_assignment_on_separate_paths_is_allowed():
    prog = parse_alu("stateful alu a(x) state(s): if x { s = 1 } else { s = 2 } return s")
    assert prog.is_stateful


def test_local_before_write_is_allowed():
    prog = parse_alu("stateful alu a(x) state(s): let t = s + 1\n if t { s = t } return s")
    state = [4]
    assert eval_alu(prog, {}, [0], state) == 5
    assert state == [5]


def test_else_if_chain():
    src = """stateless alu pick(x):
        if x == 1 { return 10 } else if x == 2 { return 20 } else { return 30 }"""
    prog = parse_alu(src)
    assert [eval_alu(prog, {}, [v], []) for v in (1, 2, 3)] == [10, 20, 30]


def test_bundled_alus_round_trip(alu_lib):
    assert {"counter", "if_else_raw", "pair", "passthrough", "pred_raw", "raw", "sub"} <= set(alu_lib)
    for prog in alu_lib.values():
        again = parse_alu(format_alu(prog), prog.name)
        assert again == prog


def test_parse_is_deterministic(alu_lib):
    for prog in alu_lib.values():
        assert parse_alu(format_alu(prog)) == parse_alu(format_alu(prog))


def test_pair_holes(alu_lib):
    labels = [s.label for s in alu_lib["pair"].hole_slots]
    assert labels == [
        "opcode_0", "opcode_1", "muxctrl_0", "immediate_0", "opcode_2", "muxctrl_1",
        "immediate_1", "opcode_3", "muxctrl_2", "immediate_2", "opcode_4", "muxctrl_3",
        "immediate_3", "opcode_5", "immediate_4", "muxctrl_4",
    ]


# -- slot names -------------------------------------------------------------


def test_slot_names_raw():
    assert slot_names(parse_alu(RAW), "stage_0_alu_0") == [
        "stage_0_alu_0_opcode_0", "stage_0_alu_0_immediate_0"]


def test_slot_names_if_else_raw():
    names = slot_names(parse_alu(IF_ELSE_RAW), "stage_1_alu_2")
    suffixes = [n[len("stage_1_alu_2_"):] for n in names]
    assert suffixes == ["opcode_0", "immediate_0", "opcode_1", "optctrl_0", "opcode_2", "immediate_1"]


def test_slot_names_without_holes(alu_lib):
    assert slot_names(alu_lib["passthrough"], "stage_0_alu_0") == []


# -- evaluation -------------------------------------------------------------


def test_raw_identity_configuration():
    prog = parse_alu(RAW)
    assert eval_alu(prog, bind_all(prog, [0, 0]), [7], []) == 7


def test_raw_subtract():
    prog = parse_alu(RAW)
    assert eval_alu(prog, bind_all(prog, [1, 3]), [10], []) == 7


def test_if_else_raw_then_path():
    prog = parse_alu(IF_ELSE_RAW)
    state = [100]
    # rel "==", imm 5, then arith "+", Opt on, else arith "+", imm 0
    out = eval_alu(prog, bind_all(prog, [3, 5, 0, 1, 0, 0]), [5], state)
    assert (out, state) == (105, [105])


def test_if_else_raw_else_path():
    prog = parse_alu(IF_ELSE_RAW)
    state = [100]
    out = eval_alu(prog, bind_all(prog, [3, 5, 0, 1, 1, 7]), [6], state)
    assert (out, state) == (93, [93])


def test_immediates_are_reinterpreted_as_signed():
    prog = parse_alu(RAW)
    assert eval_alu(prog, bind_all(prog, [0, 0xFFFFFFFF]), [10], []) == 9


def test_addition_wraps():
    prog = parse_alu(RAW)
    assert eval_alu(prog, bind_all(prog, [0, 1]), [2**31 - 1], []) == -(2**31)


def test_missing_binding():
    prog = parse_alu(RAW)
    with pytest.raises(MissingBinding) as info:
        eval_alu(prog, {prog.hole_slots[0]: 0}, [1], [])
    assert info.value.slot == prog.hole_slots[1]


def test_out_of_range_binding():
    prog = parse_alu(RAW)
    with pytest.raises(OutOfRangeBinding) as info:
        eval_alu(prog, bind_all(prog, [2, 0]), [1], [])
    assert info.value.valid_range == range(2)


def test_relational_and_logic_tables():
    src = "stateless alu r(a, b): return logic_op(rel_op(a, b), rel_op(b, a))"
    prog = parse_alu(src)
    cases = {
        # (logic, rel1, rel2): a=3, b=5
        (0, 1, 2): 1,   # 3<5 && 5>3
        (0, 1, 1): 0,   # 3<5 && 5<3
        (1, 1, 1): 1,   # 3<5 || 5<3
        (1, 3, 3): 0,   # 3==5 || 5==3
        (0, 0, 0): 1,   # 3!=5 && 5!=3
    }
    for (lg, r1, r2), expected in cases.items():
        assert eval_alu(prog, bind_all(prog, [lg, r1, r2]), [3, 5], []) == expected


def test_mux_selects_argument():
    prog = parse_alu("stateless alu m(a, b): return Mux3(a, b, C())")
    assert [eval_alu(prog, bind_all(prog, [sel, 9]), [1, 2], []) for sel in range(3)] == [1, 2, 9]


def test_counter_has_no_operands(alu_lib):
    counter = alu_lib["counter"]
    state = [0]
    for expected in (1, 2, 3):
        assert eval_alu(counter, bind_all(counter, [1]), [], state) == expected


def test_negative_literal_and_not():
    prog = parse_alu("stateless alu n(x): return !(x == -4)")
    assert eval_alu(prog, {}, [-4], []) == 0
    assert eval_alu(prog, {}, [4], []) == 1


def test_precedence():
    prog = parse_alu("stateless alu p(x): return x + 1 < 5 && x > 0 || x == 9")
    assert prog.body[0].value == BinOp(
        "||",
        BinOp("&&", BinOp("<", BinOp("+", OperandRef("x"), IntLit(1)), IntLit(5)),
              BinOp(">", OperandRef("x"), IntLit(0))),
        BinOp("==", OperandRef("x"), IntLit(9)),
    )


# -- properties -------------------------------------------------------------

values32 = st.integers(-(2**31), 2**31 - 1)


@settings(max_examples=200, deadline=None)
@given(ctrl=st.integers(0, 1), v=values32)
def test_opt_gate_law(ctrl, v):
    prog = parse_alu("stateless alu g(x): return Opt(x)")
    assert eval_alu(prog, bind_all(prog, [ctrl]), [v], []) == (v if ctrl else 0)


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_stateless_alus_leave_state_alone(alu_lib, data):
    for prog in alu_lib.values():
        if prog.is_stateful:
            continue
        bindings = {s: data.draw(st.integers(0, s.size - 1)) for s in prog.hole_slots}
        operands = data.draw(st.lists(values32, min_size=len(prog.packet_operands),
                                      max_size=len(prog.packet_operands)))
        state = []
        eval_alu(prog, bindings, operands, state)
        assert state == []


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_results_stay_in_32_bits(alu_lib, data):
    for prog in alu_lib.values():
        bindings = {s: data.draw(st.integers(0, s.size - 1)) for s in prog.hole_slots}
        n = len(prog.packet_operands)
        operands = data.draw(st.lists(values32, min_size=n, max_size=n))
        state = data.draw(st.lists(values32, min_size=len(prog.state_vars),
                                   max_size=len(prog.state_vars)))
        out = eval_alu(prog, bindings, operands, state)
        assert wrap32(out) == out
        assert all(wrap32(v) == v for v in state)


def test_hand_built_ast_matches_parse():
    op0 = slot(SlotKind.OPCODE, 0, 4)
    imm0 = slot(SlotKind.IMMEDIATE, 0, 1 << 32)
    op1 = slot(SlotKind.OPCODE, 1, 2)
    opt0 = slot(SlotKind.OPTCTRL, 0, 2)
    op2 = slot(SlotKind.OPCODE, 2, 2)
    imm1 = slot(SlotKind.IMMEDIATE, 1, 1 << 32)
    body = (
        If(
            HoleOp("rel", OperandRef("pkt_0"), Const(imm0), op0),
            (Assign("s0", HoleOp("arith", StateRef("s0"), Opt(OperandRef("pkt_0"), opt0), op1)),),
            (Assign("s0", HoleOp("arith", StateRef("s0"), Const(imm1), op2)),),
        ),
        Return(StateRef("s0")),
    )
    assert parse_alu(IF_ELSE_RAW).body == body
