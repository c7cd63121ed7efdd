import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmtsim.alu import BinOp, If, IntLit, Not, OperandRef, Return, eval_alu, format_body, parse_alu
from rmtsim.errors import ValidationError
from rmtsim.optimizer import constant_conditions, count_holes, specialize


def bind_all(program, values):
    return dict(zip(program.hole_slots, values))


def test_arith_opcode_branch_disappears():
    prog = parse_alu("stateless alu raw(pkt_0): return arith_op(pkt_0, C())")
    add = specialize(prog, bind_all(prog, [0, 7]))
    sub = specialize(prog, bind_all(prog, [1, 7]))
    assert add.body == (Return(BinOp("+", OperandRef("pkt_0"), IntLit(7))),)
    assert sub.body == (Return(BinOp("-", OperandRef("pkt_0"), IntLit(7))),)
    assert add.hole_slots == ()


@pytest.mark.parametrize("opcode, imm", [(0, 0), (1, 0)])
def test_add_or_subtract_zero_is_identity(opcode, imm):
    prog = parse_alu("stateless alu raw(pkt_0): return arith_op(pkt_0, C())")
    assert specialize(prog, bind_all(prog, [opcode, imm])).body == (Return(OperandRef("pkt_0")),)


def test_zero_plus_x():
    prog = parse_alu("stateless alu z(x): return arith_op(Opt(x), x)")
    assert specialize(prog, bind_all(prog, [0, 0])).body == (Return(OperandRef("x")),)


def test_logic_short_circuits():
    prog = parse_alu("stateless alu l(x): return logic_op(rel_op(x, x), C())")
    # && with immediate 0 is always 0; || with a nonzero immediate is always 1
    assert specialize(prog, bind_all(prog, [0, 0, 0])).body == (Return(IntLit(0)),)
    assert specialize(prog, bind_all(prog, [1, 0, 5])).body == (Return(IntLit(1)),)


def test_constant_condition_selects_branch():
    src = """stateful alu b(x) state(s):
        if rel_op(C(), C()) { s = x } else { s = s + 1 }
        return s"""
    prog = parse_alu(src)
    taken = specialize(prog, bind_all(prog, [1, 1, 2]))   # 1 < 2
    other = specialize(prog, bind_all(prog, [1, 2, 1]))   # 2 < 1
    assert format_body(taken.body) == ["    s = x", "    return s"]
    assert format_body(other.body) == ["    s = (s + 1)", "    return s"]
    assert constant_conditions(taken) == 0


def test_code_after_folded_return_is_dropped():
    src = """stateless alu r(x):
        if C() { return 1 }
        return x"""
    prog = parse_alu(src)
    assert specialize(prog, bind_all(prog, [3])).body == (Return(IntLit(1)),)
    assert specialize(prog, bind_all(prog, [0])).body == (Return(OperandRef("x")),)


def test_empty_then_branch_is_negated():
    src = """stateful alu e(x) state(s):
        if x { s = s + Opt(x) } else { s = x }
        return s"""
    prog = parse_alu(src)
    out = specialize(prog, bind_all(prog, [0]))
    (stmt, _) = out.body
    assert isinstance(stmt, If)
    assert stmt.cond == Not(OperandRef("x"))
    assert stmt.orelse == ()


def test_empty_if_is_removed():
    src = """stateful alu e(x) state(s):
        if x { s = s + Opt(x) }
        return s"""
    prog = parse_alu(src)
    assert specialize(prog, bind_all(prog, [0])).body == (Return(parse_alu(src).body[1].value),)


def test_locals_are_inlined():
    src = """stateful alu l(x) state(s):
        let hit = rel_op(x, C())
        if hit { s = x }
        return Mux2(hit, s)"""
    prog = parse_alu(src)
    out = specialize(prog, bind_all(prog, [3, 10, 0]))
    assert format_body(out.body) == ["    if (x == 10) {", "        s = x", "    }",
                                     "    return (x == 10)"]


def test_unbound_hole_is_rejected():
    prog = parse_alu("stateless alu raw(pkt_0): return arith_op(pkt_0, C())")
    with pytest.raises(Exception):
        specialize(prog, {})


def test_bundled_alus_specialize_completely(alu_lib):
    rng = random.Random(5)
    for prog in alu_lib.values():
        for _ in range(50):
            out = specialize(prog, {s: rng.randrange(s.size) for s in prog.hole_slots})
            assert count_holes(out) == 0
            assert constant_conditions(out) == 0


# -- random programs: specialization preserves behaviour ---------------------


class ProgramGen:
    """Random well-formed stateful ALU sources over two operands and two state vars."""

    def __init__(self, rng):
        self.rng = rng

    def expr(self, depth):
        r = self.rng.random()
        if depth <= 0 or r < 0.25:
            return self.rng.choice(["a", "b", "s0", "s1", "C()", str(self.rng.randrange(-3, 4))])
        kind = self.rng.randrange(7)
        sub = lambda: self.expr(depth - 1)  # noqa: E731
        if kind == 0:
            return f"arith_op({sub()}, {sub()})"
        if kind == 1:
            return f"rel_op({sub()}, {sub()})"
        if kind == 2:
            return f"logic_op({sub()}, {sub()})"
        if kind == 3:
            return f"Opt({sub()})"
        if kind == 4:
            n = self.rng.randrange(2, 4)
            return f"Mux{n}({', '.join(sub() for _ in range(n))})"
        if kind == 5:
            op = self.rng.choice(["+", "-", "<", ">", "==", "!=", "&&", "||"])
            return f"({sub()} {op} {sub()})"
        return f"!{sub()}"

    def block(self, depth, assigned):
        lines = []
        for var in ("s0", "s1"):
            if var not in assigned and self.rng.random() < 0.5:
                lines.append(f"{var} = {self.expr(2)}")
                assigned = assigned | {var}
        if depth > 0 and self.rng.random() < 0.6:
            then = self.block(depth - 1, assigned)
            orelse = self.block(depth - 1, assigned)
            if then:
                text = f"if {self.expr(2)} {{ {' '.join(then)} }}"
                if orelse:
                    text += f" else {{ {' '.join(orelse)} }}"
                lines.append(text)
        if self.rng.random() < 0.3:
            lines.append(f"return {self.expr(2)}")
            return lines
        return lines

    def source(self):
        body = self.block(2, frozenset())
        if not body or not body[-1].startswith("return"):
            body.append(f"return {self.expr(3)}")
        return "stateful alu rnd(a, b) state(s0, s1):\n    " + "\n    ".join(body)


def random_program(seed):
    rng = random.Random(seed)
    gen = ProgramGen(rng)
    while True:
        try:
            return parse_alu(gen.source()), rng
        except ValidationError:
            continue  # e.g. unreachable code after an early return


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32), inputs=st.lists(st.integers(-20, 20), min_size=4, max_size=4))
def test_specialization_preserves_semantics(seed, inputs):
    prog, rng = random_program(seed)
    bindings = {}
    for s in prog.hole_slots:
        bindings[s] = rng.choice([0, 1, 2, 2**32 - 1]) % s.size if s.size == 2**32 else rng.randrange(s.size)
    a, b, s0, s1 = inputs
    slow_state, fast_state = [s0, s1], [s0, s1]
    fast = specialize(prog, bindings)
    assert count_holes(fast) == 0
    assert constant_conditions(fast) == 0
    assert eval_alu(prog, bindings, [a, b], slow_state) == eval_alu(fast, {}, [a, b], fast_state)
    assert slow_state == fast_state
