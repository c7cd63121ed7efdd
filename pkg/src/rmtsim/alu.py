"""ALU description language.

An ALU file declares whether the unit is stateful or stateless, the packet
operands delivered by its input multiplexers, its state variables, and a
body of statements.  Configurable points in the body (``C()``, ``Opt``,
``MuxN``, ``arith_op``, ``rel_op``, ``logic_op``) are *holes* whose values
come from machine code.  See ``docs/alu_grammar.md`` for the grammar.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, MutableSequence, Sequence, Union

from rmtsim.errors import (
    AluSyntaxError,
    MissingBinding,
    OutOfRangeBinding,
    ValidationError,
)

UINT32_SIZE = 1 << 32


def wrap32(value: int) -> int:
    """Reduce an integer to the signed 32-bit two's-complement range."""
    return ((value + 0x80000000) & 0xFFFFFFFF) - 0x80000000


def to_signed(value: int) -> int:
    """Reinterpret an unsigned 32-bit machine-code value as signed."""
    return value - UINT32_SIZE if value >= 0x80000000 else value


class AluKind(str, enum.Enum):
    STATEFUL = "stateful"
    STATELESS = "stateless"


class SlotKind(str, enum.Enum):
    IMMEDIATE = "immediate"
    OPCODE = "opcode"
    OPTCTRL = "optctrl"
    MUXCTRL = "muxctrl"


@dataclass(frozen=True)
class HoleSlot:
    kind: SlotKind
    ordinal: int
    size: int

    @property
    def valid_range(self) -> range:
        return range(self.size)

    @property
    def label(self) -> str:
        return f"{self.kind.value}_{self.ordinal}"


# Opcode tables.  Index = machine-code value.
ARITH_OPS = ("+", "-")
REL_OPS = ("!=", "<", ">", "==")
LOGIC_OPS = ("&&", "||")
HOLE_OP_TABLE = {"arith": ARITH_OPS, "rel": REL_OPS, "logic": LOGIC_OPS}
BINARY_OPS = ARITH_OPS + REL_OPS + LOGIC_OPS


def apply_binop(op: str, a: int, b: int) -> int:
    if op == "+":
        return wrap32(a + b)
    if op == "-":
        return wrap32(a - b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == ">":
        return int(a > b)
    if op == "==":
        return int(a == b)
    if op == "&&":
        return int(a != 0 and b != 0)
    if op == "||":
        return int(a != 0 or b != 0)
    raise ValueError(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class OperandRef:
    name: str


@dataclass(frozen=True)
class StateRef:
    name: str


@dataclass(frozen=True)
class LocalRef:
    name: str


@dataclass(frozen=True)
class Const:
    """``C()``: an immediate taken from machine code."""

    slot: HoleSlot


@dataclass(frozen=True)
class Opt:
    """``Opt(e)``: yields ``e`` when its control bit is 1 and 0 otherwise."""

    arg: "Expr"
    slot: HoleSlot


@dataclass(frozen=True)
class Mux:
    args: tuple
    slot: HoleSlot


@dataclass(frozen=True)
class HoleOp:
    """Opcode-selected binary operation (``arith_op``, ``rel_op``, ``logic_op``)."""

    family: str
    left: "Expr"
    right: "Expr"
    slot: HoleSlot


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    arg: "Expr"


Expr = Union[IntLit, OperandRef, StateRef, LocalRef, Const, Opt, Mux, HoleOp, BinOp, Not]


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr


@dataclass(frozen=True)
class Return:
    value: Expr


Stmt = Union[If, Assign, Let, Return]


@dataclass(frozen=True)
class AluProgram:
    name: str
    kind: AluKind
    packet_operands: tuple
    state_vars: tuple
    body: tuple
    hole_slots: tuple

    @property
    def is_stateful(self) -> bool:
        return self.kind is AluKind.STATEFUL


# ---------------------------------------------------------------------------
# Traversal helpers


def iter_expr(expr: Expr) -> Iterator[Expr]:
    """Pre-order walk of an expression tree."""
    yield expr
    if isinstance(expr, (Opt, Not)):
        yield from iter_expr(expr.arg)
    elif isinstance(expr, Mux):
        for arg in expr.args:
            yield from iter_expr(arg)
    elif isinstance(expr, (HoleOp, BinOp)):
        yield from iter_expr(expr.left)
        yield from iter_expr(expr.right)


def iter_stmts(body: Sequence[Stmt]) -> Iterator[Stmt]:
    for stmt in body:
        yield stmt
        if isinstance(stmt, If):
            yield from iter_stmts(stmt.then)
            yield from iter_stmts(stmt.orelse)


def iter_body_exprs(body: Sequence[Stmt]) -> Iterator[Expr]:
    """Every expression node of a body, in source pre-order."""
    for stmt in body:
        if isinstance(stmt, If):
            yield from iter_expr(stmt.cond)
            yield from iter_body_exprs(stmt.then)
            yield from iter_body_exprs(stmt.orelse)
        else:
            yield from iter_expr(stmt.value)


def collect_holes(body: Sequence[Stmt]) -> tuple:
    return tuple(
        node.slot for node in iter_body_exprs(body) if isinstance(node, (Const, Opt, Mux, HoleOp))
    )


def slot_names(alu: AluProgram, alu_path: str) -> list[str]:
    """Globally unique machine-code names for ``alu``'s holes, in hole order."""
    return [f"{alu_path}_{slot.label}" for slot in alu.hole_slots]


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<skip>\s+|\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|&&|\|\||[-+<>!=(){},:;])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"stateful", "stateless", "alu", "state", "if", "else", "let", "return"}
_BUILTINS = {"C", "Opt", "arith_op", "rel_op", "logic_op"}
_MUX_RE = re.compile(r"Mux([0-9]+)$")


@dataclass(frozen=True)
class _Token:
    kind: str  # "int", "ident", "op", "eof"
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise AluSyntaxError(pos, "a token", source[pos])
        if m.lastgroup != "skip":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(source)))
    return tokens


def _is_reserved(name: str) -> bool:
    return name in _KEYWORDS or name in _BUILTINS or _MUX_RE.match(name) is not None


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.operands: tuple = ()
        self.state_vars: tuple = ()
        self.scopes: list[set] = []
        self.counters = {kind: 0 for kind in SlotKind}

    # token helpers

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def expect(self, text: str) -> _Token:
        if not self.at(text):
            raise AluSyntaxError(self.tok.offset, repr(text), self.tok.text)
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> _Token:
        tok = self.tok
        if tok.kind != "ident" or _is_reserved(tok.text):
            raise AluSyntaxError(tok.offset, what, tok.text)
        return self.advance()

    def new_slot(self, kind: SlotKind, size: int) -> HoleSlot:
        slot = HoleSlot(kind, self.counters[kind], size)
        self.counters[kind] += 1
        return slot

    # grammar

    def program(self, name: str | None) -> AluProgram:
        tok = self.tok
        if not (self.at("stateful") or self.at("stateless")):
            raise AluSyntaxError(tok.offset, "'stateful' or 'stateless'", tok.text)
        kind = AluKind(self.advance().text)
        self.expect("alu")
        header_name = self.expect_ident("ALU name").text
        self.expect("(")
        self.operands = self.ident_list(")")
        self.expect(")")
        state_offset = self.tok.offset
        if self.at("state"):
            self.advance()
            self.expect("(")
            self.state_vars = self.ident_list(")")
            self.expect(")")
        self.expect(":")

        declared = self.operands + self.state_vars
        if len(set(declared)) != len(declared):
            raise ValidationError("operand and state variable names must be distinct")
        if kind is AluKind.STATELESS and self.state_vars:
            raise ValidationError(f"offset {state_offset}: stateless ALU declares state variables")
        if kind is AluKind.STATEFUL and not self.state_vars:
            raise ValidationError("stateful ALU must declare at least one state variable")

        body = self.block_body(top=True)
        if self.tok.kind != "eof":
            raise AluSyntaxError(self.tok.offset, "end of input", self.tok.text)
        return AluProgram(
            name=name or header_name,
            kind=kind,
            packet_operands=self.operands,
            state_vars=self.state_vars,
            body=body,
            hole_slots=(),
        )

    def ident_list(self, closer: str) -> tuple:
        names = []
        if not self.at(closer):
            names.append(self.expect_ident().text)
            while self.at(","):
                self.advance()
                names.append(self.expect_ident().text)
        return tuple(names)

    def block_body(self, top: bool = False) -> tuple:
        self.scopes.append(set())
        stmts = []
        end = "eof" if top else "}"
        while not (self.tok.kind == "eof" if top else self.at("}")):
            if self.tok.kind == "eof":
                raise AluSyntaxError(self.tok.offset, repr(end))
            stmts.append(self.statement())
            while self.at(";"):
                self.advance()
        self.scopes.pop()
        if not stmts:
            raise AluSyntaxError(self.tok.offset, "a statement", self.tok.text)
        return tuple(stmts)

    def braced_block(self) -> tuple:
        self.expect("{")
        if self.at("}"):
            self.advance()
            return ()
        body = self.block_body()
        self.expect("}")
        return body

    def statement(self) -> Stmt:
        tok = self.tok
        if self.at("if"):
            return self.if_statement()
        if self.at("return"):
            self.advance()
            return Return(self.expr())
        if self.at("let"):
            self.advance()
            name_tok = self.expect_ident("local name")
            name = name_tok.text
            if name in self.operands or name in self.state_vars or self.is_local(name):
                raise ValidationError(f"offset {name_tok.offset}: {name!r} is already bound")
            self.expect("=")
            value = self.expr()
            self.scopes[-1].add(name)
            return Let(name, value)
        if tok.kind == "ident" and not _is_reserved(tok.text):
            self.advance()
            if tok.text not in self.state_vars:
                raise ValidationError(
                    f"offset {tok.offset}: can only assign to declared state variables, not {tok.text!r}"
                )
            self.expect("=")
            return Assign(tok.text, self.expr())
        raise AluSyntaxError(tok.offset, "a statement", tok.text)

    def if_statement(self) -> If:
        self.expect("if")
        cond = self.expr()
        then = self.braced_block()
        orelse: tuple = ()
        if self.at("else"):
            self.advance()
            if self.at("if"):
                orelse = (self.if_statement(),)
            else:
                orelse = self.braced_block()
        if not then:
            raise AluSyntaxError(self.tok.offset, "a non-empty then-branch")
        return If(cond, then, orelse)

    def is_local(self, name: str) -> bool:
        return any(name in scope for scope in self.scopes)

    # expressions, lowest precedence first

    def expr(self) -> Expr:
        return self.binary(0)

    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", ">"), ("+", "-"))

    def binary(self, level: int) -> Expr:
        if level == len(self._LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.tok.kind == "op" and self.tok.text in self._LEVELS[level]:
            op = self.advance().text
            left = BinOp(op, left, self.binary(level + 1))
        return left

    def unary(self) -> Expr:
        if self.at("!"):
            self.advance()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "int":
            self.advance()
            return IntLit(wrap32(int(tok.text)))
        if self.at("-") and self.tokens[self.pos + 1].kind == "int":
            self.advance()
            return IntLit(wrap32(-int(self.advance().text)))
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind != "ident":
            raise AluSyntaxError(tok.offset, "an expression", tok.text)
        name = tok.text
        self.advance()
        if name == "C":
            slot = self.new_slot(SlotKind.IMMEDIATE, UINT32_SIZE)
            self.expect("(")
            self.expect(")")
            return Const(slot)
        if name == "Opt":
            slot = self.new_slot(SlotKind.OPTCTRL, 2)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Opt(arg, slot)
        mux = _MUX_RE.match(name)
        if mux:
            fanin = int(mux.group(1))
            if fanin < 2:
                raise ValidationError(f"offset {tok.offset}: {name} needs at least two inputs")
            slot = self.new_slot(SlotKind.MUXCTRL, fanin)
            self.expect("(")
            args = [self.expr()]
            while self.at(","):
                self.advance()
                args.append(self.expr())
            self.expect(")")
            if len(args) != fanin:
                raise ValidationError(
                    f"offset {tok.offset}: {name} takes {fanin} arguments, got {len(args)}"
                )
            return Mux(tuple(args), slot)
        if name in ("arith_op", "rel_op", "logic_op"):
            family = name[: -len("_op")]
            slot = self.new_slot(SlotKind.OPCODE, len(HOLE_OP_TABLE[family]))
            self.expect("(")
            left = self.expr()
            self.expect(",")
            right = self.expr()
            self.expect(")")
            return HoleOp(family, left, right, slot)
        if _is_reserved(name):
            raise AluSyntaxError(tok.offset, "an expression", name)
        if name in self.operands:
            return OperandRef(name)
        if name in self.state_vars:
            return StateRef(name)
        if self.is_local(name):
            return LocalRef(name)
        raise ValidationError(f"offset {tok.offset}: undeclared identifier {name!r}")


def parse_alu(source: str, name: str | None = None) -> AluProgram:
    """Parse and validate one ALU program.

    ``name`` overrides the name written in the header; callers loading
    ``.alu`` files pass the file stem.
    """
    program = _Parser(source).program(name)
    program = AluProgram(
        name=program.name,
        kind=program.kind,
        packet_operands=program.packet_operands,
        state_vars=program.state_vars,
        body=program.body,
        hole_slots=collect_holes(program.body),
    )
    validate_alu(program)
    return program


# ---------------------------------------------------------------------------
# Validation


def _state_reads(expr: Expr) -> set:
    return {node.name for node in iter_expr(expr) if isinstance(node, StateRef)}


def _state_writes(body: Sequence[Stmt]) -> set:
    return {stmt.target for stmt in iter_stmts(body) if isinstance(stmt, Assign)}


def _uses_local(expr: Expr, name: str) -> bool:
    return any(isinstance(n, LocalRef) and n.name == name for n in iter_expr(expr))


def _used_after_write(
    body: Sequence[Stmt], name: str, reads: set, dirty: frozenset
) -> tuple[bool, frozenset]:
    for stmt in body:
        if isinstance(stmt, If):
            if dirty & reads and _uses_local(stmt.cond, name):
                return True, dirty
            then_hit, then_dirty = _used_after_write(stmt.then, name, reads, dirty)
            else_hit, else_dirty = _used_after_write(stmt.orelse, name, reads, dirty)
            if then_hit or else_hit:
                return True, dirty
            dirty = dirty | then_dirty | else_dirty
        else:
            if dirty & reads and _uses_local(stmt.value, name):
                return True, dirty
            if isinstance(stmt, Assign):
                dirty = dirty | {stmt.target}
    return False, dirty


def _check_block(body: Sequence[Stmt], assigned: frozenset) -> tuple[bool, frozenset]:
    falls_through = True
    for index, stmt in enumerate(body):
        if not falls_through:
            raise ValidationError("unreachable statement after return")
        if isinstance(stmt, Assign):
            if stmt.target in assigned:
                raise ValidationError(
                    f"state variable {stmt.target!r} assigned twice along one control path"
                )
            assigned = assigned | {stmt.target}
        elif isinstance(stmt, Let):
            # Locals are evaluated where they are bound.  Using one after a
            # write to state it reads would differ from inline substitution.
            reads = _state_reads(stmt.value)
            if reads and _used_after_write(body[index + 1:], stmt.name, reads, frozenset())[0]:
                raise ValidationError(
                    f"local {stmt.name!r} is used after a write to state it reads ({sorted(reads)})"
                )
        elif isinstance(stmt, Return):
            falls_through = False
        elif isinstance(stmt, If):
            then_ft, then_assigned = _check_block(stmt.then, assigned)
            else_ft, else_assigned = _check_block(stmt.orelse, assigned)
            falls_through = then_ft or else_ft
            merged = set(assigned)
            if then_ft:
                merged |= then_assigned
            if else_ft:
                merged |= else_assigned
            assigned = frozenset(merged)
        else:
            raise ValidationError(f"unknown statement {stmt!r}")
    return falls_through, assigned


def validate_alu(program: AluProgram) -> None:
    """Raise ValidationError unless ``program`` is well formed."""
    if program.kind is AluKind.STATELESS:
        if program.state_vars:
            raise ValidationError("stateless ALU declares state variables")
        if _state_writes(program.body):
            raise ValidationError("stateless ALU assigns state")
    elif not program.state_vars:
        raise ValidationError("stateful ALU must declare at least one state variable")

    for node in iter_body_exprs(program.body):
        if isinstance(node, OperandRef) and node.name not in program.packet_operands:
            raise ValidationError(f"undeclared operand {node.name!r}")
        if isinstance(node, StateRef) and node.name not in program.state_vars:
            raise ValidationError(f"undeclared state variable {node.name!r}")
    for stmt in iter_stmts(program.body):
        if isinstance(stmt, Assign) and stmt.target not in program.state_vars:
            raise ValidationError(f"assignment to undeclared state variable {stmt.target!r}")

    falls_through, _ = _check_block(program.body, frozenset())
    if falls_through:
        raise ValidationError("some control path does not return a value")

    if tuple(program.hole_slots) != collect_holes(program.body):
        raise ValidationError("hole_slots does not match the body's pre-order holes")
    counters: dict = {}
    for slot in program.hole_slots:
        if slot.ordinal != counters.get(slot.kind, 0):
            raise ValidationError(f"hole ordinals are not dense at {slot.label}")
        counters[slot.kind] = slot.ordinal + 1


# ---------------------------------------------------------------------------
# Pretty printer


def format_expr(expr: Expr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, (OperandRef, StateRef, LocalRef)):
        return expr.name
    if isinstance(expr, Const):
        return "C()"
    if isinstance(expr, Opt):
        return f"Opt({format_expr(expr.arg)})"
    if isinstance(expr, Mux):
        return f"Mux{len(expr.args)}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, HoleOp):
        return f"{expr.family}_op({format_expr(expr.left)}, {format_expr(expr.right)})"
    if isinstance(expr, BinOp):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    if isinstance(expr, Not):
        return f"!{format_expr(expr.arg)}"
    raise TypeError(f"not an expression: {expr!r}")


def format_body(body: Sequence[Stmt], indent: str = "    ") -> list[str]:
    lines = []
    for stmt in body:
        if isinstance(stmt, If):
            lines.append(f"{indent}if {format_expr(stmt.cond)} {{")
            lines.extend(format_body(stmt.then, indent + "    "))
            if stmt.orelse:
                lines.append(f"{indent}}} else {{")
                lines.extend(format_body(stmt.orelse, indent + "    "))
            lines.append(f"{indent}}}")
        elif isinstance(stmt, Assign):
            lines.append(f"{indent}{stmt.target} = {format_expr(stmt.value)}")
        elif isinstance(stmt, Let):
            lines.append(f"{indent}let {stmt.name} = {format_expr(stmt.value)}")
        elif isinstance(stmt, Return):
            lines.append(f"{indent}return {format_expr(stmt.value)}")
    return lines


def format_alu(program: AluProgram) -> str:
    header = f"{program.kind.value} alu {program.name}({', '.join(program.packet_operands)})"
    if program.state_vars:
        header += f" state({', '.join(program.state_vars)})"
    return "\n".join([header + ":", *format_body(program.body)]) + "\n"


# ---------------------------------------------------------------------------
# Reference evaluator


def check_bindings(alu: AluProgram, bindings: Mapping[HoleSlot, int]) -> None:
    for slot in alu.hole_slots:
        if slot not in bindings:
            raise MissingBinding(slot)
        value = bindings[slot]
        if value not in slot.valid_range:
            raise OutOfRangeBinding(slot, value, slot.valid_range)


class _Evaluator:
    def __init__(self, alu, bindings, operands, state):
        self.bindings = bindings
        self.operands = dict(zip(alu.packet_operands, operands))
        self.state_index = {name: i for i, name in enumerate(alu.state_vars)}
        self.state = state

    def expr(self, e: Expr, env: dict) -> int:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, OperandRef):
            return self.operands[e.name]
        if isinstance(e, StateRef):
            return self.state[self.state_index[e.name]]
        if isinstance(e, LocalRef):
            return env[e.name]
        if isinstance(e, Const):
            return to_signed(self.bindings[e.slot])
        if isinstance(e, Opt):
            return self.expr(e.arg, env) if self.bindings[e.slot] else 0
        if isinstance(e, Mux):
            return self.expr(e.args[self.bindings[e.slot]], env)
        if isinstance(e, HoleOp):
            op = HOLE_OP_TABLE[e.family][self.bindings[e.slot]]
            return apply_binop(op, self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, BinOp):
            return apply_binop(e.op, self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, Not):
            return int(self.expr(e.arg, env) == 0)
        raise TypeError(f"not an expression: {e!r}")

    def block(self, body: Sequence[Stmt], env: dict) -> int | None:
        env = dict(env)
        for stmt in body:
            if isinstance(stmt, Assign):
                self.state[self.state_index[stmt.target]] = self.expr(stmt.value, env)
            elif isinstance(stmt, Let):
                env[stmt.name] = self.expr(stmt.value, env)
            elif isinstance(stmt, Return):
                return self.expr(stmt.value, env)
            else:
                branch = stmt.then if self.expr(stmt.cond, env) != 0 else stmt.orelse
                result = self.block(branch, env)
                if result is not None:
                    return result
        return None


def eval_alu(
    alu: AluProgram,
    bindings: Mapping[HoleSlot, int],
    operands: Sequence[int],
    state: MutableSequence[int],
) -> int:
    """Evaluate one ALU invocation by walking its AST.

    ``state`` is updated in place.  This is the slow reference path used to
    cross-check the simulation kernels.
    """
    check_bindings(alu, bindings)
    if len(operands) != len(alu.packet_operands):
        raise ValueError(
            f"{alu.name} takes {len(alu.packet_operands)} operands, got {len(operands)}"
        )
    if len(state) != len(alu.state_vars):
        raise ValueError(f"{alu.name} has {len(alu.state_vars)} state variables, got {len(state)}")
    result = _Evaluator(alu, bindings, operands, state).block(alu.body, {})
    assert result is not None, "validated programs always return"
    return result
