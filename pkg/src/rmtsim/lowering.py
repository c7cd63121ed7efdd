"""Lower a bound pipeline to a flat instruction tape for the kernels.

Every instruction is three int64 words ``(op, a, b)``.  An unoptimized
pipeline keeps machine code as runtime data: holes, input multiplexers and
output multiplexers look their control values up in the ``mc`` array on
every evaluation.  An optimized pipeline has no holes left and its
multiplexers are resolved to fixed container/ALU indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rmtsim.alu import (
    Assign,
    BinOp,
    Const,
    HoleOp,
    If,
    IntLit,
    Let,
    LocalRef,
    Mux,
    Not,
    OperandRef,
    Opt,
    Return,
    StateRef,
    slot_names,
    to_signed,
)
from rmtsim.errors import UnboundPipeline
from rmtsim.pipeline import Pipeline

# Opcodes; keep in sync with _ckernel.pyx and _pykernel.py.
OP_CONST = 0      # push a
OP_PHV = 1        # push phv[a]
OP_MUXPHV = 2     # push phv[mc[a]]
OP_STATE = 3      # push state[a]
OP_MCVAL = 4      # push mc[a]
OP_LOCAL = 5      # push locals[a]
OP_SETLOCAL = 6   # locals[a] = pop
OP_SETSTATE = 7   # state[a] = pop
OP_ADD = 8
OP_SUB = 9
OP_NE = 10
OP_LT = 11
OP_GT = 12
OP_EQ = 13
OP_AND = 14
OP_OR = 15
OP_NOT = 16
OP_ARITH = 17     # opcode mc[a] selects + or -
OP_REL = 18       # opcode mc[a] selects != < > ==
OP_LOGIC = 19     # opcode mc[a] selects && ||
OP_OPT = 20       # pop x; push x if mc[a] else 0
OP_MUX = 21       # pop b values; push the one chosen by mc[a]
OP_JUMPF = 22     # pop; jump to a if zero
OP_JUMP = 23
OP_RET = 24
OP_ADDK = 25      # top = top + a; likewise for the other *K forms
OP_SUBK = 26
OP_NEK = 27
OP_LTK = 28
OP_GTK = 29
OP_EQK = 30

OPNAMES = {v: k[3:] for k, v in globals().items() if k.startswith("OP_")}

_BINOP_CODES = {
    "+": OP_ADD, "-": OP_SUB, "!=": OP_NE, "<": OP_LT,
    ">": OP_GT, "==": OP_EQ, "&&": OP_AND, "||": OP_OR,
}
# Binary operators with a literal right operand fold into one instruction.
_BINOP_K_CODES = {
    "+": OP_ADDK, "-": OP_SUBK, "!=": OP_NEK, "<": OP_LTK, ">": OP_GTK, "==": OP_EQK,
}
_SWAPPED = {"+": "+", "!=": "!=", "==": "==", "<": ">", ">": "<"}


def _const_form(e):
    """(operand, op, literal) when ``e`` can use a *K instruction, else None."""
    if not isinstance(e, BinOp) or e.op not in _BINOP_K_CODES:
        return None
    if isinstance(e.right, IntLit):
        return e.left, e.op, e.right.value
    if isinstance(e.left, IntLit) and e.op in _SWAPPED:
        return e.right, _SWAPPED[e.op], e.left.value
    return None


_HOLEOP_CODES = {"arith": OP_ARITH, "rel": OP_REL, "logic": OP_LOGIC}


@dataclass(frozen=True)
class CompiledPipeline:
    code: np.ndarray          # int64[3 * n_instructions]
    alu_entry: np.ndarray     # int64[n_alus], first instruction of each ALU, -1 if dead
    stage_start: np.ndarray   # int64[depth + 1], ALU index ranges per stage
    omux: np.ndarray          # int64[depth * phv_length]
    omux_dynamic: int         # 1: omux holds mc indices, 0: ALU indices
    mc: np.ndarray            # int64[n_slots], signed reinterpretation
    stage_state: np.ndarray   # int64[2 * depth], state range per stage
    depth: int
    width: int
    phv_length: int
    state_size: int
    n_locals: int
    max_stack: int

    @property
    def n_instructions(self) -> int:
        return len(self.code) // 3

    def disassemble(self) -> str:
        lines = []
        entries = {int(e): i for i, e in enumerate(self.alu_entry)}
        for pc in range(self.n_instructions):
            if pc in entries:
                lines.append(f"alu {entries[pc]}:")
            op, a, b = (int(x) for x in self.code[3 * pc: 3 * pc + 3])
            lines.append(f"  {pc:4d} {OPNAMES[op]:<8} {a} {b}")
        return "\n".join(lines)


def _stack_need(expr) -> int:
    if isinstance(expr, (Opt, Not)):
        return _stack_need(expr.arg)
    if isinstance(expr, Mux):
        return max(i + _stack_need(arg) for i, arg in enumerate(expr.args))
    if _const_form(expr) is not None:
        return _stack_need(_const_form(expr)[0])
    if isinstance(expr, (HoleOp, BinOp)):
        return max(_stack_need(expr.left), 1 + _stack_need(expr.right))
    return 1


class _AluCompiler:
    def __init__(self, alu, mc_index, state_base, dynamic, emit):
        self.alu = alu
        self.program = alu.program
        self.dynamic = dynamic
        self.emit = emit
        self.state_base = state_base
        self.state_index = {n: i for i, n in enumerate(self.program.state_vars)}
        self.operand_index = {n: i for i, n in enumerate(self.program.packet_operands)}
        self.slot_mc = {}
        if dynamic:
            names = slot_names(self.program, alu.path)
            self.slot_mc = {s: mc_index[n] for s, n in zip(self.program.hole_slots, names)}
        self.mux_mc = [mc_index[m.name] for m in alu.input_muxes]
        self.locals: dict[str, int] = {}
        self.max_stack = 1

    def expr(self, e) -> None:
        emit = self.emit
        if isinstance(e, IntLit):
            emit(OP_CONST, e.value)
        elif isinstance(e, OperandRef):
            k = self.operand_index[e.name]
            if self.dynamic:
                emit(OP_MUXPHV, self.mux_mc[k])
            else:
                emit(OP_PHV, self.alu.input_muxes[k].ctrl)
        elif isinstance(e, StateRef):
            emit(OP_STATE, self.state_base + self.state_index[e.name])
        elif isinstance(e, LocalRef):
            emit(OP_LOCAL, self.locals[e.name])
        elif isinstance(e, Const):
            emit(OP_MCVAL, self.slot_mc[e.slot])
        elif isinstance(e, Opt):
            self.expr(e.arg)
            emit(OP_OPT, self.slot_mc[e.slot])
        elif isinstance(e, Mux):
            for arg in e.args:
                self.expr(arg)
            emit(OP_MUX, self.slot_mc[e.slot], len(e.args))
        elif isinstance(e, HoleOp):
            self.expr(e.left)
            self.expr(e.right)
            emit(_HOLEOP_CODES[e.family], self.slot_mc[e.slot])
        elif _const_form(e) is not None:
            operand, op, value = _const_form(e)
            self.expr(operand)
            emit(_BINOP_K_CODES[op], value)
        elif isinstance(e, BinOp):
            self.expr(e.left)
            self.expr(e.right)
            emit(_BINOP_CODES[e.op])
        elif isinstance(e, Not):
            self.expr(e.arg)
            emit(OP_NOT)
        else:
            raise TypeError(f"cannot lower {e!r}")

    def value(self, e) -> None:
        self.max_stack = max(self.max_stack, _stack_need(e))
        self.expr(e)

    def block(self, body, patch) -> None:
        for stmt in body:
            if isinstance(stmt, Assign):
                self.value(stmt.value)
                self.emit(OP_SETSTATE, self.state_base + self.state_index[stmt.target])
            elif isinstance(stmt, Let):
                self.value(stmt.value)
                slot = self.locals.setdefault(stmt.name, len(self.locals))
                self.emit(OP_SETLOCAL, slot)
            elif isinstance(stmt, Return):
                self.value(stmt.value)
                self.emit(OP_RET)
            elif isinstance(stmt, If):
                self.value(stmt.cond)
                jumpf = self.emit(OP_JUMPF, -1)
                self.block(stmt.then, patch)
                if stmt.orelse:
                    jump = self.emit(OP_JUMP, -1)
                    patch(jumpf, self.emit.pc())
                    self.block(stmt.orelse, patch)
                    patch(jump, self.emit.pc())
                else:
                    patch(jumpf, self.emit.pc())


class _Emitter:
    def __init__(self):
        self.words: list[int] = []

    def __call__(self, op: int, a: int = 0, b: int = 0) -> int:
        self.words.extend((op, a, b))
        return len(self.words) // 3 - 1

    def pc(self) -> int:
        return len(self.words) // 3


def lower(pipeline: Pipeline) -> CompiledPipeline:
    if not pipeline.bound:
        raise UnboundPipeline()
    dynamic = not pipeline.optimized
    names = pipeline.catalog.names()
    mc_index = {name: i for i, name in enumerate(names)}
    mc = np.array([to_signed(pipeline.machine_code[n]) for n in names], dtype=np.int64)

    emit = _Emitter()

    def patch(at: int, target: int) -> None:
        emit.words[3 * at + 1] = target

    layout = pipeline.state_layout()
    entries, stage_start, omux = [], [0], []
    n_locals, max_stack = 1, 1
    for stage in pipeline.stages:
        selected = {mux.ctrl for mux in stage.output_muxes}
        for alu in stage.alus:
            if not dynamic and not alu.program.is_stateful and alu.slot not in selected:
                # no output mux reads it and it has no state: never evaluated
                entries.append(-1)
                continue
            entries.append(emit.pc())
            base = layout.lookup(alu.path)[0] if alu.program.is_stateful else 0
            compiler = _AluCompiler(alu, mc_index, base, dynamic, emit)
            compiler.block(alu.program.body, patch)
            n_locals = max(n_locals, len(compiler.locals))
            max_stack = max(max_stack, compiler.max_stack)
        stage_start.append(len(entries))
        for mux in stage.output_muxes:
            omux.append(mc_index[mux.name] if dynamic else mux.ctrl)

    stage_state = [bound for pair in layout.stage_ranges for bound in pair]
    as_array = lambda xs: np.ascontiguousarray(xs, dtype=np.int64)  # noqa: E731
    return CompiledPipeline(
        code=as_array(emit.words),
        alu_entry=as_array(entries),
        stage_start=as_array(stage_start),
        omux=as_array(omux),
        omux_dynamic=int(dynamic),
        mc=mc,
        stage_state=as_array(stage_state),
        depth=pipeline.depth,
        width=pipeline.width,
        phv_length=pipeline.phv_length,
        state_size=layout.size,
        n_locals=n_locals,
        max_stack=max_stack,
    )
