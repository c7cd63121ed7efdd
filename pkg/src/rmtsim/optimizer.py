"""Sparse conditional constant propagation over ALU bodies.

Once machine code is fixed every hole is a compile-time constant.  The pass
substitutes those constants, folds the resulting constant expressions,
resolves branches whose condition became constant and drops code that can
no longer run.  Locals are inlined.  The result has no holes left.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping, Sequence

from rmtsim.alu import (
    HOLE_OP_TABLE,
    AluProgram,
    Assign,
    BinOp,
    Const,
    Expr,
    HoleOp,
    HoleSlot,
    If,
    IntLit,
    Let,
    LocalRef,
    Mux,
    Not,
    Opt,
    Return,
    StateRef,
    apply_binop,
    check_bindings,
    iter_body_exprs,
    iter_stmts,
    to_signed,
    validate_alu,
)


def fold_expr(expr: Expr, bindings: Mapping[HoleSlot, int], env: Mapping[str, Expr]) -> Expr:
    if isinstance(expr, Const):
        return IntLit(to_signed(bindings[expr.slot]))
    if isinstance(expr, LocalRef):
        return env.get(expr.name, expr)
    if isinstance(expr, Opt):
        return fold_expr(expr.arg, bindings, env) if bindings[expr.slot] else IntLit(0)
    if isinstance(expr, Mux):
        return fold_expr(expr.args[bindings[expr.slot]], bindings, env)
    if isinstance(expr, HoleOp):
        op = HOLE_OP_TABLE[expr.family][bindings[expr.slot]]
        return _fold_binop(
            op, fold_expr(expr.left, bindings, env), fold_expr(expr.right, bindings, env)
        )
    if isinstance(expr, BinOp):
        return _fold_binop(
            expr.op, fold_expr(expr.left, bindings, env), fold_expr(expr.right, bindings, env)
        )
    if isinstance(expr, Not):
        arg = fold_expr(expr.arg, bindings, env)
        return IntLit(int(arg.value == 0)) if isinstance(arg, IntLit) else Not(arg)
    return expr


def _fold_binop(op: str, left: Expr, right: Expr) -> Expr:
    lconst = isinstance(left, IntLit)
    rconst = isinstance(right, IntLit)
    if lconst and rconst:
        return IntLit(apply_binop(op, left.value, right.value))
    # Expressions are side-effect free, so short-circuit identities are safe.
    if op == "+" and lconst and left.value == 0:
        return right
    if op in ("+", "-") and rconst and right.value == 0:
        return left
    if op == "&&" and ((lconst and left.value == 0) or (rconst and right.value == 0)):
        return IntLit(0)
    if op == "||" and ((lconst and left.value != 0) or (rconst and right.value != 0)):
        return IntLit(1)
    return BinOp(op, left, right)


def fold_block(
    body: Sequence, bindings: Mapping[HoleSlot, int], env: Mapping[str, Expr]
) -> tuple[list, bool]:
    """Fold a statement list.  Returns (statements, falls_through)."""
    env = dict(env)
    out: list = []
    for stmt in body:
        if isinstance(stmt, Let):
            env[stmt.name] = fold_expr(stmt.value, bindings, env)
        elif isinstance(stmt, Assign):
            value = fold_expr(stmt.value, bindings, env)
            if value != StateRef(stmt.target):  # s = s is a no-op
                out.append(Assign(stmt.target, value))
        elif isinstance(stmt, Return):
            out.append(Return(fold_expr(stmt.value, bindings, env)))
            return out, False
        else:
            cond = fold_expr(stmt.cond, bindings, env)
            if isinstance(cond, IntLit):
                taken, falls = fold_block(stmt.then if cond.value else stmt.orelse, bindings, env)
                out.extend(taken)
                if not falls:
                    return out, False
                continue
            then, then_falls = fold_block(stmt.then, bindings, env)
            orelse, else_falls = fold_block(stmt.orelse, bindings, env)
            if not then and not orelse:
                continue
            if not then:
                cond, then, orelse = _negate(cond), orelse, []
            out.append(If(cond, tuple(then), tuple(orelse)))
            if not (then_falls or else_falls):
                return out, False
    return out, True


def _negate(cond: Expr) -> Expr:
    # Only the truthiness of a branch condition matters, so !!x may become x.
    return cond.arg if isinstance(cond, Not) else Not(cond)


def specialize(program: AluProgram, bindings: Mapping[HoleSlot, int] | None) -> AluProgram:
    """Return a hole-free program equivalent to ``program`` under ``bindings``."""
    bindings = bindings or {}
    check_bindings(program, bindings)
    body, _ = fold_block(program.body, bindings, {})
    result = replace(program, body=tuple(body), hole_slots=())
    validate_alu(result)
    return result


def count_holes(program: AluProgram) -> int:
    return sum(
        isinstance(node, (Const, Opt, Mux, HoleOp)) for node in iter_body_exprs(program.body)
    )


def constant_conditions(program: AluProgram) -> int:
    return sum(
        isinstance(stmt, If) and isinstance(stmt.cond, IntLit) for stmt in iter_stmts(program.body)
    )
