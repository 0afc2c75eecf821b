"""Lowering of mini-language functions to control-flow graphs.

Each compound expression is decomposed into three-address instructions and
every instruction becomes exactly one CFG node labeled by its operation:
operators keep their kind, pure copies become ``assign``, literal loads
become ``const``, matrix element accesses become ``index_load`` /
``index_store``, and calls become ``call:<return type>``.  Conditions of
``if``/``while``/``for`` end in a node with two out-edges; ``for`` loops
desugar to an init assignment plus a ``while`` with an increment.

The result is deterministic: identical source text yields identical node
ids, labels, and edge order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cfg import Cfg, NodeLabel
from . import minilang as ml


@dataclass(frozen=True)
class Atom:
    """An operand: a literal value, a named variable, or a temp."""

    kind: str  # "lit" | "var" | "temp"
    value: object

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class TacInstruction:
    """One atomic operation; lowers to exactly one CFG node.

    ``args`` holds up to two operand atoms for scalar operators; the matrix
    element forms carry the two indices plus base or stored value.
    """

    op: str
    dest: str | None
    args: tuple[Atom, ...]
    return_type: str | None = None  # calls only
    callee: str | None = None       # calls only

    def label(self) -> NodeLabel:
        if self.op == "call":
            return NodeLabel("call", self.return_type)
        return NodeLabel(self.op)


class _FnLowerer:
    def __init__(self, program: ml.Program, fn: ml.FnDef) -> None:
        self.program = program
        self.fn = fn
        self.instrs: list[TacInstruction] = []
        self.edges: list[tuple[int, int]] = []
        self.exit_sources: list[int] = []
        self.temp_count = 0

    # -- plumbing ----------------------------------------------------------

    def new_temp(self) -> str:
        name = f"%t{self.temp_count}"
        self.temp_count += 1
        return name

    def emit(self, instr: TacInstruction, pending: list[int]) -> int:
        """Append an instruction node and wire all dangling exits to it."""
        idx = len(self.instrs)
        self.instrs.append(instr)
        for src in pending:
            self.edges.append((src, idx))
        return idx

    # -- expressions -------------------------------------------------------

    def lower_expr(self, expr: ml.Expr, pending: list[int]) -> tuple[Atom, list[int]]:
        """Lower an expression; returns its value atom and the new dangling set."""
        if isinstance(expr, ml.Num):
            value = float(expr.value) if expr.is_real else int(expr.value)
            return Atom("lit", value), pending
        if isinstance(expr, ml.BoolLit):
            return Atom("lit", expr.value), pending
        if isinstance(expr, ml.Var):
            return Atom("var", expr.name), pending
        if isinstance(expr, ml.Unary):
            operand, pending = self.lower_expr(expr.operand, pending)
            dest = self.new_temp()
            op = "neg" if expr.op == "neg" else "not"
            idx = self.emit(TacInstruction(op, dest, (operand,)), pending)
            return Atom("temp", dest), [idx]
        if isinstance(expr, ml.Binary):
            left, pending = self.lower_expr(expr.left, pending)
            right, pending = self.lower_expr(expr.right, pending)
            dest = self.new_temp()
            idx = self.emit(TacInstruction(expr.op, dest, (left, right)), pending)
            return Atom("temp", dest), [idx]
        if isinstance(expr, ml.Index):
            row, pending = self.lower_expr(expr.row, pending)
            col, pending = self.lower_expr(expr.col_expr, pending)
            dest = self.new_temp()
            idx = self.emit(
                TacInstruction("index_load", dest, (Atom("var", expr.base), row, col)),
                pending,
            )
            return Atom("temp", dest), [idx]
        if isinstance(expr, ml.Call):
            args = []
            for arg in expr.args:
                atom, pending = self.lower_expr(arg, pending)
                args.append(atom)
            _, rtype = self.program.signature(expr.name)
            dest = self.new_temp() if rtype != "void" else None
            idx = self.emit(
                TacInstruction("call", dest, tuple(args), rtype, expr.name), pending
            )
            return Atom("temp", dest), [idx]
        raise AssertionError(f"unhandled expression {expr!r}")

    def lower_condition(self, cond: ml.Expr, pending: list[int]) -> int:
        """Lower a condition; the returned node takes the two branch edges."""
        atom, pending = self.lower_expr(cond, pending)
        if atom.kind == "temp" and pending and self.instrs[pending[-1]].dest == atom.value:
            return pending[-1]
        # Bare variable or literal condition: materialize a node to branch on.
        op = "assign" if atom.kind != "lit" else "const"
        return self.emit(TacInstruction(op, self.new_temp(), (atom,)), pending)

    # -- statements --------------------------------------------------------

    def lower_block(self, stmts: tuple[ml.Stmt, ...], pending: list[int]) -> list[int]:
        for stmt in stmts:
            pending = self.lower_stmt(stmt, pending)
        return pending

    def lower_stmt(self, stmt: ml.Stmt, pending: list[int]) -> list[int]:
        if isinstance(stmt, ml.Assign):
            return self.lower_assign(stmt.target, stmt.value, pending)
        if isinstance(stmt, ml.Store):
            row, pending = self.lower_expr(stmt.row, pending)
            col, pending = self.lower_expr(stmt.col_expr, pending)
            value, pending = self.lower_expr(stmt.value, pending)
            idx = self.emit(
                TacInstruction("index_store", stmt.base, (row, col, value)), pending
            )
            return [idx]
        if isinstance(stmt, ml.If):
            branch = self.lower_condition(stmt.cond, pending)
            then_out = self.lower_block(stmt.then_body, [branch])
            else_out = self.lower_block(stmt.else_body, [branch]) if stmt.else_body else [branch]
            return then_out + else_out
        if isinstance(stmt, ml.While):
            return self.lower_while(stmt.cond, stmt.body, pending)
        if isinstance(stmt, ml.For):
            increment = ml.Assign(
                stmt.var, ml.Binary("add", ml.Var(stmt.var), ml.Num(1, False))
            )
            pending = self.lower_assign(stmt.var, stmt.lo, pending)
            cond = ml.Binary("le", ml.Var(stmt.var), stmt.hi)
            return self.lower_while(cond, stmt.body + (increment,), pending)
        if isinstance(stmt, ml.Return):
            args: tuple[Atom, ...] = ()
            if stmt.value is not None:
                atom, pending = self.lower_expr(stmt.value, pending)
                args = (atom,)
            idx = self.emit(TacInstruction("return", None, args), pending)
            self.exit_sources.append(idx)
            return []
        if isinstance(stmt, ml.ExprStmt):
            _, pending = self.lower_expr(stmt.call, pending)
            return pending
        raise AssertionError(f"unhandled statement {stmt!r}")

    def lower_assign(self, target: str, value: ml.Expr, pending: list[int]) -> list[int]:
        if isinstance(value, ml.Num):
            lit = float(value.value) if value.is_real else int(value.value)
            idx = self.emit(TacInstruction("const", target, (Atom("lit", lit),)), pending)
            return [idx]
        if isinstance(value, ml.BoolLit):
            idx = self.emit(
                TacInstruction("const", target, (Atom("lit", value.value),)), pending
            )
            return [idx]
        if isinstance(value, ml.Var):
            idx = self.emit(
                TacInstruction("assign", target, (Atom("var", value.name),)), pending
            )
            return [idx]
        # Compound value: compute into a temp, then copy into the variable.
        atom, pending = self.lower_expr(value, pending)
        idx = self.emit(TacInstruction("assign", target, (atom,)), pending)
        return [idx]

    def lower_while(
        self, cond: ml.Expr, body: tuple[ml.Stmt, ...], pending: list[int]
    ) -> list[int]:
        entry = len(self.instrs)
        branch = self.lower_condition(cond, pending)
        body_out = self.lower_block(body, [branch])
        for src in body_out:
            self.edges.append((src, entry))
        return [branch]

    # -- assembly ----------------------------------------------------------

    def build(self) -> Cfg:
        pending = self.lower_block(self.fn.body, [-1])  # -1 stands for start
        if pending:
            # Falling off the end of a void function: implicit return.
            idx = self.emit(TacInstruction("return", None, ()), pending)
            self.exit_sources.append(idx)

        nodes: list[tuple[str, NodeLabel]] = [("n0", NodeLabel("start"))]
        for i, instr in enumerate(self.instrs):
            nodes.append((f"n{i + 1}", instr.label()))
        exit_id = f"n{len(self.instrs) + 1}"
        nodes.append((exit_id, NodeLabel("exit")))

        def node_id(idx: int) -> str:
            return "n0" if idx == -1 else f"n{idx + 1}"

        edges: list[tuple[str, str]] = []
        seen: set[tuple[str, str]] = set()
        for a, b in self.edges:
            edge = (node_id(a), node_id(b))
            if edge not in seen:
                seen.add(edge)
                edges.append(edge)
        for src in self.exit_sources:
            edge = (node_id(src), exit_id)
            if edge not in seen:
                seen.add(edge)
                edges.append(edge)

        return Cfg.build(self.fn.name, nodes, edges)


def lower_to_cfg(program: ml.Program, function_name: str) -> Cfg:
    """Lower one function of a checked program to its CFG."""
    fn = program.function(function_name)
    return _FnLowerer(program, fn).build()


def compile_source(text: str) -> dict[str, Cfg]:
    """Parse, check, and lower every function of a source file."""
    program = ml.parse_source(text)
    return {fn.name: lower_to_cfg(program, fn.name) for fn in program.functions}
