"""Interpreter for mini-language programs over matrix values.

Executes type-checked programs from :mod:`mrkernel.minilang` so the
metamorphic-testing harness can run corpus functions as subjects.
Matrix arguments are copied on call entry, so a subject cannot mutate
its caller's inputs.  A step budget guards against runaway loops.
"""

from __future__ import annotations

from . import minilang as ml
from .matrices import Matrix

DEFAULT_STEP_BUDGET = 5_000_000


class ExecutionFault(Exception):
    """Any runtime failure of an interpreted subject."""


class _ReturnSignal(Exception):
    def __init__(self, value: object) -> None:
        self.value = value


class Interpreter:
    def __init__(self, program: ml.Program, step_budget: int = DEFAULT_STEP_BUDGET):
        self.program = program
        self.step_budget = step_budget
        self._steps = 0

    def call(self, name: str, args: list[object]) -> object:
        """Invoke a program function; resets the step budget per call."""
        self._steps = 0
        return self._call(name, list(args))

    def _call(self, name: str, args: list[object]) -> object:
        if name in ml.BUILTINS:
            return self._builtin(name, args)
        try:
            fn = self.program.function(name)
        except KeyError:
            raise ExecutionFault(f"unknown function {name!r}") from None
        if len(args) != len(fn.params):
            raise ExecutionFault(
                f"{name!r} takes {len(fn.params)} arguments, got {len(args)}"
            )
        env: dict[str, object] = {}
        for (pname, ptype), arg in zip(fn.params, args):
            if ptype == "matrix":
                if not isinstance(arg, Matrix):
                    raise ExecutionFault(f"argument {pname!r} must be a matrix")
                arg = arg.copy()
            env[pname] = arg
        try:
            self._exec_block(fn.body, env)
        except _ReturnSignal as ret:
            return ret.value
        if fn.return_type == "void":
            return None
        raise ExecutionFault(f"{name!r} finished without returning")

    def _builtin(self, name: str, args: list[object]) -> object:
        if name == "rows":
            return args[0].rows
        if name == "cols":
            return args[0].cols
        if name == "zeros":
            r, c = int(args[0]), int(args[1])
            if r <= 0 or c <= 0:
                raise ExecutionFault(f"zeros({r}, {c}): dimensions must be positive")
            return Matrix.zeros(r, c)
        raise ExecutionFault(f"unknown builtin {name!r}")

    def _tick(self) -> None:
        self._steps += 1
        if self._steps > self.step_budget:
            raise ExecutionFault("step budget exhausted (runaway loop?)")

    def _exec_block(self, stmts: tuple[ml.Stmt, ...], env: dict[str, object]) -> None:
        for stmt in stmts:
            self._exec_stmt(stmt, env)

    def _exec_stmt(self, stmt: ml.Stmt, env: dict[str, object]) -> None:
        self._tick()
        if isinstance(stmt, ml.Assign):
            env[stmt.target] = self._eval(stmt.value, env)
            return
        if isinstance(stmt, ml.Store):
            matrix = env.get(stmt.base)
            if not isinstance(matrix, Matrix):
                raise ExecutionFault(f"{stmt.base!r} is not a matrix")
            i = self._eval_int(stmt.row, env)
            j = self._eval_int(stmt.col_expr, env)
            value = self._eval(stmt.value, env)
            try:
                matrix.set(i, j, float(value))
            except (IndexError, ValueError) as exc:
                raise ExecutionFault(str(exc)) from None
            return
        if isinstance(stmt, ml.If):
            if self._eval_bool(stmt.cond, env):
                self._exec_block(stmt.then_body, env)
            elif stmt.else_body:
                self._exec_block(stmt.else_body, env)
            return
        if isinstance(stmt, ml.While):
            while self._eval_bool(stmt.cond, env):
                self._tick()
                self._exec_block(stmt.body, env)
            return
        if isinstance(stmt, ml.For):
            env[stmt.var] = self._eval_int(stmt.lo, env)
            # Matches the lowering desugar: the bound is re-evaluated each trip.
            while env[stmt.var] <= self._eval_int(stmt.hi, env):
                self._tick()
                self._exec_block(stmt.body, env)
                env[stmt.var] = env[stmt.var] + 1
            return
        if isinstance(stmt, ml.Return):
            value = self._eval(stmt.value, env) if stmt.value is not None else None
            raise _ReturnSignal(value)
        if isinstance(stmt, ml.ExprStmt):
            self._eval(stmt.call, env)
            return
        raise ExecutionFault(f"unhandled statement {stmt!r}")

    def _eval_int(self, expr: ml.Expr, env: dict[str, object]) -> int:
        value = self._eval(expr, env)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ExecutionFault(f"expected an int, got {value!r}")
        return value

    def _eval_bool(self, expr: ml.Expr, env: dict[str, object]) -> bool:
        value = self._eval(expr, env)
        if not isinstance(value, bool):
            raise ExecutionFault(f"expected a bool, got {value!r}")
        return value

    def _eval(self, expr: ml.Expr, env: dict[str, object]) -> object:
        self._tick()
        if isinstance(expr, ml.Num):
            return float(expr.value) if expr.is_real else int(expr.value)
        if isinstance(expr, ml.BoolLit):
            return expr.value
        if isinstance(expr, ml.Var):
            try:
                return env[expr.name]
            except KeyError:
                raise ExecutionFault(f"unbound variable {expr.name!r}") from None
        if isinstance(expr, ml.Unary):
            operand = self._eval(expr.operand, env)
            if expr.op == "neg":
                return -operand
            return not operand
        if isinstance(expr, ml.Binary):
            return self._binary(expr, env)
        if isinstance(expr, ml.Index):
            matrix = env.get(expr.base)
            if not isinstance(matrix, Matrix):
                raise ExecutionFault(f"{expr.base!r} is not a matrix")
            i = self._eval_int(expr.row, env)
            j = self._eval_int(expr.col_expr, env)
            try:
                return matrix.get(i, j)
            except IndexError as exc:
                raise ExecutionFault(str(exc)) from None
        if isinstance(expr, ml.Call):
            args = [self._eval(arg, env) for arg in expr.args]
            return self._call(expr.name, args)
        raise ExecutionFault(f"unhandled expression {expr!r}")

    def _binary(self, expr: ml.Binary, env: dict[str, object]) -> object:
        op = expr.op
        left = self._eval(expr.left, env)
        right = self._eval(expr.right, env)
        if op == "and":
            return bool(left) and bool(right)
        if op == "or":
            return bool(left) or bool(right)
        if op == "add":
            return left + right
        if op == "sub":
            return left - right
        if op == "mul":
            return left * right
        if op == "div":
            if right == 0:
                raise ExecutionFault("division by zero")
            if isinstance(left, int) and isinstance(right, int):
                return left // right
            return left / right
        if op == "mod":
            if right == 0:
                raise ExecutionFault("modulo by zero")
            return left % right
        if op == "eq":
            return left == right
        if op == "neq":
            return left != right
        if op == "lt":
            return left < right
        if op == "le":
            return left <= right
        if op == "gt":
            return left > right
        if op == "ge":
            return left >= right
        raise ExecutionFault(f"unhandled operator {op!r}")
