"""Frontend for the mini imperative matrix language.

The language covers what the corpus functions need: scalar arithmetic,
comparisons, boolean operators, ``if/else``, ``while``, ``for i = a to b``
(inclusive bounds), function calls, ``return``, and matrix element access
``m[i][j]``.  Matrices are created with the builtin ``zeros(r, c)``;
``rows(m)`` and ``cols(m)`` query dimensions.

``parse_source`` produces a type-checked :class:`Program`; lowering to a
CFG lives in :mod:`mrkernel.lowering`, execution in :mod:`mrkernel.interp`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

TYPES = ("int", "real", "bool", "matrix")
RETURN_TYPES = TYPES + ("void",)

KEYWORDS = {
    "fn", "if", "else", "while", "for", "to", "return",
    "true", "false", "and", "or", "not",
    "int", "real", "bool", "matrix", "void",
}

#: Builtin functions available to every program: name -> (param types, return type).
BUILTINS = {
    "rows": (("matrix",), "int"),
    "cols": (("matrix",), "int"),
    "zeros": (("int", "int"), "matrix"),
}


class MinilangError(ValueError):
    """Base class for frontend errors; carries a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


class MinilangSyntaxError(MinilangError):
    pass


class MinilangTypeError(MinilangError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    is_real: bool
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class BoolLit:
    value: bool
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" | "not"
    operand: "Expr"
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Binary:
    op: str  # add sub mul div mod eq neq lt le gt ge and or
    left: "Expr"
    right: "Expr"
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Index:
    base: str
    row: "Expr"
    col_expr: "Expr"
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    line: int = 0
    col: int = 0


Expr = Num | BoolLit | Var | Unary | Binary | Index | Call


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Store:
    base: str
    row: Expr
    col_expr: Expr
    value: Expr
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class If:
    cond: Expr
    then_body: tuple["Stmt", ...]
    else_body: tuple["Stmt", ...]
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple["Stmt", ...]
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    body: tuple["Stmt", ...]
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Return:
    value: Expr | None
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class ExprStmt:
    call: Call
    line: int = 0
    col: int = 0


Stmt = Assign | Store | If | While | For | Return | ExprStmt


@dataclass(frozen=True)
class FnDef:
    name: str
    params: tuple[tuple[str, str], ...]  # (name, type)
    return_type: str
    body: tuple[Stmt, ...]
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Program:
    functions: tuple[FnDef, ...]
    # Filled by the checker: per-function variable types, including params.
    var_types: dict[str, dict[str, str]] = field(compare=False, default_factory=dict)

    def function(self, name: str) -> FnDef:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)

    def signature(self, name: str) -> tuple[tuple[str, ...], str]:
        if name in BUILTINS:
            return BUILTINS[name]
        fn = self.function(name)
        return tuple(t for _, t in fn.params), fn.return_type


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_LEX_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>//[^\n]*)
      | (?P<real>\d+\.\d+)
      | (?P<int>\d+)
      | (?P<ident>[A-Za-z_]\w*)
      | (?P<op>==|!=|<=|>=|[-+*/%<>=(){}\[\],:;])
    """,
    re.VERBOSE,
)


def _lex(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _LEX_RE.match(text, pos)
        if m is None:
            raise MinilangSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "ident" and value in KEYWORDS:
            kind = value
        if kind not in ("ws", "comment"):
            tokens.append((kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent)
# ---------------------------------------------------------------------------

_CMP_OPS = {"==": "eq", "!=": "neq", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}
_ADD_OPS = {"+": "add", "-": "sub"}
_MUL_OPS = {"*": "mul", "/": "div", "%": "mod"}


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = _lex(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        if tok[0] != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise MinilangSyntaxError(
                f"expected {kind!r}, got {tok[1] or 'end of file'!r}", tok[2], tok[3]
            )
        return tok

    def expect_op(self, op: str):
        tok = self.next()
        if tok[0] != "op" or tok[1] != op:
            raise MinilangSyntaxError(
                f"expected {op!r}, got {tok[1] or 'end of file'!r}", tok[2], tok[3]
            )
        return tok

    def accept_op(self, op: str) -> bool:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == op:
            self.next()
            return True
        return False

    def parse_program(self) -> Program:
        functions = []
        while self.peek()[0] != "eof":
            functions.append(self.parse_fn())
        if not functions:
            tok = self.peek()
            raise MinilangSyntaxError("empty program", tok[2], tok[3])
        return Program(tuple(functions))

    def parse_fn(self) -> FnDef:
        kw = self.expect("fn")
        name = self.expect("ident")[1]
        self.expect_op("(")
        params = []
        if not self.accept_op(")"):
            while True:
                pname = self.expect("ident")[1]
                self.expect_op(":")
                ptype = self.parse_type(allow_void=False)
                params.append((pname, ptype))
                if self.accept_op(")"):
                    break
                self.expect_op(",")
        self.expect_op(":")
        rtype = self.parse_type(allow_void=True)
        body = self.parse_block()
        return FnDef(name, tuple(params), rtype, body, kw[2], kw[3])

    def parse_type(self, allow_void: bool) -> str:
        tok = self.next()
        valid = RETURN_TYPES if allow_void else TYPES
        if tok[0] not in valid:
            raise MinilangSyntaxError(
                f"expected a type, got {tok[1]!r}", tok[2], tok[3]
            )
        return tok[0]

    def parse_block(self) -> tuple[Stmt, ...]:
        self.expect_op("{")
        stmts = []
        while not self.accept_op("}"):
            if self.peek()[0] == "eof":
                tok = self.peek()
                raise MinilangSyntaxError("unexpected end of file in block", tok[2], tok[3])
            stmts.append(self.parse_stmt())
        return tuple(stmts)

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok[0] == "if":
            return self.parse_if()
        if tok[0] == "while":
            self.next()
            self.expect_op("(")
            cond = self.parse_expr()
            self.expect_op(")")
            body = self.parse_block()
            return While(cond, body, tok[2], tok[3])
        if tok[0] == "for":
            self.next()
            var = self.expect("ident")[1]
            self.expect_op("=")
            lo = self.parse_expr()
            self.expect("to")
            hi = self.parse_expr()
            body = self.parse_block()
            return For(var, lo, hi, body, tok[2], tok[3])
        if tok[0] == "return":
            self.next()
            if self.accept_op(";"):
                return Return(None, tok[2], tok[3])
            value = self.parse_expr()
            self.expect_op(";")
            return Return(value, tok[2], tok[3])
        if tok[0] == "ident":
            return self.parse_assign_or_call()
        raise MinilangSyntaxError(f"unexpected token {tok[1]!r}", tok[2], tok[3])

    def parse_if(self) -> If:
        tok = self.expect("if")
        self.expect_op("(")
        cond = self.parse_expr()
        self.expect_op(")")
        then_body = self.parse_block()
        else_body: tuple[Stmt, ...] = ()
        if self.peek()[0] == "else":
            self.next()
            if self.peek()[0] == "if":
                else_body = (self.parse_if(),)
            else:
                else_body = self.parse_block()
        return If(cond, then_body, else_body, tok[2], tok[3])

    def parse_assign_or_call(self) -> Stmt:
        tok = self.expect("ident")
        name = tok[1]
        if self.accept_op("("):
            call = self.finish_call(name, tok)
            self.expect_op(";")
            return ExprStmt(call, tok[2], tok[3])
        if self.accept_op("["):
            row = self.parse_expr()
            self.expect_op("]")
            self.expect_op("[")
            col = self.parse_expr()
            self.expect_op("]")
            self.expect_op("=")
            value = self.parse_expr()
            self.expect_op(";")
            return Store(name, row, col, value, tok[2], tok[3])
        self.expect_op("=")
        value = self.parse_expr()
        self.expect_op(";")
        return Assign(name, value, tok[2], tok[3])

    def finish_call(self, name: str, tok) -> Call:
        args = []
        if not self.accept_op(")"):
            while True:
                args.append(self.parse_expr())
                if self.accept_op(")"):
                    break
                self.expect_op(",")
        return Call(name, tuple(args), tok[2], tok[3])

    # Expression grammar, loosest to tightest binding.
    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.peek()[0] == "or":
            tok = self.next()
            left = Binary("or", left, self.parse_and(), tok[2], tok[3])
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.peek()[0] == "and":
            tok = self.next()
            left = Binary("and", left, self.parse_not(), tok[2], tok[3])
        return left

    def parse_not(self) -> Expr:
        tok = self.peek()
        if tok[0] == "not":
            self.next()
            return Unary("not", self.parse_not(), tok[2], tok[3])
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        tok = self.peek()
        if tok[0] == "op" and tok[1] in _CMP_OPS:
            self.next()
            right = self.parse_add()
            return Binary(_CMP_OPS[tok[1]], left, right, tok[2], tok[3])
        return left

    def parse_add(self) -> Expr:
        left = self.parse_mul()
        while True:
            tok = self.peek()
            if tok[0] == "op" and tok[1] in _ADD_OPS:
                self.next()
                left = Binary(_ADD_OPS[tok[1]], left, self.parse_mul(), tok[2], tok[3])
            else:
                return left

    def parse_mul(self) -> Expr:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok[0] == "op" and tok[1] in _MUL_OPS:
                self.next()
                left = Binary(_MUL_OPS[tok[1]], left, self.parse_unary(), tok[2], tok[3])
            else:
                return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.next()
            return Unary("neg", self.parse_unary(), tok[2], tok[3])
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.next()
        if tok[0] == "int":
            return Num(int(tok[1]), False, tok[2], tok[3])
        if tok[0] == "real":
            return Num(float(tok[1]), True, tok[2], tok[3])
        if tok[0] == "true":
            return BoolLit(True, tok[2], tok[3])
        if tok[0] == "false":
            return BoolLit(False, tok[2], tok[3])
        if tok[0] == "op" and tok[1] == "(":
            expr = self.parse_expr()
            self.expect_op(")")
            return expr
        if tok[0] == "ident":
            name = tok[1]
            if self.accept_op("("):
                return self.finish_call(name, tok)
            if self.accept_op("["):
                row = self.parse_expr()
                self.expect_op("]")
                self.expect_op("[")
                col = self.parse_expr()
                self.expect_op("]")
                return Index(name, row, col, tok[2], tok[3])
            return Var(name, tok[2], tok[3])
        raise MinilangSyntaxError(
            f"unexpected token {tok[1] or 'end of file'!r}", tok[2], tok[3]
        )


# ---------------------------------------------------------------------------
# Semantic checks
# ---------------------------------------------------------------------------

_NUMERIC = ("int", "real")


class _Checker:
    def __init__(self, program: Program) -> None:
        self.program = program
        self.signatures: dict[str, tuple[tuple[str, ...], str]] = dict(BUILTINS)

    def run(self) -> None:
        for fn in self.program.functions:
            if fn.name in self.signatures:
                raise MinilangTypeError(
                    f"duplicate function name {fn.name!r}", fn.line, fn.col
                )
            self.signatures[fn.name] = (tuple(t for _, t in fn.params), fn.return_type)
        for fn in self.program.functions:
            self.check_fn(fn)

    def check_fn(self, fn: FnDef) -> None:
        env: dict[str, str] = {}
        for pname, ptype in fn.params:
            if pname in env:
                raise MinilangTypeError(
                    f"duplicate parameter {pname!r}", fn.line, fn.col
                )
            env[pname] = ptype
        returns = self.check_block(fn.body, env, fn)
        if fn.return_type != "void" and not returns:
            raise MinilangTypeError(
                f"function {fn.name!r} does not return on every path",
                fn.line, fn.col,
            )
        self.program.var_types[fn.name] = env

    def check_block(self, stmts: tuple[Stmt, ...], env: dict[str, str], fn: FnDef) -> bool:
        """Check statements in order; returns True if the block always returns."""
        for idx, stmt in enumerate(stmts):
            if self.check_stmt(stmt, env, fn):
                if idx != len(stmts) - 1:
                    nxt = stmts[idx + 1]
                    raise MinilangTypeError("unreachable code", nxt.line, nxt.col)
                return True
        return False

    def check_stmt(self, stmt: Stmt, env: dict[str, str], fn: FnDef) -> bool:
        if isinstance(stmt, Assign):
            vtype = self.check_expr(stmt.value, env, fn)
            if vtype == "void":
                raise MinilangTypeError(
                    "cannot assign a void call result", stmt.line, stmt.col
                )
            prior = env.get(stmt.target)
            if prior is None:
                env[stmt.target] = vtype
            elif prior != vtype and not (prior == "real" and vtype == "int"):
                raise MinilangTypeError(
                    f"variable {stmt.target!r} is {prior}, cannot assign {vtype}",
                    stmt.line, stmt.col,
                )
            return False
        if isinstance(stmt, Store):
            base = env.get(stmt.base)
            if base is None:
                raise MinilangTypeError(
                    f"undeclared variable {stmt.base!r}", stmt.line, stmt.col
                )
            if base != "matrix":
                raise MinilangTypeError(
                    f"cannot index into {base} variable {stmt.base!r}",
                    stmt.line, stmt.col,
                )
            for pos in (stmt.row, stmt.col_expr):
                if self.check_expr(pos, env, fn) != "int":
                    raise MinilangTypeError("matrix index must be int", stmt.line, stmt.col)
            vtype = self.check_expr(stmt.value, env, fn)
            if vtype not in _NUMERIC:
                raise MinilangTypeError(
                    f"matrix element must be numeric, got {vtype}", stmt.line, stmt.col
                )
            return False
        if isinstance(stmt, If):
            self.check_cond(stmt.cond, env, fn)
            then_ret = self.check_block(stmt.then_body, env, fn)
            else_ret = self.check_block(stmt.else_body, env, fn) if stmt.else_body else False
            return then_ret and else_ret
        if isinstance(stmt, While):
            self.check_cond(stmt.cond, env, fn)
            self.check_block(stmt.body, env, fn)
            return False
        if isinstance(stmt, For):
            for bound in (stmt.lo, stmt.hi):
                if self.check_expr(bound, env, fn) != "int":
                    raise MinilangTypeError("for bounds must be int", stmt.line, stmt.col)
            prior = env.get(stmt.var)
            if prior is None:
                env[stmt.var] = "int"
            elif prior != "int":
                raise MinilangTypeError(
                    f"loop variable {stmt.var!r} is {prior}, must be int",
                    stmt.line, stmt.col,
                )
            self.check_block(stmt.body, env, fn)
            return False
        if isinstance(stmt, Return):
            if stmt.value is None:
                if fn.return_type != "void":
                    raise MinilangTypeError(
                        f"function {fn.name!r} must return {fn.return_type}",
                        stmt.line, stmt.col,
                    )
                return True
            vtype = self.check_expr(stmt.value, env, fn)
            ok = vtype == fn.return_type or (fn.return_type == "real" and vtype == "int")
            if not ok:
                raise MinilangTypeError(
                    f"function {fn.name!r} returns {fn.return_type}, got {vtype}",
                    stmt.line, stmt.col,
                )
            return True
        if isinstance(stmt, ExprStmt):
            self.check_expr(stmt.call, env, fn)
            return False
        raise AssertionError(f"unhandled statement {stmt!r}")

    def check_cond(self, cond: Expr, env: dict[str, str], fn: FnDef) -> None:
        ctype = self.check_expr(cond, env, fn)
        if ctype != "bool":
            raise MinilangTypeError(
                f"condition must be bool, got {ctype}",
                getattr(cond, "line", 0), getattr(cond, "col", 0),
            )

    def check_expr(self, expr: Expr, env: dict[str, str], fn: FnDef) -> str:
        if isinstance(expr, Num):
            return "real" if expr.is_real else "int"
        if isinstance(expr, BoolLit):
            return "bool"
        if isinstance(expr, Var):
            vtype = env.get(expr.name)
            if vtype is None:
                raise MinilangTypeError(
                    f"undeclared variable {expr.name!r}", expr.line, expr.col
                )
            return vtype
        if isinstance(expr, Unary):
            otype = self.check_expr(expr.operand, env, fn)
            if expr.op == "neg":
                if otype not in _NUMERIC:
                    raise MinilangTypeError(
                        f"cannot negate {otype}", expr.line, expr.col
                    )
                return otype
            if otype != "bool":
                raise MinilangTypeError(f"'not' needs bool, got {otype}", expr.line, expr.col)
            return "bool"
        if isinstance(expr, Binary):
            ltype = self.check_expr(expr.left, env, fn)
            rtype = self.check_expr(expr.right, env, fn)
            op = expr.op
            if op in ("and", "or"):
                if ltype != "bool" or rtype != "bool":
                    raise MinilangTypeError(
                        f"{op!r} needs bool operands, got {ltype} and {rtype}",
                        expr.line, expr.col,
                    )
                return "bool"
            if ltype not in _NUMERIC or rtype not in _NUMERIC:
                raise MinilangTypeError(
                    f"operator {op!r} needs numeric operands, got {ltype} and {rtype}",
                    expr.line, expr.col,
                )
            if op in ("eq", "neq", "lt", "le", "gt", "ge"):
                return "bool"
            if op == "mod":
                if ltype != "int" or rtype != "int":
                    raise MinilangTypeError("'%' needs int operands", expr.line, expr.col)
                return "int"
            return "real" if "real" in (ltype, rtype) else "int"
        if isinstance(expr, Index):
            btype = env.get(expr.base)
            if btype is None:
                raise MinilangTypeError(
                    f"undeclared variable {expr.base!r}", expr.line, expr.col
                )
            if btype != "matrix":
                raise MinilangTypeError(
                    f"cannot index into {btype} variable {expr.base!r}",
                    expr.line, expr.col,
                )
            for pos in (expr.row, expr.col_expr):
                if self.check_expr(pos, env, fn) != "int":
                    raise MinilangTypeError("matrix index must be int", expr.line, expr.col)
            return "real"
        if isinstance(expr, Call):
            sig = self.signatures.get(expr.name)
            if sig is None:
                raise MinilangTypeError(
                    f"undeclared function {expr.name!r}", expr.line, expr.col
                )
            ptypes, rtype = sig
            if len(expr.args) != len(ptypes):
                raise MinilangTypeError(
                    f"{expr.name!r} takes {len(ptypes)} arguments, got {len(expr.args)}",
                    expr.line, expr.col,
                )
            for arg, ptype in zip(expr.args, ptypes):
                atype = self.check_expr(arg, env, fn)
                ok = atype == ptype or (ptype == "real" and atype == "int")
                if not ok:
                    raise MinilangTypeError(
                        f"argument to {expr.name!r} must be {ptype}, got {atype}",
                        expr.line, expr.col,
                    )
            return rtype
        raise AssertionError(f"unhandled expression {expr!r}")


def parse_source(text: str) -> Program:
    """Parse and type-check a mini-language source file."""
    program = _Parser(text).parse_program()
    _Checker(program).run()
    return program
