"""Guard and effect expression language.

Integers follow 32-bit two's complement semantics (wrap-around, division
truncating toward zero, remainder taking the dividend's sign, shift counts
masked to five bits), which keeps every operation total except division and
remainder by zero.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .diagnostics import DivisionByZero


class Ref(enum.Enum):
    NULL = "null"
    THIS = "this"


Value = Union[int, bool, Ref]

INT, BOOL, REF = "int", "bool", "ref"


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Var, Unary, Binary]


@dataclass(frozen=True)
class Assign:
    target: str
    op: str
    expr: Expr


@dataclass(frozen=True)
class Emit:
    signal: str
    args: tuple[Expr, ...] = ()


Action = Union[Assign, Emit]


ARITH_OPS = ("+", "-", "*", "/", "%")
SHIFT_OPS = ("<<", ">>")
BITWISE_OPS = ("&", "|", "^")
RELATIONAL_OPS = ("<", "<=", ">", ">=")
EQUALITY_OPS = ("==", "!=")
LOGICAL_OPS = ("&&", "||")
ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=")

# Higher binds tighter; all binary operators are left-associative.
PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}
UNARY_PRECEDENCE = 11


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, text: str, column: int):
        super().__init__(f"{message} at column {column + 1}: {text!r}")
        self.column = column + 1
        self.text = text


class ExprTypeError(TypeError):
    pass


# ---------------------------------------------------------------- integers

def wrap32(x: int) -> int:
    x &= 0xFFFFFFFF
    return x - 0x100000000 if x & 0x80000000 else x


def _div(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero("division by zero")
    q = abs(a) // abs(b)
    return wrap32(q if (a < 0) == (b < 0) else -q)


def _rem(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero("remainder by zero")
    r = abs(a) % abs(b)
    return r if a >= 0 else -r


def apply_int_op(op: str, a: int, b: int) -> int:
    if op == "+":
        return wrap32(a + b)
    if op == "-":
        return wrap32(a - b)
    if op == "*":
        return wrap32(a * b)
    if op == "/":
        return _div(a, b)
    if op == "%":
        return _rem(a, b)
    if op == "&":
        return wrap32(a & b)
    if op == "|":
        return wrap32(a | b)
    if op == "^":
        return wrap32(a ^ b)
    if op == "<<":
        return wrap32(a << (b & 31))
    if op == ">>":
        return a >> (b & 31)
    raise ValueError(f"not an integer operator: {op}")


# -------------------------------------------------------------- evaluation

def eval_expr(expr: Expr, store: Mapping[str, Value]) -> Value:
    """Evaluate ``expr`` strictly, short-circuiting ``&&`` and ``||``."""
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        return store[expr.name]
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, store)
        if expr.op == "!":
            return not v
        if expr.op == "-":
            return wrap32(-v)
        if expr.op == "~":
            return wrap32(~v)
        raise ValueError(f"unknown unary operator {expr.op}")
    op = expr.op
    if op == "&&":
        return bool(eval_expr(expr.left, store)) and bool(eval_expr(expr.right, store))
    if op == "||":
        return bool(eval_expr(expr.left, store)) or bool(eval_expr(expr.right, store))
    a = eval_expr(expr.left, store)
    b = eval_expr(expr.right, store)
    if op == "==":
        return _same(a, b)
    if op == "!=":
        return not _same(a, b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    return apply_int_op(op, a, b)


def _same(a: Value, b: Value) -> bool:
    # bool is an int subclass; never let True == 1 leak through
    return type(a) is type(b) and a == b


def apply_action(action: Assign, store: dict[str, Value]) -> None:
    value = eval_expr(action.expr, store)
    if action.op == "=":
        store[action.target] = value
    else:
        store[action.target] = apply_int_op(action.op[:-1], store[action.target], value)


# ------------------------------------------------------------ type checking

def typecheck(expr: Expr, env: Mapping[str, str]) -> str:
    """Return the static type of ``expr`` or raise :class:`ExprTypeError`."""
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return BOOL
        if isinstance(expr.value, Ref):
            return REF
        return INT
    if isinstance(expr, Var):
        if expr.name not in env:
            raise ExprTypeError(f"undeclared variable {expr.name!r}")
        return env[expr.name]
    if isinstance(expr, Unary):
        t = typecheck(expr.operand, env)
        want = BOOL if expr.op == "!" else INT
        if t != want:
            raise ExprTypeError(f"operator {expr.op} expects {want}, got {t}")
        return want
    lt = typecheck(expr.left, env)
    rt = typecheck(expr.right, env)
    op = expr.op
    if op in EQUALITY_OPS:
        if lt != rt:
            raise ExprTypeError(f"cannot compare {lt} with {rt} using {op}")
        return BOOL
    if op in LOGICAL_OPS:
        if lt != BOOL or rt != BOOL:
            raise ExprTypeError(f"operator {op} expects bool operands, got {lt}, {rt}")
        return BOOL
    if lt != INT or rt != INT:
        raise ExprTypeError(f"operator {op} expects int operands, got {lt}, {rt}")
    return BOOL if op in RELATIONAL_OPS else INT


def check_action(action: Action, env: Mapping[str, str]) -> None:
    if isinstance(action, Emit):
        for arg in action.args:
            typecheck(arg, env)
        return
    if action.target not in env:
        raise ExprTypeError(f"assignment to undeclared variable {action.target!r}")
    t = typecheck(action.expr, env)
    target_t = env[action.target]
    if action.op == "=":
        if t != target_t:
            raise ExprTypeError(f"cannot assign {t} to {target_t} variable {action.target!r}")
    elif target_t != INT or t != INT:
        raise ExprTypeError(f"compound assignment {action.op} needs int operands")


# ------------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><<=|>>=|<<|>>|<=|>=|==|!=|&&|\|\||\+=|-=|\*=|/=|%=|&=|\|=|\^=|[-+*/%<>!~&|^=(),^])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        value = m.group(kind)
        # fold "-<digits>" into a negative literal when no operand precedes it
        if (
            kind == "int"
            and tokens
            and tokens[-1][:2] == ("op", "-")
            and tokens[-1][2] == start - 1
            and (len(tokens) == 1 or tokens[-2][0] == "op" and tokens[-2][1] != ")")
        ):
            tokens.pop()
            tokens.append(("int", "-" + value, start - 1))
        else:
            tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.text, self.peek()[2])

    def expect(self, value: str) -> None:
        kind, v, _ = self.peek()
        if kind != "op" or v != value:
            raise self.error(f"expected {value!r}")
        self.advance()

    def expect_end(self) -> None:
        if self.peek()[0] != "end":
            raise self.error("unexpected trailing input")

    def expression(self, min_prec: int = 1) -> Expr:
        left = self.unary()
        while True:
            kind, v, _ = self.peek()
            prec = PRECEDENCE.get(v) if kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.expression(prec + 1)
            left = Binary(v, left, right)

    def unary(self) -> Expr:
        kind, v, _ = self.peek()
        if kind == "op" and v in ("!", "-", "~"):
            self.advance()
            return Unary(v, self.unary())
        return self.primary()

    def primary(self) -> Expr:
        kind, v, _ = self.peek()
        if kind == "int":
            self.advance()
            return Lit(int(v))
        if kind == "ident":
            self.advance()
            if v == "true":
                return Lit(True)
            if v == "false":
                return Lit(False)
            if v == "null":
                return Lit(Ref.NULL)
            if v == "this":
                return Lit(Ref.THIS)
            return Var(v)
        if kind == "op" and v == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        raise self.error("expected an operand")

    def action(self) -> Action:
        kind, v, _ = self.peek()
        if kind == "op" and v == "^":
            self.advance()
            kind, name, _ = self.peek()
            if kind != "ident":
                raise self.error("expected a signal name after '^'")
            self.advance()
            args: list[Expr] = []
            if self.peek()[:2] == ("op", "("):
                self.advance()
                if self.peek()[:2] != ("op", ")"):
                    args.append(self.expression())
                    while self.peek()[:2] == ("op", ","):
                        self.advance()
                        args.append(self.expression())
                self.expect(")")
            return Emit(name, tuple(args))
        if kind != "ident":
            raise self.error("expected an assignment or '^signal(...)'")
        self.advance()
        kind, op, _ = self.peek()
        if kind != "op" or op not in ASSIGN_OPS:
            raise self.error("expected an assignment operator")
        self.advance()
        return Assign(v, op, self.expression())


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    expr = p.expression()
    p.expect_end()
    return expr


def parse_action(text: str) -> Action:
    p = _Parser(text)
    action = p.action()
    p.expect_end()
    return action


# ----------------------------------------------------------------- printing

def _lit_text(value: Value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Ref):
        return value.value
    return str(value)


def to_text(expr: Expr) -> str:
    """Print ``expr`` with the minimal parentheses needed to re-parse it."""
    if isinstance(expr, Lit):
        return _lit_text(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        inner = to_text(expr.operand)
        if isinstance(expr.operand, Binary) or (
            isinstance(expr.operand, Lit) and not isinstance(expr.operand.value, (bool, Ref))
        ):
            inner = f"({inner})"
        return expr.op + inner
    prec = PRECEDENCE[expr.op]
    left = to_text(expr.left)
    if isinstance(expr.left, Binary) and PRECEDENCE[expr.left.op] < prec:
        left = f"({left})"
    right = to_text(expr.right)
    if isinstance(expr.right, Binary) and PRECEDENCE[expr.right.op] <= prec:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


def action_text(action: Action) -> str:
    if isinstance(action, Emit):
        if not action.args:
            return f"^{action.signal}"
        return f"^{action.signal}({', '.join(to_text(a) for a in action.args)})"
    return f"{action.target} {action.op} {to_text(action.expr)}"


def walk(expr: Expr):
    """Yield every node of ``expr`` in pre-order."""
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)
