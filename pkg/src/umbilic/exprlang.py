"""A small expression language for immersions and conformal factors.

Grammar (EBNF)::

    expr   := term (("+"|"-") term)* ;
    term   := factor (("*"|"/") factor)* ;
    factor := "-" factor | power ;
    power  := atom ("^" integer)? ;
    atom   := number | "u" | "v" | ident "(" expr ")" | "(" expr ")" ;
    ident  := "sin"|"cos"|"sinh"|"cosh"|"exp"|"ln"|"sqrt" ;

``^`` binds tighter than unary minus, so ``-u^2`` is ``-(u^2)``.  Exponents
are non-negative integer literals; a chained ``u^2^3`` is rejected because the
grammar allows a single exponent per atom.
"""

from __future__ import annotations

import math
import sys
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets
from .jets import DomainError, Jet3

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "ln", "sqrt")
MAX_DEPTH = 200


@dataclass(frozen=True)
class Number:
    value: float


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


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Number, Var, Unary, Binary, Call]


class ParseError(ValueError):
    """Raised on the first grammar violation.

    Attributes
    ----------
    position : int
        Byte offset into the UTF-8 encoded input.
    expected : str
        Description of the token class the parser wanted.
    found : str
        The offending lexeme, or ``"end of input"``.
    """

    def __init__(self, position: int, expected: str, found: str):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(f"at byte {position}: expected {expected}, found {found}")


_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
_INTEGER = re.compile(r"\d+\Z", re.ASCII)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_PUNCT = "+-*/^()"


@dataclass(frozen=True)
class _Token:
    kind: str  # "number", "ident", a punctuation char, or "end"
    text: str
    pos: int  # character offset


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            tokens.append(_Token("number", m.group(0), i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(0), i))
            i = m.end()
            continue
        raise _ParseFailure(i, "operand or operator", repr(ch))
    tokens.append(_Token("end", "", n))
    return tokens


class _ParseFailure(Exception):
    # carries a character offset; converted to a byte offset at the boundary
    def __init__(self, pos, expected, found):
        self.pos, self.expected, self.found = pos, expected, found


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def fail(self, expected):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise _ParseFailure(t.pos, expected, found)

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expr(self) -> Expr:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail(f"nesting depth at most {MAX_DEPTH}")
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = "add" if self.advance().kind == "+" else "sub"
            node = Binary(op, node, self.term())
        self.depth -= 1
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind in ("*", "/"):
            op = "mul" if self.advance().kind == "*" else "div"
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.tok.kind == "-":
            self.advance()
            self.depth += 1
            if self.depth > MAX_DEPTH:
                self.fail(f"nesting depth at most {MAX_DEPTH}")
            node = Unary("neg", self.factor())
            self.depth -= 1
            return node
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "^":
            self.advance()
            t = self.tok
            if t.kind != "number" or not _INTEGER.match(t.text):
                self.fail("integer exponent")
            self.advance()
            return Binary("pow", base, Number(int(t.text)))
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            value = float(t.text)
            if not math.isfinite(value):
                self.fail("finite number")
            self.advance()
            return Number(value)
        if t.kind == "ident":
            if t.text in ("u", "v"):
                self.advance()
                return Var(t.text)
            if t.text in FUNCTIONS:
                self.advance()
                if self.tok.kind != "(":
                    self.fail("'(' after function name")
                self.advance()
                arg = self.expr()
                if self.tok.kind != ")":
                    self.fail("')'")
                self.advance()
                return Call(t.text, arg)
            self.fail("u, v, or one of " + ", ".join(FUNCTIONS))
        if t.kind == "(":
            self.advance()
            node = self.expr()
            if self.tok.kind != ")":
                self.fail("')'")
            self.advance()
            return node
        self.fail("operand")


def parse(text: Union[str, bytes]) -> Expr:
    """Parse ``text`` into an expression tree or raise :class:`ParseError`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(exc.start, "valid UTF-8", repr(bytes(text)[exc.start:exc.start + 1]))
    # each nesting level costs about five frames of recursive descent
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * MAX_DEPTH + 500))
    try:
        parser = _Parser(_tokenize(text))
        node = parser.expr()
        if parser.tok.kind != "end":
            parser.fail("operator or end of input")
        return node
    except _ParseFailure as exc:
        byte_pos = len(text[:exc.pos].encode("utf-8", errors="surrogatepass"))
        raise ParseError(byte_pos, exc.expected, exc.found) from None
    finally:
        sys.setrecursionlimit(limit)


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _prec(node: Expr) -> int:
    if isinstance(node, Binary):
        return 4 if node.op == "pow" else _PREC[node.op]
    if isinstance(node, Unary):
        return 3
    return 5


def _format_number(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def to_text(node: Expr) -> str:
    """Render an expression with the minimal parentheses that reparse identically."""
    if isinstance(node, Number):
        if node.value < 0:
            # the grammar has no negative literals
            raise ValueError("negative Number nodes cannot be rendered; use Unary('neg', ...)")
        return _format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Unary):
        inner = to_text(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return "-" + inner
    if node.op == "pow":
        base = to_text(node.left)
        if _prec(node.left) < 5:
            base = f"({base})"
        return f"{base}^{to_text(node.right)}"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left}{_SYMBOL[node.op]}{right}"


def _eval(node: Expr, u: Jet3, v: Jet3) -> Jet3:
    if isinstance(node, Number):
        return Jet3.constant(float(node.value))
    if isinstance(node, Var):
        return u if node.name == "u" else v
    if isinstance(node, Unary):
        return -_eval(node.operand, u, v)
    if isinstance(node, Call):
        return jets.elementary(node.func, _eval(node.arg, u, v))
    if node.op == "pow":
        return jets.combine("int_pow", _eval(node.left, u, v), int(node.right.value))
    return jets.combine(node.op, _eval(node.left, u, v), _eval(node.right, u, v))


def _point_of(u0, v0, index):
    if index is None or (np.ndim(u0) == 0 and np.ndim(v0) == 0):
        return float(np.asarray(u0).ravel()[0]), float(np.asarray(v0).ravel()[0])
    ub, vb = np.broadcast_arrays(np.asarray(u0, dtype=float), np.asarray(v0, dtype=float))
    return float(ub.ravel()[index]), float(vb.ravel()[index])


def eval_jet(ast: Expr, u0, v0) -> Jet3:
    """Evaluate ``ast`` as a third-order jet at (u0, v0).

    ``u0`` and ``v0`` may be arrays of equal shape.  Domain violations raise
    :class:`~umbilic.jets.DomainError` carrying the offending point.
    """
    u, v = jets.seed_coordinates(u0, v0)
    try:
        return _eval(ast, u, v)
    except DomainError as exc:
        # jets of constant subexpressions are scalar, so the index may not be
        # meaningful for the grid; fall back to the first point then
        index = exc.index
        if index is not None and index >= np.broadcast(np.asarray(u0), np.asarray(v0)).size:
            index = None
        raise exc.with_point(_point_of(u0, v0, index)) from None


_PLAIN = {
    "sin": np.sin, "cos": np.cos, "sinh": np.sinh, "cosh": np.cosh, "exp": np.exp,
    "ln": np.log, "sqrt": np.sqrt,
}


def evaluate(ast: Expr, u, v):
    """Plain floating-point evaluation, independent of the jet machinery."""
    if isinstance(ast, Number):
        return float(ast.value) + 0.0 * np.asarray(u, dtype=float) + 0.0 * np.asarray(v, dtype=float)
    if isinstance(ast, Var):
        return (np.asarray(u, dtype=float) if ast.name == "u" else np.asarray(v, dtype=float)) * 1.0
    if isinstance(ast, Unary):
        return -evaluate(ast.operand, u, v)
    if isinstance(ast, Call):
        return _PLAIN[ast.func](evaluate(ast.arg, u, v))
    a = evaluate(ast.left, u, v)
    if ast.op == "pow":
        return a ** int(ast.right.value)
    b = evaluate(ast.right, u, v)
    return {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide}[ast.op](a, b)


def variables(ast: Expr) -> set[str]:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Number):
        return set()
    if isinstance(ast, (Unary, Call)):
        return variables(ast.operand if isinstance(ast, Unary) else ast.arg)
    return variables(ast.left) | variables(ast.right)
