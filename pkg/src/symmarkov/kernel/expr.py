"""Arithmetic expressions in x and y.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | 'x' | 'y' | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^-1`` is ``2^(-1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..errors import ParseError, UnknownIdentifierError

VARIABLES = ("x", "y")
UNARY_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
}
BINARY_FUNCS = {"min": np.minimum, "max": np.maximum}
FUNCTIONS = set(UNARY_FUNCS) | set(BINARY_FUNCS)

_OP_NAMES = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]


# tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def tokenize(text: str) -> list:
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            stripped = len(text) - len(text[pos:].lstrip())
            if stripped >= len(text):
                break
            raise ParseError(f"unexpected character {text[stripped]!r}", stripped)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


_ATOM_START = {"number", "identifier", "'('", "'-'"}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str):
        t = self.peek()
        if t.kind != "op" or t.text != text:
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.offset, {repr(text)})
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", t.offset,
                             {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.peek()
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in VARIABLES:
                return Var(t.text)
            if t.text in FUNCTIONS:
                return self.call(t)
            raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.offset,
                                         set(VARIABLES) | FUNCTIONS)
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.offset, _ATOM_START)

    def call(self, name_tok: _Tok) -> Node:
        self.expect("(")
        args = [self.expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        want = 1 if name_tok.text in UNARY_FUNCS else 2
        if len(args) != want:
            raise ParseError(f"{name_tok.text} takes {want} argument(s), got {len(args)}",
                             name_tok.offset)
        return Call(name_tok.text, tuple(args))


def parse_kernel(text: str) -> Node:
    if not text or not text.strip():
        raise ParseError("empty expression", 0, _ATOM_START)
    return _Parser(text).parse()


# printing

def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_sexpr(node: Node) -> str:
    """Prefix form, e.g. ``exp(neg(pow(sub(x,y),2)))``."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"neg({to_sexpr(node.operand)})"
    if isinstance(node, BinOp):
        return f"{_OP_NAMES[node.op]}({to_sexpr(node.left)},{to_sexpr(node.right)})"
    return f"{node.name}(" + ",".join(to_sexpr(a) for a in node.args) + ")"


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def to_text(node: Node) -> str:
    """Canonical infix form with minimal parentheses; parses back to ``node``."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}(" + ", ".join(to_text(a) for a in node.args) + ")"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        # unary minus binds tighter than * and /, so -(a*b) keeps its parentheses
        if isinstance(node.operand, BinOp) and _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if node.op == "^":
        # base must be an atom; exponent is parsed as unary
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# evaluation

def compile_expr(node: Node) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Vectorized evaluator f(x, y) with numpy broadcasting."""
    if isinstance(node, Num):
        v = node.value
        return lambda x, y: np.full(np.broadcast(x, y).shape, v)
    if isinstance(node, Var):
        if node.name == "x":
            return lambda x, y: np.broadcast_to(x, np.broadcast(x, y).shape).astype(float)
        return lambda x, y: np.broadcast_to(y, np.broadcast(x, y).shape).astype(float)
    if isinstance(node, Neg):
        f = compile_expr(node.operand)
        return lambda x, y: -f(x, y)
    if isinstance(node, BinOp):
        a, b = compile_expr(node.left), compile_expr(node.right)
        op = {"+": np.add, "-": np.subtract, "*": np.multiply,
              "/": np.divide, "^": np.power}[node.op]
        return lambda x, y: op(a(x, y), b(x, y))
    if node.name in UNARY_FUNCS:
        fn = UNARY_FUNCS[node.name]
        a = compile_expr(node.args[0])
        return lambda x, y: fn(a(x, y))
    fn = BINARY_FUNCS[node.name]
    a, b = compile_expr(node.args[0]), compile_expr(node.args[1])
    return lambda x, y: fn(a(x, y), b(x, y))


def substitute(node: Node, mapping: dict) -> Node:
    """Replace variables by expressions, e.g. {"x": Var("y")}."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    return Call(node.name, tuple(substitute(a, mapping) for a in node.args))
