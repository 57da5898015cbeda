"""Deterministic guard expressions over dotted document paths.

Grammar (precedence low to high):

    expr   := or
    or     := and ("or" and)*
    and    := unary ("and" unary)*
    unary  := "not" unary | cmp
    cmp    := term (("==" | "!=" | "<=" | ">=" | "<" | ">") term)?
    term   := literal | path | "(" expr ")"

Literals: true, false, null, numbers, single- or double-quoted strings.
Paths are dotted identifiers resolved through a lookup callable at
evaluation time. Comparisons are strict about types: ordering needs two
numbers or two strings, boolean connectives need booleans.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Callable

TOKEN_RE = re.compile(
    r"\s*(?:(?P<op>==|!=|<=|>=|<|>|\(|\))"
    r"|(?P<num>-?\d+(?:\.\d+)?)"
    r"|(?P<str>'[^']*'|\"[^\"]*\")"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_.]*))"
)

KEYWORDS = {"and", "or", "not", "true", "false", "null"}


class ExpressionError(ValueError):
    def __init__(self, message: str, position: int | None = None) -> None:
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class PathRef:
    path: str


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class BoolOp:
    op: str                     # and | or
    parts: tuple["Node", ...]


@dataclass(frozen=True)
class Not:
    inner: "Node"


Node = "Literal | PathRef | Compare | BoolOp | Not"


@dataclass(frozen=True)
class Expression:
    source: str
    root: Any

    def paths(self) -> frozenset[str]:
        found: set[str] = set()

        def walk(node):
            if isinstance(node, PathRef):
                found.add(node.path)
            elif isinstance(node, Compare):
                walk(node.left)
                walk(node.right)
            elif isinstance(node, BoolOp):
                for p in node.parts:
                    walk(p)
            elif isinstance(node, Not):
                walk(node.inner)

        walk(self.root)
        return frozenset(found)

    def literals_for(self, path: str) -> list[Any]:
        """Literals compared against a path, for probe-domain derivation."""
        found: list[Any] = []

        def walk(node):
            if isinstance(node, Compare):
                pairs = [(node.left, node.right), (node.right, node.left)]
                for a, b in pairs:
                    if isinstance(a, PathRef) and a.path == path and isinstance(b, Literal):
                        found.append(b.value)
                walk(node.left)
                walk(node.right)
            elif isinstance(node, BoolOp):
                for p in node.parts:
                    walk(p)
            elif isinstance(node, Not):
                walk(node.inner)

        walk(self.root)
        return found

    def bare_paths(self) -> frozenset[str]:
        """Paths used directly as booleans (outside any comparison)."""
        found: set[str] = set()

        def walk(node, under_cmp: bool):
            if isinstance(node, PathRef) and not under_cmp:
                found.add(node.path)
            elif isinstance(node, Compare):
                walk(node.left, True)
                walk(node.right, True)
            elif isinstance(node, BoolOp):
                for p in node.parts:
                    walk(p, under_cmp)
            elif isinstance(node, Not):
                walk(node.inner, under_cmp)

        walk(self.root, False)
        return frozenset(found)

    def evaluate(self, lookup: Callable[[str], Any]) -> bool:
        value = _eval(self.root, lookup)
        if not isinstance(value, bool):
            raise ExpressionError(f"guard {self.source!r} did not evaluate to a boolean")
        return value


def _eval(node, lookup):
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, PathRef):
        return lookup(node.path)
    if isinstance(node, Not):
        inner = _eval(node.inner, lookup)
        if not isinstance(inner, bool):
            raise ExpressionError("'not' needs a boolean operand")
        return not inner
    if isinstance(node, BoolOp):
        acc = None
        for part in node.parts:
            val = _eval(part, lookup)
            if not isinstance(val, bool):
                raise ExpressionError(f"'{node.op}' needs boolean operands")
            if acc is None:
                acc = val
            else:
                acc = (acc and val) if node.op == "and" else (acc or val)
        return acc
    if isinstance(node, Compare):
        left = _eval(node.left, lookup)
        right = _eval(node.right, lookup)
        if node.op == "==":
            return _eq(left, right)
        if node.op == "!=":
            return not _eq(left, right)
        if not _orderable(left, right):
            raise ExpressionError(
                f"cannot order {type(left).__name__} against {type(right).__name__}"
            )
        if node.op == "<":
            return left < right
        if node.op == "<=":
            return left <= right
        if node.op == ">":
            return left > right
        return left >= right
    raise ExpressionError(f"unknown node {node!r}")


def _eq(left, right) -> bool:
    # bools are not numbers here, unlike plain Python
    if isinstance(left, bool) != isinstance(right, bool):
        return False
    return left == right


def _orderable(left, right) -> bool:
    if isinstance(left, bool) or isinstance(right, bool):
        return False
    if isinstance(left, (int, float)) and isinstance(right, (int, float)):
        return True
    return isinstance(left, str) and isinstance(right, str)


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens: list[tuple[str, Any, int]] = []
        pos = 0
        while pos < len(text):
            match = TOKEN_RE.match(text, pos)
            if not match or match.end() == pos:
                if text[pos:].strip():
                    raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
                break
            pos = match.end()
            if match.lastgroup == "op":
                self.tokens.append(("op", match.group("op"), match.start()))
            elif match.lastgroup == "num":
                raw = match.group("num")
                self.tokens.append(("lit", float(raw) if "." in raw else int(raw), match.start()))
            elif match.lastgroup == "str":
                self.tokens.append(("lit", match.group("str")[1:-1], match.start()))
            else:
                word = match.group("word")
                if word in ("true", "false"):
                    self.tokens.append(("lit", word == "true", match.start()))
                elif word == "null":
                    self.tokens.append(("lit", None, match.start()))
                elif word in ("and", "or", "not"):
                    self.tokens.append(("kw", word, match.start()))
                else:
                    self.tokens.append(("path", word, match.start()))
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx] if self.idx < len(self.tokens) else (None, None, len(self.text))

    def take(self):
        tok = self.peek()
        self.idx += 1
        return tok

    def expr(self):
        return self.or_()

    def or_(self):
        parts = [self.and_()]
        while self.peek()[:2] == ("kw", "or"):
            self.take()
            parts.append(self.and_())
        return parts[0] if len(parts) == 1 else BoolOp("or", tuple(parts))

    def and_(self):
        parts = [self.unary()]
        while self.peek()[:2] == ("kw", "and"):
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else BoolOp("and", tuple(parts))

    def unary(self):
        if self.peek()[:2] == ("kw", "not"):
            self.take()
            return Not(self.unary())
        return self.cmp()

    def cmp(self):
        left = self.term()
        kind, value, _pos = self.peek()
        if kind == "op" and value in ("==", "!=", "<=", ">=", "<", ">"):
            self.take()
            right = self.term()
            return Compare(value, left, right)
        return left

    def term(self):
        kind, value, pos = self.take()
        if kind == "lit":
            return Literal(value)
        if kind == "path":
            return PathRef(value)
        if kind == "op" and value == "(":
            inner = self.expr()
            kind2, value2, pos2 = self.take()
            if (kind2, value2) != ("op", ")"):
                raise ExpressionError("expected ')'", pos2)
            return inner
        raise ExpressionError(f"unexpected token {value!r}", pos)


def parse_expression(text: str) -> Expression:
    if not text or not text.strip():
        raise ExpressionError("empty expression")
    parser = _Parser(text)
    root = parser.expr()
    kind, value, pos = parser.peek()
    if kind is not None:
        raise ExpressionError(f"trailing input {value!r}", pos)
    return Expression(text, root)
