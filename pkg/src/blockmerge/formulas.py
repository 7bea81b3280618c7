"""Computed-value formulas: parsing, canonical printing, evaluation.

Formulas are spreadsheet-like expressions over node selectors::

    =COUNT(/ul[id='speakers']/li)
    =/dl/dd[0] * /dl/dd[1]

A selector reference must resolve to exactly one node, whose content is
coerced to a number (one leading ``$`` and thousands separators stripped).
``COUNT`` and ``SUM`` take a selector set. Errors are values, not
exceptions, and propagate left-to-right through every operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .model import Document, Node, NodeId, NodeKind
from .selectors import (
    Selector,
    SelectorSyntaxError,
    parse_selector_prefix,
    resolve_nodes,
)

FUNCTIONS = ("COUNT", "SUM")


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (at offset {position})")
        self.position = position


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class NumberLit:
    value: float


@dataclass(frozen=True)
class SelectorRef:
    selector: Selector


@dataclass(frozen=True)
class Call:
    func: str  # COUNT | SUM
    arg: Selector


@dataclass(frozen=True)
class BinaryOp:
    op: str  # + - * /
    left: FormulaAst
    right: FormulaAst


FormulaAst = Union[NumberLit, SelectorRef, Call, BinaryOp]


# ---------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class ErrorValue:
    code: str  # REF | NUM | DIV0 | CYCLE
    message: str


Value = Union[Number, ErrorValue]

#: Comparison epsilon for Number equality in tests and dirty detection.
EPSILON = 1e-9


def values_equal(a: Value, b: Value) -> bool:
    if isinstance(a, Number) and isinstance(b, Number):
        return abs(a.value - b.value) <= EPSILON
    if isinstance(a, ErrorValue) and isinstance(b, ErrorValue):
        return a.code == b.code
    return False


def format_value(value: Value) -> str:
    """Display form: integral numbers print without a decimal point."""
    if isinstance(value, ErrorValue):
        if value.code == "DIV0":
            return "#DIV/0!"
        return f"#{value.code}!"
    if value.value == int(value.value):
        return str(int(value.value))
    return repr(value.value)


def value_to_jsonable(value: Value) -> dict:
    if isinstance(value, Number):
        return {"number": value.value}
    return {"error": {"code": value.code, "message": value.message}}


# ---------------------------------------------------------------------------
# Parser

_OPERATORS = "+-*/"


class _Parser:
    def __init__(self, src: str) -> None:
        self.src = src
        self.pos = 0

    def error(self, message: str, position: int | None = None) -> FormulaSyntaxError:
        return FormulaSyntaxError(
            message, self.pos if position is None else position
        )

    def skip_ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def parse(self) -> FormulaAst:
        if not self.src.startswith("="):
            raise self.error("formula must start with '='", 0)
        self.pos = 1
        ast = self.parse_expr()
        self.skip_ws()
        if self.pos != len(self.src):
            raise self.error("unexpected trailing input")
        return ast

    def parse_expr(self) -> FormulaAst:
        left = self.parse_term()
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch and ch in "+-":
                op = self.src[self.pos]
                self.pos += 1
                right = self.parse_term()
                left = BinaryOp(op, left, right)
            else:
                return left

    def parse_term(self) -> FormulaAst:
        left = self.parse_factor()
        while True:
            self.skip_ws()
            ch = self.peek()
            # A '/' straight after a factor is division: selectors only start
            # where a factor is expected.
            if ch and ch in "*/":
                op = self.src[self.pos]
                self.pos += 1
                right = self.parse_factor()
                left = BinaryOp(op, left, right)
            else:
                return left

    def parse_factor(self) -> FormulaAst:
        self.skip_ws()
        ch = self.peek()
        if not ch:
            raise self.error("expected a number, selector, or function call")
        if ch == "(":
            self.pos += 1
            inner = self.parse_expr()
            self.skip_ws()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.pos += 1
            return inner
        if ch.isdigit() or (ch == "." and self._digit_at(self.pos + 1)):
            return self.parse_number()
        if ch == "/":
            sel = self.parse_selector()
            return SelectorRef(sel)
        if ch.isalpha():
            return self.parse_call()
        raise self.error(f"unexpected character {ch!r}")

    def _digit_at(self, pos: int) -> bool:
        return pos < len(self.src) and self.src[pos].isdigit()

    def parse_number(self) -> NumberLit:
        start = self.pos
        while self.pos < len(self.src) and (
            self.src[self.pos].isdigit() or self.src[self.pos] == "."
        ):
            self.pos += 1
        try:
            return NumberLit(float(self.src[start : self.pos]))
        except ValueError:
            raise self.error("malformed number", start) from None

    def parse_selector(self) -> Selector:
        try:
            sel, end = parse_selector_prefix(self.src, self.pos)
        except SelectorSyntaxError as exc:
            raise self.error(str(exc), exc.position) from exc
        self.pos = end
        return sel

    def parse_call(self) -> Call:
        start = self.pos
        while self.pos < len(self.src) and self.src[self.pos].isalpha():
            self.pos += 1
        name = self.src[start : self.pos]
        if name not in FUNCTIONS:
            raise self.error(f"unknown function {name!r}", start)
        self.skip_ws()
        if self.peek() != "(":
            raise self.error("expected '(' after function name")
        self.pos += 1
        self.skip_ws()
        sel = self.parse_selector()
        self.skip_ws()
        if self.peek() != ")":
            raise self.error("expected ')'")
        self.pos += 1
        return Call(name, sel)


def parse_formula(src: str) -> FormulaAst:
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# Canonical printing

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def print_formula(ast: FormulaAst) -> str:
    """Canonical source: leading '=', single spaces around binary operators,
    minimal parentheses. Re-parsing the output yields an equal AST."""
    return "=" + _print_expr(ast)


def canonicalize(src: str) -> str:
    return print_formula(parse_formula(src))


def _print_expr(ast: FormulaAst, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(ast, NumberLit):
        if ast.value == int(ast.value):
            return str(int(ast.value))
        return repr(ast.value)
    if isinstance(ast, SelectorRef):
        return ast.selector.source()
    if isinstance(ast, Call):
        return f"{ast.func}({ast.arg.source()})"
    prec = _PRECEDENCE[ast.op]
    left = _print_expr(ast.left, prec, False)
    right = _print_expr(ast.right, prec, True)
    text = f"{left} {ast.op} {right}"
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def dependencies(ast: FormulaAst) -> frozenset[Selector]:
    """Every selector syntactically present in the formula."""
    if isinstance(ast, SelectorRef):
        return frozenset({ast.selector})
    if isinstance(ast, Call):
        return frozenset({ast.arg})
    if isinstance(ast, BinaryOp):
        return dependencies(ast.left) | dependencies(ast.right)
    return frozenset()


def rewrite_ast(ast: FormulaAst, rewriter) -> FormulaAst:
    """Rebuild the AST with every selector passed through ``rewriter``."""
    if isinstance(ast, SelectorRef):
        return SelectorRef(rewriter(ast.selector))
    if isinstance(ast, Call):
        return Call(ast.func, rewriter(ast.arg))
    if isinstance(ast, BinaryOp):
        return BinaryOp(
            ast.op, rewrite_ast(ast.left, rewriter), rewrite_ast(ast.right, rewriter)
        )
    return ast


# ---------------------------------------------------------------------------
# Evaluation


def coerce_text(text: str) -> float | None:
    """'$1,200' -> 1200.0; None when the text is not numeric."""
    cleaned = text.strip()
    if cleaned.startswith("$"):
        cleaned = cleaned[1:]
    cleaned = cleaned.replace(",", "")
    if not cleaned:
        return None
    try:
        return float(cleaned)
    except ValueError:
        return None


def eval_formula(doc: Document, node_id: NodeId) -> Value:
    """Evaluate the computed-value node ``node_id``. The node must exist and
    be a computed value (caller error otherwise); everything else comes back
    as a Number or an ErrorValue."""
    node = doc.find(node_id)
    if node is None:
        raise ValueError(f"no such node: {node_id}")
    if node.kind is not NodeKind.COMPUTED:
        raise ValueError(f"node {node_id} is {node.kind}, not a computed value")
    return _eval_computed(doc, node, frozenset())


def _eval_computed(doc: Document, node: Node, stack: frozenset[NodeId]) -> Value:
    if node.id in stack:
        return ErrorValue("CYCLE", f"cyclic reference through {node.id}")
    try:
        ast = parse_formula(node.formula or "")
    except FormulaSyntaxError as exc:
        return ErrorValue("REF", f"unparseable formula: {exc}")
    return _eval(doc, ast, stack | {node.id})


def _eval(doc: Document, ast: FormulaAst, stack: frozenset[NodeId]) -> Value:
    if isinstance(ast, NumberLit):
        return Number(ast.value)
    if isinstance(ast, SelectorRef):
        nodes = resolve_nodes(doc, ast.selector)
        if len(nodes) != 1:
            return ErrorValue(
                "REF",
                f"{ast.selector.source()} matches {len(nodes)} nodes, need exactly 1",
            )
        return _value_of(doc, nodes[0], stack)
    if isinstance(ast, Call):
        nodes = resolve_nodes(doc, ast.arg)
        if ast.func == "COUNT":
            return Number(float(len(nodes)))
        total = 0.0
        for n in nodes:
            v = _value_of(doc, n, stack)
            if isinstance(v, ErrorValue):
                return v
            total += v.value
        return Number(total)
    left = _eval(doc, ast.left, stack)
    if isinstance(left, ErrorValue):
        return left
    right = _eval(doc, ast.right, stack)
    if isinstance(right, ErrorValue):
        return right
    if ast.op == "+":
        return Number(left.value + right.value)
    if ast.op == "-":
        return Number(left.value - right.value)
    if ast.op == "*":
        return Number(left.value * right.value)
    if right.value == 0:
        return ErrorValue("DIV0", "division by zero")
    return Number(left.value / right.value)


def _value_of(doc: Document, node: Node, stack: frozenset[NodeId]) -> Value:
    """Numeric content of a node: computed values evaluate recursively, text
    coerces, and a single-child wrapper (a dd holding a computed value) reads
    through to its child."""
    if node.kind is NodeKind.COMPUTED:
        return _eval_computed(doc, node, stack)
    if node.text is not None:
        number = coerce_text(node.text)
        if number is None:
            return ErrorValue("NUM", f"cannot coerce {node.text!r} to a number")
        return Number(number)
    if len(node.children) == 1:
        return _value_of(doc, node.children[0], stack)
    return ErrorValue("NUM", f"node {node.id} has no scalar content")


def value_carrier(node: Node) -> Node:
    """The node whose content actually supplies a referenced node's value
    (reads through single-child wrappers)."""
    current = node
    while current.kind is not NodeKind.COMPUTED and current.text is None and len(
        current.children
    ) == 1:
        current = current.children[0]
    return current
