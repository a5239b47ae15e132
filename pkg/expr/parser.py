"""
Map DSL Parser

Grammar (UTF-8 text, statements separated by `;` or newlines):

    statement := "f" INT "=" expr | "let" NAME "=" expr | "n" "=" INT
    expr      := term (("+" | "-") term)*
    term      := unary (("*" | "/") unary)*
    unary     := "-" unary | power
    power     := atom ("^" INT)*
    atom      := NUMBER | "x" INT | NAME | ("sqrt" | "exp") "(" expr ")" | "(" expr ")"

`#` starts a comment that runs to the end of the line.
"""

import logging
import os
import re
from dataclasses import dataclass
from typing import Dict, List, Optional

from expr.maps import DimensionError, ExprMap
from expr.nodes import Const, Expr, Var, add, div, exp, mul, neg, power, sqrt, sub, variables

logger = logging.getLogger(__name__)


class DslSyntaxError(ValueError):
    """Malformed DSL text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class UnknownIdentifierError(DslSyntaxError):
    """A name that is neither a variable, a function nor a `let` binding."""
    pass


@dataclass
class Token:
    kind: str       # number, name, op, sep, end
    text: str
    line: int
    column: int


_TOKEN_PATTERN = re.compile(
    r"(?P<space>[ \t\r]+)"
    r"|(?P<comment>#[^\n]*)"
    r"|(?P<newline>\n)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()=])"
    r"|(?P<sep>;)"
)

_FUNCTIONS = {"sqrt": sqrt, "exp": exp}
_VARIABLE = re.compile(r"x([1-9]\d*)$")
_COMPONENT = re.compile(r"f([1-9]\d*)$")


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start = 1, 0
    position = 0
    while position < len(text):
        match = _TOKEN_PATTERN.match(text, position)
        column = position - line_start + 1
        if match is None:
            raise DslSyntaxError(f"unexpected character {text[position]!r}", line, column)
        kind = match.lastgroup
        if kind == "newline":
            tokens.append(Token("sep", "\n", line, column))
            line += 1
            line_start = match.end()
        elif kind not in ("space", "comment"):
            tokens.append(Token(kind, match.group(), line, column))
        position = match.end()
    tokens.append(Token("end", "", line, position - line_start + 1))
    return tokens


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.position = 0
        self.bindings: Dict[str, Expr] = {}

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def advance(self) -> Token:
        token = self.tokens[self.position]
        self.position += 1
        return token

    def error(self, message: str, token: Optional[Token] = None) -> DslSyntaxError:
        token = token or self.current
        return DslSyntaxError(message, token.line, token.column)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        token = self.current
        if token.kind != kind or (text is not None and token.text != text):
            wanted = text if text is not None else kind
            found = token.text or "end of input"
            raise self.error(f"expected {wanted!r}, found {found!r}")
        return self.advance()

    def integer(self) -> int:
        token = self.expect("number")
        if not token.text.isdigit():
            raise self.error("expected a nonnegative integer", token)
        return int(token.text)

    # =========================================================================
    # Expressions
    # =========================================================================

    def expr(self) -> Expr:
        result = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            operator = self.advance()
            right = self.term()
            result = add(result, right) if operator.text == "+" else sub(result, right)
        return result

    def term(self) -> Expr:
        result = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            operator = self.advance()
            right = self.unary()
            if operator.text == "*":
                result = mul(result, right)
            else:
                try:
                    result = div(result, right)
                except ZeroDivisionError:
                    raise self.error("division by zero", operator)
        return result

    def unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        result = self.atom()
        while self.current.kind == "op" and self.current.text == "^":
            self.advance()
            if self.current.kind == "op" and self.current.text == "-":
                raise self.error("exponent must be a nonnegative integer")
            result = power(result, self.integer())
        return result

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "op" and token.text == "(":
            self.advance()
            inner = self.expr()
            self.expect("op", ")")
            return inner
        if token.kind == "name":
            self.advance()
            if token.text in _FUNCTIONS:
                self.expect("op", "(")
                argument = self.expr()
                self.expect("op", ")")
                try:
                    return _FUNCTIONS[token.text](argument)
                except ValueError as exc:
                    raise self.error(str(exc), token)
            variable = _VARIABLE.match(token.text)
            if variable:
                return Var(int(variable.group(1)) - 1)
            if token.text in self.bindings:
                return self.bindings[token.text]
            raise UnknownIdentifierError(f"unknown identifier {token.text!r}", token.line, token.column)
        found = token.text or "end of input"
        raise self.error(f"unexpected {found!r}")

    # =========================================================================
    # Statements
    # =========================================================================

    def parse(self, name: str) -> ExprMap:
        components: Dict[int, Expr] = {}
        declared_n: Optional[int] = None
        declared_at: Optional[Token] = None

        while self.current.kind != "end":
            if self.current.kind == "sep":
                self.advance()
                continue
            head = self.expect("name")
            if head.text == "let":
                target = self.expect("name")
                if target.text in _FUNCTIONS or target.text in ("let", "n") \
                        or _VARIABLE.match(target.text) or _COMPONENT.match(target.text):
                    raise self.error(f"cannot bind reserved name {target.text!r}", target)
                self.expect("op", "=")
                self.bindings[target.text] = self.expr()
            elif head.text == "n":
                self.expect("op", "=")
                if declared_n is not None:
                    raise DimensionError(f"line {head.line}: input dimension declared twice")
                declared_n, declared_at = self.integer(), head
            elif _COMPONENT.match(head.text):
                index = int(_COMPONENT.match(head.text).group(1)) - 1
                if index in components:
                    raise DimensionError(f"line {head.line}: component {head.text} defined twice")
                self.expect("op", "=")
                components[index] = self.expr()
            else:
                raise UnknownIdentifierError(
                    f"statement must define f<k>, n or a let binding, found {head.text!r}",
                    head.line, head.column,
                )
            if self.current.kind not in ("sep", "end"):
                raise self.error(f"unexpected {self.current.text!r} after statement")

        if not components:
            raise DslSyntaxError("no components defined", self.current.line, self.current.column)
        missing = [k + 1 for k in range(max(components) + 1) if k not in components]
        if missing:
            raise DimensionError(f"components {', '.join(f'f{k}' for k in missing)} are missing")

        used = set()
        for component in components.values():
            used |= variables(component)
        referenced = max(used) + 1 if used else 1
        if declared_n is not None:
            if declared_n < referenced:
                raise DimensionError(
                    f"line {declared_at.line}: n = {declared_n} but x{referenced} is referenced"
                )
            n_in = declared_n
        else:
            n_in = referenced

        ordered = tuple(components[k] for k in range(len(components)))
        return ExprMap(n_in, ordered, name)


def parse_map(text: str, name: str = "") -> ExprMap:
    """
    Parse DSL source into an ExprMap.

    Args:
        text: DSL source
        name: Identifier carried into reports

    Returns:
        The parsed map

    Raises:
        DslSyntaxError, UnknownIdentifierError, DimensionError
    """
    fmap = _Parser(tokenize(text)).parse(name)
    logger.debug(f"Parsed map {name or '<inline>'}: R^{fmap.n_in} -> R^{fmap.n_out}")
    return fmap


def parse_expr(text: str) -> Expr:
    """Parse a single expression (no statements)."""
    parser = _Parser(tokenize(text))
    result = parser.expr()
    while parser.current.kind == "sep":
        parser.advance()
    if parser.current.kind != "end":
        raise parser.error(f"unexpected {parser.current.text!r}")
    return result


def load_map(path: str) -> ExprMap:
    """Read and parse a DSL file; the map is named after the file."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_map(text, name)
