"""
Expression Nodes

Immutable expression trees over variables x1..xn: constants, variables,
+ - * /, unary minus, nonnegative integer powers, sqrt and exp.
Division and sqrt nodes carry domain guards that evaluation checks.
Differentiation is exact and closed: the derivative of every node is again
an expression built from the same node types.
"""

import math
from dataclasses import dataclass
from functools import singledispatch
from typing import ClassVar, Dict, Iterator, Mapping, Tuple


class DomainGuardError(ValueError):
    """Evaluation hit a division by zero or the sqrt of a negative number."""

    def __init__(self, component: int, guard: str, node: str = ""):
        self.component = component
        self.guard = guard
        self.node = node
        detail = f" in {node}" if node else ""
        super().__init__(f"Domain guard violated in component f{component + 1}: {guard}{detail}")


# =============================================================================
# Node Types
# =============================================================================

@dataclass(frozen=True)
class Expr:
    """Base class for expression nodes."""
    precedence: ClassVar[int] = 100

    @property
    def operands(self) -> Tuple["Expr", ...]:
        return ()

    def rebuild(self, *operands: "Expr") -> "Expr":
        return self

    def __str__(self) -> str:
        return to_text(self)

    def __add__(self, other):
        return add(self, coerce(other))

    def __radd__(self, other):
        return add(coerce(other), self)

    def __sub__(self, other):
        return sub(self, coerce(other))

    def __rsub__(self, other):
        return sub(coerce(other), self)

    def __mul__(self, other):
        return mul(self, coerce(other))

    def __rmul__(self, other):
        return mul(coerce(other), self)

    def __truediv__(self, other):
        return div(self, coerce(other))

    def __rtruediv__(self, other):
        return div(coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: int):
        return power(self, exponent)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    @property
    def precedence(self) -> int:  # type: ignore[override]
        return 3 if math.copysign(1.0, self.value) < 0 else 100


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 0-based; printed as x{index + 1}


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr
    precedence: ClassVar[int] = 1
    symbol: ClassVar[str] = "+"

    @property
    def operands(self):
        return (self.left, self.right)

    def rebuild(self, left, right):
        return add(left, right)


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr
    precedence: ClassVar[int] = 1
    symbol: ClassVar[str] = "-"

    @property
    def operands(self):
        return (self.left, self.right)

    def rebuild(self, left, right):
        return sub(left, right)


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr
    precedence: ClassVar[int] = 2
    symbol: ClassVar[str] = "*"

    @property
    def operands(self):
        return (self.left, self.right)

    def rebuild(self, left, right):
        return mul(left, right)


@dataclass(frozen=True)
class Div(Expr):
    """left / right, guarded by right != 0."""
    left: Expr
    right: Expr
    precedence: ClassVar[int] = 2
    symbol: ClassVar[str] = "/"
    guard: ClassVar[str] = "denominator != 0"

    @property
    def operands(self):
        return (self.left, self.right)

    def rebuild(self, left, right):
        return div(left, right)


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    precedence: ClassVar[int] = 3

    @property
    def operands(self):
        return (self.operand,)

    def rebuild(self, operand):
        return neg(operand)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence: ClassVar[int] = 4

    @property
    def operands(self):
        return (self.base,)

    def rebuild(self, base):
        return power(base, self.exponent)


@dataclass(frozen=True)
class Sqrt(Expr):
    """sqrt(arg), guarded by arg >= 0."""
    arg: Expr
    guard: ClassVar[str] = "radicand >= 0"

    @property
    def operands(self):
        return (self.arg,)

    def rebuild(self, arg):
        return sqrt(arg)


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr

    @property
    def operands(self):
        return (self.arg,)

    def rebuild(self, arg):
        return exp(arg)


ZERO = Const(0.0)
ONE = Const(1.0)


# =============================================================================
# Folding Constructors
# =============================================================================

def coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def _is_const(e: Expr, value: float = None) -> bool:
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        raise ZeroDivisionError("division by zero")
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0):
        return ZERO
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def power(base: Expr, exponent: int) -> Expr:
    if isinstance(exponent, bool) or int(exponent) != exponent or exponent < 0:
        raise ValueError(f"Exponent must be a nonnegative integer, got {exponent!r}")
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def sqrt(arg: Expr) -> Expr:
    if isinstance(arg, Const):
        if arg.value < 0:
            raise ValueError(f"sqrt of negative constant {arg.value!r}")
        return Const(math.sqrt(arg.value))
    return Sqrt(arg)


def exp(arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(math.exp(arg.value))
    return Exp(arg)


# =============================================================================
# Traversal
# =============================================================================

def postorder(root: Expr) -> Iterator[Expr]:
    """Yield each distinct node (by identity) after its operands."""
    visited = set()
    stack = [(root, False)]
    while stack:
        current, children_visited = stack.pop()
        if id(current) in visited:
            continue
        if children_visited:
            visited.add(id(current))
            yield current
        else:
            stack.append((current, True))
            for operand in reversed(current.operands):
                if id(operand) not in visited:
                    stack.append((operand, False))


def variables(root: Expr) -> set:
    """0-based indices of the variables an expression references."""
    return {node.index for node in postorder(root) if isinstance(node, Var)}


def transform(root: Expr, leaf) -> Expr:
    """Rebuild an expression bottom-up, replacing leaves through `leaf`."""
    results: Dict[int, Expr] = {}
    for node in postorder(root):
        if node.operands:
            results[id(node)] = node.rebuild(*(results[id(op)] for op in node.operands))
        else:
            results[id(node)] = leaf(node)
    return results[id(root)]


def substitute(root: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace variables by expressions (0-based index -> Expr)."""
    return transform(root, lambda node: mapping.get(node.index, node) if isinstance(node, Var) else node)


# =============================================================================
# Differentiation
# =============================================================================

def differentiate(root: Expr, index: int) -> Expr:
    """Exact partial derivative with respect to variable `index` (0-based)."""
    memo: Dict[int, Expr] = {}
    for node in postorder(root):
        memo[id(node)] = _derivative(node, index, memo)
    return memo[id(root)]


@singledispatch
def _derivative(expr, index, memo):
    raise NotImplementedError(f"Cannot differentiate a {type(expr).__name__}")


@_derivative.register(Const)
def _(expr, index, memo):
    return ZERO


@_derivative.register(Var)
def _(expr, index, memo):
    return ONE if expr.index == index else ZERO


@_derivative.register(Add)
def _(expr, index, memo):
    return add(memo[id(expr.left)], memo[id(expr.right)])


@_derivative.register(Sub)
def _(expr, index, memo):
    return sub(memo[id(expr.left)], memo[id(expr.right)])


@_derivative.register(Mul)
def _(expr, index, memo):
    """Product rule."""
    return add(mul(memo[id(expr.left)], expr.right), mul(expr.left, memo[id(expr.right)]))


@_derivative.register(Div)
def _(expr, index, memo):
    """Quotient rule."""
    d_num, d_den = memo[id(expr.left)], memo[id(expr.right)]
    if isinstance(d_den, Const) and d_den.value == 0.0:
        return div(d_num, expr.right)
    numerator = sub(mul(d_num, expr.right), mul(expr.left, d_den))
    return div(numerator, power(expr.right, 2))


@_derivative.register(Neg)
def _(expr, index, memo):
    return neg(memo[id(expr.operand)])


@_derivative.register(Pow)
def _(expr, index, memo):
    """d/dx u^k = k u^(k-1) u'"""
    d_base = memo[id(expr.base)]
    scale = mul(Const(float(expr.exponent)), power(expr.base, expr.exponent - 1))
    return mul(scale, d_base)


@_derivative.register(Sqrt)
def _(expr, index, memo):
    """d/dx sqrt(u) = u' / (2 sqrt(u)); reuses the node itself."""
    d_arg = memo[id(expr.arg)]
    if isinstance(d_arg, Const) and d_arg.value == 0.0:
        return ZERO
    return div(d_arg, mul(Const(2.0), expr))


@_derivative.register(Exp)
def _(expr, index, memo):
    return mul(expr, memo[id(expr.arg)])


# =============================================================================
# Printing
# =============================================================================

def format_constant(value: float) -> str:
    if math.isnan(value):
        raise ValueError("NaN constant has no DSL text")
    if math.isinf(value):
        return "1e999" if value > 0 else "-1e999"
    if value == 0.0:
        return "-0.0" if math.copysign(1.0, value) < 0 else "0"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_text(root: Expr) -> str:
    """Render in DSL syntax; parsing the text rebuilds the same tree."""
    text: Dict[int, str] = {}
    for node in postorder(root):
        text[id(node)] = _render(node, text)
    return text[id(root)]


def _wrap(operand: Expr, rendered: str, parenthesize: bool) -> str:
    return f"({rendered})" if parenthesize else rendered


def _render(node: Expr, text: Dict[int, str]) -> str:
    if isinstance(node, Const):
        return format_constant(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, (Add, Sub, Mul, Div)):
        left = _wrap(node.left, text[id(node.left)], node.left.precedence < node.precedence)
        right = _wrap(node.right, text[id(node.right)], node.right.precedence <= node.precedence)
        return f"{left} {node.symbol} {right}"
    if isinstance(node, Neg):
        inner = text[id(node.operand)]
        return "-" + _wrap(node.operand, inner, node.operand.precedence < node.precedence)
    if isinstance(node, Pow):
        base = _wrap(node.base, text[id(node.base)], node.base.precedence <= node.precedence)
        return f"{base}^{node.exponent}"
    if isinstance(node, Sqrt):
        return f"sqrt({text[id(node.arg)]})"
    if isinstance(node, Exp):
        return f"exp({text[id(node.arg)]})"
    raise NotImplementedError(f"Cannot render a {type(node).__name__}")
