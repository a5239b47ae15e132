"""
Expression module for the injectivity checker.

Parses the map DSL and provides exact evaluation and differentiation.
"""

from .nodes import (
    Expr, Const, Var, Add, Sub, Mul, Div, Neg, Pow, Sqrt, Exp,
    DomainGuardError, differentiate, substitute, to_text, variables,
)
from .maps import DimensionError, ExprMap, Program, evaluate, grad, jacobian
from .parser import DslSyntaxError, UnknownIdentifierError, load_map, parse_expr, parse_map

__all__ = [
    'Expr', 'Const', 'Var', 'Add', 'Sub', 'Mul', 'Div', 'Neg', 'Pow', 'Sqrt', 'Exp',
    'DomainGuardError', 'DimensionError', 'DslSyntaxError', 'UnknownIdentifierError',
    'ExprMap', 'Program',
    'differentiate', 'substitute', 'to_text', 'variables',
    'evaluate', 'grad', 'jacobian',
    'parse_map', 'parse_expr', 'load_map',
]
