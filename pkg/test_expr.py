#!/usr/bin/env python3
"""
Test the map DSL, exact derivatives and map algebra.

Usage:
    pytest test_expr.py
"""

import logging
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from expr.maps import DimensionError, ExprMap
from expr.nodes import Const, DomainGuardError, Var, mul, sqrt, to_text
from expr.parser import DslSyntaxError, UnknownIdentifierError, load_map, parse_expr, parse_map

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

ROOT = os.path.dirname(os.path.abspath(__file__))
CORPUS = os.path.join(ROOT, "corpus")

KING = """
# Henry King's function and its partner
let u = x1*x2
let q = 2*u^2 - 9*u + 12
f1 = x2*q
f2 = x1/q
"""

SQRT_RAY_F1 = "sqrt(1 + x1^2) - (x2^2 + x3^2 + 1)*x1"


def king_numpy(x):
    u = x[..., 0] * x[..., 1]
    q = 2 * u ** 2 - 9 * u + 12
    return np.stack([x[..., 1] * q, x[..., 0] / q], axis=-1)


def central_differences(fmap: ExprMap, X: np.ndarray) -> np.ndarray:
    """(B, m, n) Jacobian estimate with relative steps."""
    B, n = X.shape
    J = np.empty((B, fmap.n_out, n))
    for j in range(n):
        h = 1e-6 * np.maximum(1.0, np.abs(X[:, j]))
        forward, backward = X.copy(), X.copy()
        forward[:, j] += h
        backward[:, j] -= h
        J[:, :, j] = (fmap.evaluate(forward) - fmap.evaluate(backward)) / (2 * h[:, None])
    return J


# =============================================================================
# Parsing
# =============================================================================

def test_parse_king():
    """let bindings are substituted and values match a direct formula."""
    fmap = parse_map(KING, "king")
    assert fmap.n_in == 2 and fmap.n_out == 2
    rng = np.random.default_rng(7)
    X = rng.uniform(-3, 3, size=(200, 2))
    assert np.allclose(fmap.evaluate(X), king_numpy(X), rtol=1e-13, atol=1e-13)


def test_declared_dimension():
    fmap = parse_map("n = 4; f1 = x1; f2 = x2", "planar_in_r4")
    assert fmap.n_in == 4
    assert fmap.evaluate(np.array([1.0, 2.0, 3.0, 4.0])).tolist() == [1.0, 2.0]
    assert "n = 4" in fmap.to_text()


def test_constant_folding():
    e = parse_expr("(75/4)*x1 + sqrt(4)")
    fmap = ExprMap(1, (e,))
    assert fmap.evaluate(np.array([2.0]))[0] == pytest.approx(18.75 * 2 + 2.0)


@pytest.mark.parametrize("text, error", [
    ("", DslSyntaxError),
    ("# only a comment\n", DslSyntaxError),
    ("f1 = y", UnknownIdentifierError),
    ("f2 = x1", DimensionError),
    ("f1 = x1; f1 = x2", DimensionError),
    ("n = 1; f1 = x2", DimensionError),
    ("f1 = x1/0", DslSyntaxError),
    ("f1 = x1^-1", DslSyntaxError),
    ("f1 = x1 +", DslSyntaxError),
    ("let x1 = 2; f1 = x1", DslSyntaxError),
    ("f1 = sqrt(-1)", DslSyntaxError),
])
def test_malformed_input(text, error):
    with pytest.raises(error):
        parse_map(text)


def test_syntax_error_position():
    with pytest.raises(DslSyntaxError) as info:
        parse_map("f1 = x1\nf2 = x2 $ 3")
    assert info.value.line == 2
    assert info.value.column == 9


def test_text_round_trip():
    """Printing and re-parsing gives the same function."""
    fmap = parse_map(KING, "king")
    again = parse_map(fmap.to_text(), "king")
    X = np.random.default_rng(3).uniform(-2, 2, size=(50, 2))
    assert np.allclose(again.evaluate(X), fmap.evaluate(X), rtol=1e-12, atol=1e-12)


def test_infinite_constants_print_as_parsable_text():
    for value in (float("inf"), float("-inf")):
        assert parse_expr(to_text(Const(value))) == Const(value)
    scaled = mul(Var(0), Const(float("inf")))
    assert parse_expr(to_text(scaled)) == scaled
    with pytest.raises(ValueError):
        to_text(Const(float("nan")))


def test_corpus_fixtures_parse():
    """Every shipped fixture parses and is named after its file."""
    found = 0
    for dirpath, _, filenames in os.walk(CORPUS):
        for name in filenames:
            if name.endswith(".map"):
                fmap = load_map(os.path.join(dirpath, name))
                assert fmap.name == name[:-4]
                found += 1
    assert found >= 10


# =============================================================================
# Evaluation and Derivatives
# =============================================================================

def test_domain_guards():
    fmap = parse_map("f1 = sqrt(x1); f2 = 1/x2")
    with pytest.raises(DomainGuardError) as info:
        fmap.evaluate(np.array([-1.0, 1.0]))
    assert info.value.component == 0
    with pytest.raises(DomainGuardError):
        fmap.evaluate(np.array([1.0, 0.0]))
    relaxed = fmap.evaluate(np.array([[-1.0, 1.0], [4.0, 0.0]]), strict=False)
    assert np.isnan(relaxed[0, 0]) and relaxed[0, 1] == 1.0
    assert relaxed[1, 0] == 2.0 and np.isnan(relaxed[1, 1])


@pytest.mark.parametrize("source, n, scale", [
    (KING, 2, 3.0),
    ("f1 = " + SQRT_RAY_F1, 3, 3.0),
    ("let s = sqrt(1 + x3^2) + x3\nf1 = sqrt(2)*s - sqrt(x1^2 + x2^2 + s^2)", 3, 3.0),
    ("f1 = exp(x1)*x2; f2 = exp(x1)*(1 - x2^2)", 2, 2.0),
    ("f1 = x1 - 3*x1^3*x2^2 + 2*x1^4*x2^3 + x2*x3", 3, 1.5),
])
def test_jacobian_matches_finite_differences(source, n, scale):
    """1000 random points: exact Jacobian vs central differences within 1e-4 relative."""
    fmap = parse_map(source)
    assert fmap.n_in == n
    X = np.random.default_rng(11).uniform(-scale, scale, size=(1000, n))
    exact = fmap.jacobian(X)
    estimate = central_differences(fmap, X)
    error = np.abs(exact - estimate) / (1 + np.abs(exact))
    assert float(np.max(error)) <= 1e-4


def test_second_derivatives():
    fmap = parse_map("f1 = " + SQRT_RAY_F1)
    X = np.random.default_rng(5).uniform(-2, 2, size=(100, 3))
    H = fmap.second_derivatives(X)[:, 0]
    assert np.allclose(H, np.swapaxes(H, -1, -2))
    gradient = ExprMap(3, tuple(fmap.jacobian_exprs[0]))
    estimate = central_differences(gradient, X)
    assert np.max(np.abs(H - estimate) / (1 + np.abs(H))) <= 1e-4


def test_batch_shapes():
    fmap = parse_map(KING)
    X = np.zeros((4, 5, 2)) + 0.5
    assert fmap.evaluate(X).shape == (4, 5, 2)
    assert fmap.jacobian(X).shape == (4, 5, 2, 2)
    assert fmap.second_derivatives(X).shape == (4, 5, 2, 2, 2)
    with pytest.raises(DimensionError):
        fmap.evaluate(np.zeros(3))


# =============================================================================
# Map Algebra
# =============================================================================

def test_select_names_components():
    fmap = parse_map(KING, "king")
    g = fmap.select([1])
    assert g.name == "king[2]" and g.n_out == 1 and g.n_in == 2
    assert fmap.select([0, 1]).name == "king[1,2]"
    with pytest.raises(DimensionError):
        fmap.select([2])


def test_compose_left_reproduces_mixed_cone_image():
    """A o f for A = [[1,0,0],[0,1,0],[1,0,-1/2]] equals the hand-written composition."""
    f = load_map(os.path.join(CORPUS, "cone_image.map"))
    g = load_map(os.path.join(CORPUS, "cone_image_mixed.map"))
    A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, -0.5]])
    composed = f.compose_left(A)
    X = np.random.default_rng(2).uniform(-5, 5, size=(300, 3))
    assert np.allclose(composed.evaluate(X), g.evaluate(X), rtol=1e-12, atol=1e-12)
    assert np.allclose(composed.evaluate(X), f.evaluate(X) @ A.T, rtol=1e-12, atol=1e-12)


def test_compose_right():
    fmap = parse_map(KING, "king")
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    swapped = fmap.compose_right(A)
    X = np.random.default_rng(4).uniform(-2, 2, size=(100, 2))
    assert np.allclose(swapped.evaluate(X), fmap.evaluate(X @ A.T), rtol=1e-12, atol=1e-12)


def test_node_construction():
    e = sqrt(Var(0) ** 2 + 1)
    fmap = ExprMap(1, (e,))
    assert fmap.evaluate(np.array([0.0]))[0] == 1.0
    with pytest.raises(DimensionError):
        ExprMap(1, (Var(1),))
