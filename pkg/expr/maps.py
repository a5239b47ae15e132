"""
Expression Maps

ExprMap bundles n_out component expressions over n_in variables and
evaluates them, their Jacobian and their second derivatives on batches of
points. Components are compiled once into a straight-line program where
structurally equal subexpressions share one slot.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from expr.nodes import (
    Add, Const, Div, DomainGuardError, Exp, Expr, Mul, Neg, Pow, Sqrt, Sub, Var,
    coerce, differentiate, postorder, substitute, to_text, variables,
)

logger = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Component count or variable indices do not match the declared dimensions."""
    pass


# =============================================================================
# Compiled Program
# =============================================================================

_BINARY = {Add: "add", Sub: "sub", Mul: "mul", Div: "div"}
_UNARY = {Neg: "neg", Sqrt: "sqrt", Exp: "exp"}


class Program:
    """
    Straight-line evaluation of several expressions at once.

    Each instruction is (op, operand slots, payload). Structurally equal
    subtrees are mapped to the same slot, so derivative trees that repeat
    their parent's factors cost one evaluation per distinct subexpression.
    """

    def __init__(self, roots: Sequence[Expr], n_in: int):
        self.n_in = n_in
        self.instructions: List[Tuple[str, Tuple[int, ...], object]] = []
        self.owner: List[int] = []          # First root that needs each slot
        self.labels: List[str] = []
        keys: Dict[tuple, int] = {}
        self.outputs: List[int] = []

        for root_index, root in enumerate(roots):
            slots: Dict[int, int] = {}
            for node in postorder(root):
                operand_slots = tuple(slots[id(op)] for op in node.operands)
                op, payload = self._opcode(node)
                key = (op, operand_slots, payload)
                slot = keys.get(key)
                if slot is None:
                    slot = len(self.instructions)
                    keys[key] = slot
                    self.instructions.append((op, operand_slots, payload))
                    self.owner.append(root_index)
                    self.labels.append(to_text(node) if op in ("div", "sqrt") else "")
                slots[id(node)] = slot
            self.outputs.append(slots[id(root)])

    @staticmethod
    def _opcode(node: Expr):
        if isinstance(node, Const):
            return "const", node.value
        if isinstance(node, Var):
            return "var", node.index
        if isinstance(node, Pow):
            return "pow", node.exponent
        for kind, op in _BINARY.items():
            if isinstance(node, kind):
                return op, None
        for kind, op in _UNARY.items():
            if isinstance(node, kind):
                return op, None
        raise NotImplementedError(f"Cannot compile a {type(node).__name__}")

    def run(self, points: np.ndarray, strict: bool = True) -> List[np.ndarray]:
        """
        Evaluate every root on a batch of points.

        Args:
            points: Array of shape (..., n_in)
            strict: Raise DomainGuardError on a violated guard; otherwise the
                affected entries become NaN

        Returns:
            One array of shape points.shape[:-1] per root
        """
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != self.n_in:
            raise DimensionError(f"Expected points with {self.n_in} coordinates, got shape {points.shape}")
        batch_shape = points.shape[:-1]
        values: List[np.ndarray] = []

        with np.errstate(all="ignore"):
            for slot, (op, args, payload) in enumerate(self.instructions):
                if op == "const":
                    values.append(np.float64(payload))
                elif op == "var":
                    values.append(points[..., payload])
                elif op == "add":
                    values.append(values[args[0]] + values[args[1]])
                elif op == "sub":
                    values.append(values[args[0]] - values[args[1]])
                elif op == "mul":
                    values.append(values[args[0]] * values[args[1]])
                elif op == "div":
                    denominator = values[args[1]]
                    bad = denominator == 0
                    if np.any(bad):
                        if strict:
                            raise DomainGuardError(self.owner[slot], Div.guard, self.labels[slot])
                        denominator = np.where(bad, np.nan, denominator)
                    values.append(values[args[0]] / denominator)
                elif op == "neg":
                    values.append(-values[args[0]])
                elif op == "pow":
                    values.append(np.power(values[args[0]], payload))
                elif op == "sqrt":
                    radicand = values[args[0]]
                    bad = radicand < 0
                    if np.any(bad):
                        if strict:
                            raise DomainGuardError(self.owner[slot], Sqrt.guard, self.labels[slot])
                        radicand = np.where(bad, np.nan, radicand)
                    values.append(np.sqrt(radicand))
                elif op == "exp":
                    values.append(np.exp(values[args[0]]))

        return [np.broadcast_to(values[slot], batch_shape).astype(np.float64, copy=True)
                for slot in self.outputs]


# =============================================================================
# ExprMap
# =============================================================================

@dataclass(frozen=True)
class ExprMap:
    """
    A map R^n_in -> R^n_out given by closed-form components.

    Immutable; compiled programs and derivative trees are built lazily
    and cached on first use.
    """
    n_in: int
    components: Tuple[Expr, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(coerce(c) for c in self.components))
        if self.n_in < 1:
            raise DimensionError(f"Input dimension must be >= 1, got {self.n_in}")
        if not self.components:
            raise DimensionError("A map needs at least one component")
        for k, component in enumerate(self.components):
            used = variables(component)
            if used and max(used) >= self.n_in:
                raise DimensionError(
                    f"Component f{k + 1} references x{max(used) + 1} but n_in = {self.n_in}"
                )

    @property
    def n_out(self) -> int:
        return len(self.components)

    # -------------------------------------------------------------------------
    # Derivative trees
    # -------------------------------------------------------------------------

    @cached_property
    def jacobian_exprs(self) -> Tuple[Tuple[Expr, ...], ...]:
        return tuple(
            tuple(differentiate(component, j) for j in range(self.n_in))
            for component in self.components
        )

    @cached_property
    def hessian_exprs(self) -> Tuple[Tuple[Tuple[Expr, ...], ...], ...]:
        """Second derivatives d2 f_i / dx_j dx_k (symmetric; computed for k >= j)."""
        result = []
        for row in self.jacobian_exprs:
            block = [[None] * self.n_in for _ in range(self.n_in)]
            for j in range(self.n_in):
                for k in range(j, self.n_in):
                    block[j][k] = differentiate(row[j], k)
                    block[k][j] = block[j][k]
            result.append(tuple(tuple(r) for r in block))
        return tuple(result)

    @cached_property
    def _value_program(self) -> Program:
        return Program(self.components, self.n_in)

    @cached_property
    def _jacobian_program(self) -> Program:
        flat = [e for row in self.jacobian_exprs for e in row]
        program = Program(flat, self.n_in)
        program.owner = [i // self.n_in for i in program.owner]
        return program

    @cached_property
    def _hessian_program(self) -> Program:
        n = self.n_in
        flat = [self.hessian_exprs[i][j][k] for i in range(self.n_out)
                for j in range(n) for k in range(j, n)]
        per_component = n * (n + 1) // 2
        program = Program(flat, n)
        program.owner = [i // per_component for i in program.owner]
        return program

    # -------------------------------------------------------------------------
    # Evaluation
    # -------------------------------------------------------------------------

    def evaluate(self, x, strict: bool = True) -> np.ndarray:
        """Values at x of shape (..., n_in) -> (..., n_out)."""
        return np.stack(self._value_program.run(x, strict), axis=-1)

    def jacobian(self, x, strict: bool = True) -> np.ndarray:
        """Jacobian at x of shape (..., n_in) -> (..., n_out, n_in)."""
        flat = np.stack(self._jacobian_program.run(x, strict), axis=-1)
        return flat.reshape(flat.shape[:-1] + (self.n_out, self.n_in))

    def second_derivatives(self, x, strict: bool = True) -> np.ndarray:
        """Second derivatives at x -> (..., n_out, n_in, n_in)."""
        n = self.n_in
        upper = self._hessian_program.run(x, strict)
        batch_shape = upper[0].shape
        result = np.empty(batch_shape + (self.n_out, n, n))
        position = 0
        for i in range(self.n_out):
            for j in range(n):
                for k in range(j, n):
                    result[..., i, j, k] = upper[position]
                    result[..., i, k, j] = upper[position]
                    position += 1
        return result

    # -------------------------------------------------------------------------
    # Building new maps
    # -------------------------------------------------------------------------

    def select(self, indices: Sequence[int], name: Optional[str] = None) -> "ExprMap":
        """Map made of the chosen components (0-based indices, in order)."""
        for i in indices:
            if not 0 <= i < self.n_out:
                raise DimensionError(f"Component index {i + 1} out of range 1..{self.n_out}")
        label = name if name is not None else f"{self.name}[{','.join(str(i + 1) for i in indices)}]"
        return ExprMap(self.n_in, tuple(self.components[i] for i in indices), label)

    def compose_left(self, matrix, name: Optional[str] = None) -> "ExprMap":
        """A o f for a constant (k, n_out) matrix A."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.n_out:
            raise DimensionError(f"Cannot compose a {matrix.shape} matrix after a map into R^{self.n_out}")
        components = []
        for row in matrix:
            total: Expr = Const(0.0)
            for coefficient, component in zip(row, self.components):
                if coefficient != 0.0:
                    total = total + float(coefficient) * component
            components.append(total)
        return ExprMap(self.n_in, tuple(components), name if name is not None else f"A*{self.name}")

    def compose_right(self, matrix, name: Optional[str] = None) -> "ExprMap":
        """f o A for a constant (n_in, k) matrix A."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != self.n_in:
            raise DimensionError(f"Cannot compose a map on R^{self.n_in} after a {matrix.shape} matrix")
        mapping = {}
        for i, row in enumerate(matrix):
            total: Expr = Const(0.0)
            for j, coefficient in enumerate(row):
                if coefficient != 0.0:
                    total = total + float(coefficient) * Var(j)
            mapping[i] = total
        components = tuple(substitute(c, mapping) for c in self.components)
        return ExprMap(matrix.shape[1], components, name if name is not None else f"{self.name}*A")

    def to_text(self) -> str:
        """DSL source for this map (includes `n = ...` when trailing inputs are unused)."""
        lines = []
        used = set()
        for component in self.components:
            used |= variables(component)
        if not used or max(used) + 1 < self.n_in:
            lines.append(f"n = {self.n_in}")
        for k, component in enumerate(self.components):
            lines.append(f"f{k + 1} = {to_text(component)}")
        return "\n".join(lines) + "\n"

    def __str__(self) -> str:
        return self.to_text()


# =============================================================================
# Point Functions
# =============================================================================

def evaluate(fmap: ExprMap, x) -> np.ndarray:
    """Componentwise value of a map at one point or a batch of points."""
    return fmap.evaluate(x)


def grad(e: Expr, x, n_in: Optional[int] = None) -> np.ndarray:
    """Exact gradient of a scalar expression at x."""
    x = np.asarray(x, dtype=np.float64)
    n = n_in if n_in is not None else x.shape[-1]
    return ExprMap(n, (e,)).jacobian(x)[..., 0, :]


def jacobian(fmap: ExprMap, x) -> np.ndarray:
    """Exact Jacobian (m x n) of a map at x."""
    return fmap.jacobian(x)
