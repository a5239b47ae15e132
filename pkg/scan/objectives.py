"""
Scan Objectives

Scalar functions minimized over spheres. Every objective evaluates on
batches of points (B, n) and returns NaN where it is undefined instead of
raising. Objectives that are the norm of a residual vector also expose the
residual and its Jacobian, which the sphere minimizer uses for
Gauss-Newton steps.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from expr.maps import ExprMap
from numlin.kernels import (
    GRAM_CLAMP, RANK_TOL, nu_batch, nu_with_vectors_batch, tangent_project_batch, wedge_norm_batch,
)

logger = logging.getLogger(__name__)


class Objective:
    """
    Base objective.

    Attributes:
        name: Identifier written into scans and reports
        n: Input dimension
        fmap: Map whose values are recorded as image diagnostics
        least_squares: True when residuals() is available
    """
    name = "objective"
    least_squares = False

    def __init__(self, fmap: ExprMap):
        self.fmap = fmap
        self.n = fmap.n_in

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Values and gradients; central differences unless overridden."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        f = self.values(X)
        G = np.empty_like(X)
        for j in range(self.n):
            h = 6e-6 * np.maximum(1.0, np.abs(X[:, j]))
            forward, backward = X.copy(), X.copy()
            forward[:, j] += h
            backward[:, j] -= h
            G[:, j] = (self.values(forward) - self.values(backward)) / (2 * h)
        return f, G

    def residuals(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError(f"{self.name} is not a least-squares objective")

    def image(self, X: np.ndarray) -> np.ndarray:
        return self.fmap.evaluate(np.atleast_2d(X), strict=False)

    def describe(self) -> str:
        return f"{self.name}({self.fmap.name})"


class ResidualObjective(Objective):
    """phi(x) = |R(x)| for a residual vector R with Jacobian J."""
    least_squares = True

    def values(self, X):
        R, _ = self.residuals(X)
        return np.linalg.norm(R, axis=-1)

    def gradients(self, X):
        R, J = self.residuals(X)
        norm = np.linalg.norm(R, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            G = np.einsum("bkn,bk->bn", J, R) / norm[:, None]
        G = np.where(norm[:, None] > 0, G, 0.0)
        return norm, G


# =============================================================================
# Catalogue
# =============================================================================

class ExprObjective(Objective):
    """phi = g(x) for a scalar map."""
    name = "value"

    def __init__(self, g: ExprMap):
        if g.n_out != 1:
            raise ValueError(f"Expected a scalar map, got {g.n_out} components")
        super().__init__(g)

    def values(self, X):
        return self.fmap.evaluate(np.atleast_2d(X), strict=False)[:, 0]

    def gradients(self, X):
        X = np.atleast_2d(X)
        return self.values(X), self.fmap.jacobian(X, strict=False)[:, 0, :]


class GradientNormObjective(ResidualObjective):
    """phi = |grad g(x)|; residual grad g, Jacobian the Hessian of g."""
    name = "gradient_norm"

    def __init__(self, g: ExprMap):
        if g.n_out != 1:
            raise ValueError(f"Expected a scalar map, got {g.n_out} components")
        super().__init__(g)

    def values(self, X):
        return np.linalg.norm(self.fmap.jacobian(np.atleast_2d(X), strict=False)[:, 0, :], axis=-1)

    def residuals(self, X):
        X = np.atleast_2d(X)
        R = self.fmap.jacobian(X, strict=False)[:, 0, :]
        J = self.fmap.second_derivatives(X, strict=False)[:, 0]
        return R, J


class RabierObjective(Objective):
    """
    phi = |x| nu(Dg(x)).

    For scalar g this is |x| |grad g| and is treated as a residual; otherwise
    the gradient comes from the singular pair of the smallest singular value.
    """
    name = "rabier"

    def __init__(self, g: ExprMap):
        if g.n_out > g.n_in:
            raise ValueError(f"Rabier profile needs m <= n, got {g.n_out} > {g.n_in}")
        super().__init__(g)
        self.least_squares = g.n_out == 1

    def values(self, X):
        X = np.atleast_2d(X)
        return np.linalg.norm(X, axis=-1) * nu_batch(self.fmap.jacobian(X, strict=False))

    def residuals(self, X):
        X = np.atleast_2d(X)
        radius = np.linalg.norm(X, axis=-1)
        grad = self.fmap.jacobian(X, strict=False)[:, 0, :]
        hessian = self.fmap.second_derivatives(X, strict=False)[:, 0]
        unit = X / radius[:, None]
        R = radius[:, None] * grad
        J = radius[:, None, None] * hessian + grad[:, :, None] * unit[:, None, :]
        return R, J

    def gradients(self, X):
        X = np.atleast_2d(X)
        if self.least_squares:
            return ResidualObjective.gradients(self, X)
        radius = np.linalg.norm(X, axis=-1)
        jac = self.fmap.jacobian(X, strict=False)
        second = self.fmap.second_derivatives(X, strict=False)
        sigma, u, v = nu_with_vectors_batch(np.nan_to_num(jac))
        d_sigma = np.einsum("bi,bj,bijk->bk", u, v, second)
        unit = X / radius[:, None]
        value = radius * sigma
        G = unit * sigma[:, None] + radius[:, None] * d_sigma
        bad = ~np.all(np.isfinite(jac), axis=(-2, -1))
        value = np.where(bad, np.nan, value)
        return value, G


class DistanceObjective(ResidualObjective):
    """phi = |f(x) - y|; residual f - y, Jacobian Df."""
    name = "distance"

    def __init__(self, f: ExprMap, target):
        super().__init__(f)
        self.target = np.asarray(target, dtype=np.float64)
        if self.target.shape != (f.n_out,):
            raise ValueError(f"Target must have {f.n_out} coordinates, got {self.target.shape}")

    def values(self, X):
        return np.linalg.norm(self.fmap.evaluate(np.atleast_2d(X), strict=False) - self.target, axis=-1)

    def residuals(self, X):
        X = np.atleast_2d(X)
        return self.fmap.evaluate(X, strict=False) - self.target, self.fmap.jacobian(X, strict=False)

    def describe(self):
        return f"{self.name}({self.fmap.name}, y={self.target.tolist()})"


class WedgeRatioObjective(Objective):
    """phi = |grad f_1 ^ ... ^ grad f_n| / |wedge of all gradients except grad f_i|."""
    name = "wedge_ratio"

    def __init__(self, f: ExprMap, index: int, clamp: float = GRAM_CLAMP):
        if f.n_out != f.n_in:
            raise ValueError("Wedge ratio needs a square map")
        if not 0 <= index < f.n_out:
            raise ValueError(f"Component index {index + 1} out of range")
        super().__init__(f)
        self.index = index
        self.clamp = clamp

    def parts(self, X) -> Tuple[np.ndarray, np.ndarray]:
        """(numerator, denominator) wedge norms."""
        jac = self.fmap.jacobian(np.atleast_2d(X), strict=False)
        numerator = wedge_norm_batch(jac, self.clamp)
        others = np.delete(jac, self.index, axis=-2)
        denominator = wedge_norm_batch(others, self.clamp)
        return numerator, denominator

    def values(self, X):
        numerator, denominator = self.parts(X)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(denominator > 0, numerator / denominator, np.nan)

    def describe(self):
        return f"{self.name}({self.fmap.name}, i={self.index + 1})"


class RestrictedGradientObjective(Objective):
    """
    Norm of grad g_active projected to the tangent space of a level set
    of the constraint map, optionally scaled by |x| (the restricted Rabier
    profile of a scalar function).
    """

    def __init__(self, active: ExprMap, constraints: Optional[ExprMap], scale_by_radius: bool = False,
                 rank_tol: float = RANK_TOL):
        if active.n_out != 1:
            raise ValueError("The active function must be scalar")
        super().__init__(active)
        self.constraints = constraints
        self.scale_by_radius = scale_by_radius
        self.rank_tol = rank_tol
        self.name = "restricted_rabier" if scale_by_radius else "restricted_gradient_norm"

    def projected(self, X) -> Tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(X)
        grads = self.fmap.jacobian(X, strict=False)[:, 0, :]
        if self.constraints is None:
            return grads, np.ones(len(X), dtype=bool)
        rows = np.nan_to_num(self.constraints.jacobian(X, strict=False))
        return tangent_project_batch(grads, rows, self.rank_tol)

    def values(self, X):
        X = np.atleast_2d(X)
        projected, ok = self.projected(X)
        value = np.linalg.norm(projected, axis=-1)
        if self.scale_by_radius:
            value = value * np.linalg.norm(X, axis=-1)
        return np.where(ok, value, np.nan)
