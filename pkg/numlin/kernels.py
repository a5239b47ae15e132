"""
Linear Algebra Kernels

Dense kernels used by every condition: the Rabier function nu(A)
(smallest singular value), wedge norms of gradient frames, eigenvalues
and projection onto the tangent space of a level set.
"""

import logging
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

GRAM_CLAMP = 1e-12
RANK_TOL = 1e-10
GRAM_REFINE = 1e-6      # det(G) below this fraction of prod |v_i|^2 is recomputed by QR


class ShapeError(ValueError):
    """Matrix or vector shapes do not fit the kernel."""
    pass


class RankDeficientError(ValueError):
    """Constraint rows are (numerically) linearly dependent."""
    pass


class EigenConvergenceError(RuntimeError):
    """The shifted QR iteration did not converge."""
    pass


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ShapeError(f"Expected a non-empty matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("Matrix has non-finite entries")
    return A


# =============================================================================
# nu(A)
# =============================================================================

def nu(A) -> float:
    """
    Smallest singular value of an m x n matrix with m <= n.

    Equals inf over unit covectors psi of |A^T psi|; zero iff rank < m.
    For a single row it is the Euclidean norm of that row.
    """
    A = _as_matrix(A)
    m, n = A.shape
    if m > n:
        raise ShapeError(f"nu needs m <= n, got a {m}x{n} matrix")
    if m == 1:
        return float(np.linalg.norm(A[0]))
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def nu_with_vectors(A) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    nu(A) with its singular pair: A v = nu u, |u| = |v| = 1.

    d nu = u^T (dA) v wherever the smallest singular value is simple.
    """
    A = _as_matrix(A)
    m, n = A.shape
    if m > n:
        raise ShapeError(f"nu needs m <= n, got a {m}x{n} matrix")
    if m == 1:
        sigma = float(np.linalg.norm(A[0]))
        v = A[0] / sigma if sigma > 0 else np.zeros(n)
        return sigma, np.ones(1), v
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    return float(S[-1]), U[:, -1], Vt[-1]


def nu_batch(A: np.ndarray) -> np.ndarray:
    """nu over a stack of matrices (..., m, n) -> (...)."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[-2] > A.shape[-1]:
        raise ShapeError(f"nu needs m <= n, got {A.shape[-2]}x{A.shape[-1]} matrices")
    if A.shape[-2] == 1:
        return np.linalg.norm(A[..., 0, :], axis=-1)
    return np.linalg.svd(A, compute_uv=False)[..., -1]


def nu_with_vectors_batch(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched nu_with_vectors: returns (sigma (...), u (..., m), v (..., n))."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[-2] > A.shape[-1]:
        raise ShapeError(f"nu needs m <= n, got {A.shape[-2]}x{A.shape[-1]} matrices")
    if A.shape[-2] == 1:
        sigma = np.linalg.norm(A[..., 0, :], axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(sigma[..., None] > 0, A[..., 0, :] / sigma[..., None], 0.0)
        return sigma, np.ones(sigma.shape + (1,)), v
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    return S[..., -1], U[..., :, -1], Vt[..., -1, :]


# =============================================================================
# Wedge Norms
# =============================================================================

def wedge_norm(vectors: Sequence, clamp: float = GRAM_CLAMP) -> float:
    """
    Norm of v1 ^ ... ^ vk: sqrt of the Gram determinant, or |det| of the
    frame itself when k = n.

    Args:
        vectors: k vectors in R^n (k <= n), as rows
        clamp: Negative determinants down to -clamp are read as 0

    Returns:
        The k-volume spanned by the vectors
    """
    V = _as_matrix(np.asarray(vectors, dtype=np.float64))
    k, n = V.shape
    if k > n:
        raise ShapeError(f"Cannot wedge {k} vectors in R^{n}")
    return float(wedge_norm_batch(V, clamp))


def wedge_norm_batch(V: np.ndarray, clamp: float = GRAM_CLAMP) -> np.ndarray:
    """Wedge norms of stacked frames (..., k, n) -> (...)."""
    V = np.asarray(V, dtype=np.float64)
    if V.shape[-2] > V.shape[-1]:
        raise ShapeError(f"Cannot wedge {V.shape[-2]} vectors in R^{V.shape[-1]}")
    if V.shape[-2] == 0:
        return np.ones(V.shape[:-2])
    if V.shape[-2] == V.shape[-1]:
        return np.abs(np.linalg.det(V))
    gram = V @ np.swapaxes(V, -1, -2)
    det = np.linalg.det(gram)
    if np.any(det < -clamp):
        logger.warning(f"Clamped Gram determinant {float(np.min(det)):.3e} below -{clamp:g} to 0")
    volume = np.sqrt(np.where(det < 0, 0.0, det))

    # Near-dependent frames lose every digit in det(G); R of V^T = QR keeps them
    scale = np.prod(np.sum(V * V, axis=-1), axis=-1)
    refine = np.isfinite(det) & (det <= GRAM_REFINE * scale) & (scale > 0)
    if np.any(refine):
        frames = V[refine]
        R = np.linalg.qr(np.swapaxes(frames, -1, -2), mode="r")
        volume = np.array(volume, dtype=np.float64)
        volume[refine] = np.abs(np.prod(np.diagonal(R, axis1=-2, axis2=-1), axis=-1))
    return volume


# =============================================================================
# Eigenvalues
# =============================================================================

def eigenvalues(A) -> np.ndarray:
    """
    All eigenvalues of a square matrix, with multiplicity.

    Reduces to upper Hessenberg form, then runs LAPACK's shifted QR on it.
    Returned sorted by (real part, imaginary part).
    """
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"Eigenvalues need a square matrix, got {A.shape}")
    H = scipy.linalg.hessenberg(A)
    try:
        values = np.linalg.eigvals(H)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"Shifted QR did not converge: {exc}") from exc
    return np.sort_complex(values.astype(np.complex128))


# =============================================================================
# Tangent Projection
# =============================================================================

def tangent_project(grad, constraints, rank_tol: float = RANK_TOL) -> np.ndarray:
    """
    Remove from grad its component in the row space of the constraints.

    Args:
        grad: Vector in R^n
        constraints: k x n matrix of constraint gradients (k may be 0)
        rank_tol: Rows with nu below this count as dependent

    Returns:
        The projection of grad onto the tangent space of the level set
    """
    grad = np.asarray(grad, dtype=np.float64)
    constraints = np.asarray(constraints, dtype=np.float64).reshape(-1, grad.shape[-1])
    if constraints.shape[0] == 0:
        return grad.copy()
    if constraints.shape[0] > grad.shape[-1]:
        raise ShapeError(f"{constraints.shape[0]} constraints in R^{grad.shape[-1]}")
    if nu(constraints) <= rank_tol:
        raise RankDeficientError(f"Constraint rows are dependent (nu <= {rank_tol:g})")
    Q, _ = np.linalg.qr(constraints.T)
    return grad - Q @ (Q.T @ grad)


def tangent_project_batch(grads: np.ndarray, constraints: np.ndarray,
                          rank_tol: float = RANK_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched tangent_project.

    Args:
        grads: (..., n)
        constraints: (..., k, n)

    Returns:
        (projected (..., n), ok (...)) where ok is False at rank-deficient
        points; projected is NaN there
    """
    grads = np.asarray(grads, dtype=np.float64)
    constraints = np.asarray(constraints, dtype=np.float64)
    if constraints.shape[-2] == 0:
        return grads.copy(), np.ones(grads.shape[:-1], dtype=bool)
    ok = nu_batch(constraints) > rank_tol
    Q, _ = np.linalg.qr(np.swapaxes(constraints, -1, -2))
    coefficients = np.einsum("...nk,...n->...k", Q, grads)
    projected = grads - np.einsum("...nk,...k->...n", Q, coefficients)
    projected = np.where(ok[..., None], projected, np.nan)
    return projected, ok
