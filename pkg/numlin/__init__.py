"""
Dense linear-algebra kernels for the injectivity checker.
"""

from .kernels import (
    GRAM_CLAMP, RANK_TOL,
    EigenConvergenceError, RankDeficientError, ShapeError,
    eigenvalues, nu, nu_batch, nu_with_vectors, nu_with_vectors_batch,
    tangent_project, tangent_project_batch, wedge_norm, wedge_norm_batch,
)

__all__ = [
    'GRAM_CLAMP', 'RANK_TOL',
    'EigenConvergenceError', 'RankDeficientError', 'ShapeError',
    'eigenvalues', 'nu', 'nu_batch', 'nu_with_vectors', 'nu_with_vectors_batch',
    'tangent_project', 'tangent_project_batch', 'wedge_norm', 'wedge_norm_batch',
]
