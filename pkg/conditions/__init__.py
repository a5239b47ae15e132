"""
Condition battery for the injectivity checker.

PS, Rabier (K-infinity), integral, spectral and wedge-ratio conditions,
restricted chains on level sets, and the reports they produce.
"""

from .report import ConditionReport, Outcome, SpectralReport
from .chain import ChainProjectionError, RestrictedChain, build_restricted_chain, chain_scan
from .checks import (
    check_balreira, check_integral, check_palais_smale, check_rabier, check_singular_set, check_spectral,
    classify_integral, combine_parts, gradient_scan, infer_fibration, integral_chain, level_chains,
    rabier_chain, rabier_scan, spectral_points,
)

__all__ = [
    'ConditionReport', 'Outcome', 'SpectralReport',
    'ChainProjectionError', 'RestrictedChain', 'build_restricted_chain', 'chain_scan',
    'check_palais_smale', 'check_rabier', 'check_integral', 'check_spectral', 'check_balreira',
    'check_singular_set', 'classify_integral', 'combine_parts', 'gradient_scan', 'rabier_scan',
    'infer_fibration', 'integral_chain', 'rabier_chain', 'level_chains', 'spectral_points',
]
