"""
Planar level-curve tracing and bifurcation scanning.
"""

from .level_curves import (
    CELL_TABLE, BifurcationReport, LevelCurveSet, Polyline,
    bifurcation_scan, sample_grid, trace_level_curve,
)

__all__ = [
    'CELL_TABLE', 'BifurcationReport', 'LevelCurveSet', 'Polyline',
    'bifurcation_scan', 'sample_grid', 'trace_level_curve',
]
