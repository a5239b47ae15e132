"""
Sphere-scan engine for the injectivity checker.

Estimates inf over |x| = r of scalar objectives across radius schedules.
"""

from .schedule import RadiusSchedule, derive_seed, start_points
from .objectives import (
    Objective, ResidualObjective, ExprObjective, GradientNormObjective, RabierObjective,
    DistanceObjective, WedgeRatioObjective, RestrictedGradientObjective,
)
from .sphere import (
    ObjectiveUndefinedError, RadialScan, SphereMinimum, TailFit, continue_minimum, radial_scan, sphere_min,
    tail_fit,
)
from .witness import Witness, witness_from_indices

__all__ = [
    'RadiusSchedule', 'derive_seed', 'start_points',
    'Objective', 'ResidualObjective', 'ExprObjective', 'GradientNormObjective', 'RabierObjective',
    'DistanceObjective', 'WedgeRatioObjective', 'RestrictedGradientObjective',
    'ObjectiveUndefinedError', 'RadialScan', 'SphereMinimum', 'TailFit',
    'continue_minimum', 'radial_scan', 'sphere_min', 'tail_fit',
    'Witness', 'witness_from_indices',
]
