"""
Verdict module for the injectivity checker.

Non-proper value search, collision search, combination enumeration and
the aggregation of condition reports into a conclusion.
"""

from .combinations import (
    CombinationSet, CoverageError, combination_label, enumerate_combinations, parse_combination,
)
from .properness import (
    STATUS_ASSERTED, STATUS_NO_WITNESS, STATUS_WITNESS,
    PropernessEvidence, TargetWitness, WitnessCluster,
    cluster_targets, grid_targets, nonproper_witness_search,
)
from .collision import CollisionPair, collision_search
from .aggregate import (
    BIJECTIVE, INCONCLUSIVE, INJECTIVE, NON_INJECTIVE, STATUS_NOT_SEARCHED,
    CombinationResult, Verdict, aggregate_verdict,
)

__all__ = [
    'CombinationSet', 'CoverageError', 'combination_label', 'enumerate_combinations', 'parse_combination',
    'STATUS_ASSERTED', 'STATUS_NO_WITNESS', 'STATUS_WITNESS', 'STATUS_NOT_SEARCHED',
    'PropernessEvidence', 'TargetWitness', 'WitnessCluster',
    'cluster_targets', 'grid_targets', 'nonproper_witness_search',
    'CollisionPair', 'collision_search',
    'BIJECTIVE', 'INJECTIVE', 'NON_INJECTIVE', 'INCONCLUSIVE',
    'CombinationResult', 'Verdict', 'aggregate_verdict',
]
