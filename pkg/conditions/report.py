"""
Condition Reports

Outcome of one named condition on one target (a component, a combination
or the whole map) with the numeric evidence behind it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from common.formats import KIND_REPORT, pack_json
from numlin.kernels import eigenvalues
from scan.sphere import RadialScan
from scan.witness import Witness


class Outcome(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ConditionReport:
    """
    Verdict for one condition.

    A `fails` report carries either a witness or a finite bound in
    evidence['bound']; every report is sampling evidence, not a proof.
    """
    condition: str
    target: str
    verdict: Outcome
    rationale: str
    evidence: Dict[str, Any] = field(default_factory=dict)
    thresholds: Dict[str, Any] = field(default_factory=dict)
    scans: Dict[str, RadialScan] = field(default_factory=dict)
    witness: Optional[Witness] = None
    inferred: bool = False
    parts: List["ConditionReport"] = field(default_factory=list)
    spectral: Optional["SpectralReport"] = field(default=None, repr=False)

    def __post_init__(self):
        self.verdict = Outcome(self.verdict)
        if self.verdict is Outcome.FAILS and self.witness is None:
            bound = self.evidence.get('bound')
            if bound is None or not math.isfinite(float(bound)):
                raise ValueError(f"{self.condition} on {self.target}: a failing report needs a witness or a bound")

    @property
    def holds(self) -> bool:
        return self.verdict is Outcome.HOLDS

    @property
    def fails(self) -> bool:
        return self.verdict is Outcome.FAILS

    @property
    def key(self) -> str:
        return f"{self.condition}[{self.target}]"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'condition': self.condition,
            'target': self.target,
            'verdict': self.verdict.value,
            'rationale': self.rationale,
            'evidence_not_proof': True,
            'inferred': self.inferred,
            'evidence': self.evidence,
            'thresholds': self.thresholds,
            'scans': {label: {'objective': scan.objective, 'radii': len(scan.radii),
                              'resolved': int(np.sum(scan.finite)), 'failed': scan.failed}
                      for label, scan in self.scans.items()},
            'witness': self.witness.to_dict() if self.witness is not None else None,
            'parts': [part.to_dict() for part in self.parts],
        }

    def pack(self, config: Optional[Dict[str, Any]] = None) -> str:
        payload = self.to_dict()
        if config is not None:
            payload['config'] = config
        return pack_json(KIND_REPORT, payload)


@dataclass
class SpectralReport:
    """Eigenvalues of Df sampled on a point cloud."""
    epsilon: float
    points: np.ndarray              # (P, n)
    eigenvalues: np.ndarray         # (P, n) complex
    distances: np.ndarray           # (P,) distance of each point's spectrum to [0, eps)
    skipped: int = 0

    @property
    def min_distance(self) -> float:
        return float(np.min(self.distances)) if len(self.distances) else math.nan

    def verify(self, f, tol: float = 1e-8) -> bool:
        """Recompute every stored spectrum from its point."""
        jac = f.jacobian(self.points)
        for point_jac, stored in zip(jac, self.eigenvalues):
            fresh = eigenvalues(point_jac)
            if np.max(np.abs(fresh - stored)) > tol * (1 + np.max(np.abs(stored))):
                return False
        return True

    def summary(self) -> Dict[str, Any]:
        return {
            'epsilon': self.epsilon,
            'points': len(self.points),
            'skipped': self.skipped,
            'min_distance': self.min_distance,
        }
