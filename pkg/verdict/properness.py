"""
Non-Proper Value Search

Looks for values y reachable from infinity: targets whose distance profile
inf over |x| = r of |f(x) - y| tends to 0 as r grows. Found targets are
clustered and their apparent dimension is estimated by PCA. The search can
only falsify properness; it never establishes codim(S_f).
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from common.config import AnalysisConfig, PropernessConfig, get_config
from expr.maps import ExprMap
from scan.objectives import DistanceObjective
from scan.schedule import RadiusSchedule, derive_seed
from scan.sphere import ObjectiveUndefinedError, RadialScan, radial_scan, sphere_min
from scan.witness import Witness, witness_from_indices

logger = logging.getLogger(__name__)


STATUS_NO_WITNESS = "no-witness-found"
STATUS_WITNESS = "witness-found"
STATUS_ASSERTED = "user-asserted-codim>=2"


@dataclass
class TargetWitness:
    """A target value y with a sequence x_l, |x_l| -> infinity, f(x_l) -> y."""
    target: np.ndarray
    witness: Witness
    scan: RadialScan = field(repr=False)

    @property
    def final_distance(self) -> float:
        return float(self.witness.values[-1])

    def verify(self, f: ExprMap, tol: float, min_radius: float) -> bool:
        """Re-evaluate f at the last point of the witness."""
        last = self.witness.points[-1]
        distance = float(np.linalg.norm(f.evaluate(last, strict=False) - self.target))
        return distance <= tol and float(np.linalg.norm(last)) >= min_radius


@dataclass
class WitnessCluster:
    """Witness targets linked within one grid spacing."""
    members: np.ndarray             # (K, n) targets
    centroid: np.ndarray
    singular_values: np.ndarray
    dimension: int


@dataclass
class PropernessEvidence:
    """Witness targets of S_f and their cluster summary."""
    witnesses: List[TargetWitness] = field(default_factory=list)
    clusters: List[WitnessCluster] = field(default_factory=list)
    screened: int = 0
    scanned: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return bool(self.witnesses)

    @property
    def targets(self) -> np.ndarray:
        if not self.witnesses:
            return np.zeros((0, 0))
        return np.array([w.target for w in self.witnesses])

    @property
    def apparent_dimension(self) -> int:
        return max((c.dimension for c in self.clusters), default=-1)

    def status(self, assert_codim2: bool = False) -> str:
        if assert_codim2:
            return STATUS_ASSERTED
        return STATUS_WITNESS if self.found else STATUS_NO_WITNESS

    def to_dict(self) -> Dict[str, Any]:
        return {
            'screened': self.screened,
            'scanned': self.scanned,
            'witness_targets': [w.target for w in self.witnesses],
            'witnesses': [dict(w.witness.to_dict(), target=w.target) for w in self.witnesses],
            'clusters': [{'centroid': c.centroid, 'size': len(c.members),
                          'singular_values': c.singular_values, 'apparent_dimension': c.dimension}
                         for c in self.clusters],
            'apparent_dimension': self.apparent_dimension,
            'failures': self.failures,
        }


def grid_targets(n: int, config: PropernessConfig) -> np.ndarray:
    """Regular grid over [-w, w]^n, lexicographic order."""
    axis = np.linspace(-config.grid_half_width, config.grid_half_width, config.grid_points)
    return np.array(list(itertools.product(axis, repeat=n)), dtype=np.float64)


def _grid_spacing(config: PropernessConfig) -> float:
    if config.grid_points < 2:
        return config.merge_radius
    return 2 * config.grid_half_width / (config.grid_points - 1)


def cluster_targets(targets: np.ndarray, link: float, rel: float = 0.1) -> List[WitnessCluster]:
    """
    Single-linkage clusters of witness targets with a PCA dimension estimate:
    the number of singular values of the centred cluster >= rel * largest.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if len(targets) == 0 or targets.shape[1] == 0:
        return []
    if len(targets) == 1:
        labels = np.array([1])
    else:
        labels = fcluster(linkage(targets, method="single"), t=link * (1 + 1e-9), criterion="distance")
    clusters = []
    for label in sorted(set(labels.tolist()), key=lambda l: np.flatnonzero(labels == l)[0]):
        members = targets[labels == label]
        centroid = members.mean(axis=0)
        if len(members) > 1:
            s = np.linalg.svd(members - centroid, compute_uv=False)
            dimension = int(np.sum(s >= rel * s[0])) if s[0] > 0 else 0
        else:
            s = np.zeros(0)
            dimension = 0
        clusters.append(WitnessCluster(members, centroid, s, dimension))
    return clusters


def _trailing_witness(scan: RadialScan, config: PropernessConfig, min_points: int) -> Optional[Witness]:
    """Witness from the trailing radii whose distance keeps below screen_tol and ends below witness_tol."""
    resolved = np.flatnonzero(scan.finite)
    if resolved.size == 0 or resolved[-1] != len(scan.radii) - 1:
        return None
    run = []
    for i in resolved[::-1]:
        if scan.values[i] <= config.screen_tol:
            run.append(int(i))
        else:
            break
    run = run[::-1]
    if len(run) < min_points:
        return None
    last = run[-1]
    if scan.values[last] > config.witness_tol or scan.radii[last] < config.witness_min_radius:
        return None
    return witness_from_indices(scan, run)


def nonproper_witness_search(f: ExprMap, targets: Optional[np.ndarray] = None,
                             config: Optional[AnalysisConfig] = None) -> PropernessEvidence:
    """
    Search for non-proper values of a square map.

    Every target is screened on one far sphere; targets that come within
    screen_tol get a full distance profile. Images of far screening argmins
    that lie inside the grid box are added as extra targets.

    Args:
        f: Square map
        targets: Target values (default: the configured grid)
        config: Analysis configuration

    Returns:
        PropernessEvidence with verified witnesses and clusters
    """
    config = config if config is not None else get_config()
    p = config.properness
    if f.n_in != f.n_out:
        raise ValueError(f"Properness search needs a square map, got {f.n_out}x{f.n_in}")
    targets = grid_targets(f.n_in, p) if targets is None else np.atleast_2d(np.asarray(targets, dtype=np.float64))
    schedule = RadiusSchedule(p.r_min, p.r_max, p.points_per_decade)
    evidence = PropernessEvidence()
    logger.info(f"Screening {len(targets)} targets of {f.name} at |x| = {p.screen_radius:g}")

    def screen(y: np.ndarray, index: int):
        try:
            return sphere_min(DistanceObjective(f, y), p.screen_radius, p.screen_starts,
                              derive_seed(config.scan.seed, 0x70726F6265 + index), config.scan)
        except (ObjectiveUndefinedError, ArithmeticError, np.linalg.LinAlgError) as exc:
            evidence.failures.append(f"screen {y.tolist()}: {exc}")
            logger.warning(f"Screening of {y.tolist()} failed: {exc}")
            return None

    candidates: List[np.ndarray] = []
    extras: List[tuple] = []
    for index, y in enumerate(targets):
        result = screen(y, index)
        evidence.screened += 1
        if result is None:
            continue
        if result.value <= p.screen_tol:
            candidates.append(y)
            image = f.evaluate(result.point, strict=False)
            if np.all(np.isfinite(image)) and np.max(np.abs(image)) <= p.grid_half_width:
                extras.append((result.value, image))

    for _, image in sorted(extras, key=lambda item: item[0]):
        if len(candidates) >= len(targets) + p.max_extra_targets:
            break
        known = np.array(candidates)
        if np.min(np.linalg.norm(known - image, axis=-1)) > p.merge_radius:
            candidates.append(image)

    for y in candidates:
        objective = DistanceObjective(f, y)
        scan = radial_scan(objective, schedule, p.starts, config.scan.seed, config.scan)
        evidence.scanned += 1
        witness = _trailing_witness(scan, p, config.thresholds.witness_min_points)
        if witness is None:
            logger.debug(f"Target {y.tolist()}: distance profile does not reach {p.witness_tol:g}")
            continue
        found = TargetWitness(np.asarray(y, dtype=np.float64), witness, scan)
        if found.verify(f, p.witness_tol, p.witness_min_radius):
            logger.info(f"Non-proper value near {np.round(y, 6).tolist()}: "
                        f"distance {found.final_distance:.3g} at |x| = {witness.last_norm:.3g}")
            evidence.witnesses.append(found)

    if evidence.witnesses:
        evidence.clusters = cluster_targets(evidence.targets, _grid_spacing(p), p.pca_rel)
    logger.info(f"Properness search on {f.name}: {len(evidence.witnesses)} witness targets "
                f"from {evidence.scanned} profiles")
    return evidence
