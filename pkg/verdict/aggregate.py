"""
Verdict Aggregation

Maps the per-combination condition reports, the properness evidence and
an optional collision pair to one conclusion:

    bijective-evidence   every combination has a holding condition and
                         properness is not falsified (or codim >= 2 asserted)
    injective-evidence   n = 3 with a holding spectral condition and the same
                         properness status, or n = 2 with a component that
                         satisfies PS, Rabier or the integral condition
    non-injective        a verified collision pair
    inconclusive         anything else, with the gaps listed

All conclusions are sampling evidence, never proofs.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from common.formats import KIND_VERDICT, pack_json
from conditions.report import ConditionReport
from expr.maps import ExprMap
from verdict.collision import CollisionPair
from verdict.combinations import CombinationSet, CoverageError, combination_label, enumerate_combinations
from verdict.properness import STATUS_ASSERTED, STATUS_NO_WITNESS, STATUS_WITNESS, PropernessEvidence

logger = logging.getLogger(__name__)


BIJECTIVE = "bijective-evidence"
INJECTIVE = "injective-evidence"
NON_INJECTIVE = "non-injective"
INCONCLUSIVE = "inconclusive"

STATUS_NOT_SEARCHED = "not-searched"

# Conditions that make a combination's foliation one by planes
COMBINATION_CONDITIONS = ("fibration", "rabier", "palais_smale", "integral", "rabier_chain", "integral_chain")
PLANAR_CONDITIONS = ("palais_smale", "integral", "fibration")


@dataclass
class CombinationResult:
    """Reports for one projection F_I = (f_i1, ..., f_i(n-2))."""
    subset: Tuple[int, ...]
    reports: List[ConditionReport] = field(default_factory=list)

    @property
    def label(self) -> str:
        return combination_label(self.subset)

    @property
    def matrix(self) -> Dict[str, str]:
        return {report.condition: report.verdict.value for report in self.reports}

    @property
    def holding(self) -> List[str]:
        return [r.condition for r in self.reports if r.holds and r.condition in COMBINATION_CONDITIONS]

    @property
    def holds(self) -> bool:
        return bool(self.holding)


@dataclass
class Verdict:
    map_name: str
    n: int
    conclusion: str
    properness_status: str
    combinations: List[CombinationResult] = field(default_factory=list)
    global_reports: List[ConditionReport] = field(default_factory=list)
    properness: Optional[PropernessEvidence] = None
    collision: Optional[CollisionPair] = None
    gaps: List[str] = field(default_factory=list)
    route: str = ""

    def __post_init__(self):
        if self.conclusion == NON_INJECTIVE and self.collision is None:
            raise ValueError("A non-injective verdict needs a collision pair")

    @property
    def reports(self) -> List[ConditionReport]:
        every = list(self.global_reports)
        for combination in self.combinations:
            every.extend(combination.reports)
        return every

    def to_dict(self) -> Dict[str, Any]:
        return {
            'map': self.map_name,
            'n': self.n,
            'conclusion': self.conclusion,
            'route': self.route,
            'evidence_not_proof': True,
            'properness_status': self.properness_status,
            'combinations': [{'subset': list(c.subset), 'label': c.label, 'conditions': c.matrix,
                              'holds': c.holds} for c in self.combinations],
            'global': {f"{r.condition}[{r.target}]": r.verdict.value for r in self.global_reports},
            'properness': self.properness.to_dict() if self.properness is not None else None,
            'collision': self.collision.to_dict() if self.collision is not None else None,
            'gaps': self.gaps,
        }

    def pack(self, config: Optional[Dict[str, Any]] = None) -> str:
        payload = self.to_dict()
        if config is not None:
            payload['config'] = config
        return pack_json(KIND_VERDICT, payload)

    def summary(self) -> str:
        """Human-readable mirror of to_dict()."""
        lines = [f"Map: {self.map_name} (n = {self.n})",
                 f"Conclusion: {self.conclusion}" + (f" via {self.route}" if self.route else ""),
                 "  (sampling evidence, not a proof)",
                 f"Properness: {self.properness_status}"]
        if self.properness is not None and self.properness.found:
            lines.append(f"  {len(self.properness.witnesses)} witness targets, "
                         f"apparent dimension {self.properness.apparent_dimension}")
        if self.combinations:
            lines.append("Combinations:")
            for combination in self.combinations:
                cells = ", ".join(f"{name}={value}" for name, value in combination.matrix.items())
                mark = "holds" if combination.holds else "open"
                lines.append(f"  {{{combination.label}}} [{mark}] {cells}")
        if self.global_reports:
            lines.append("Global conditions:")
            for report in self.global_reports:
                lines.append(f"  {report.key}: {report.verdict.value} - {report.rationale}")
        if self.collision is not None:
            lines.append(f"Collision: x = {self.collision.x.tolist()}, x' = {self.collision.x_prime.tolist()}")
        if self.gaps:
            lines.append("Gaps:")
            lines.extend(f"  - {gap}" for gap in self.gaps)
        return "\n".join(lines) + "\n"


def _global(reports: Sequence[ConditionReport], condition: str) -> Optional[ConditionReport]:
    return next((r for r in reports if r.condition == condition), None)


def _planar_holds(reports: Sequence[ConditionReport]) -> List[str]:
    """Planar rule: PS, integral, or Rabier together with an empty Sing(g)."""
    names = [r.condition for r in reports if r.holds and r.condition in PLANAR_CONDITIONS]
    rabier = _global(reports, "rabier")
    singular = _global(reports, "singular_set")
    if rabier is not None and rabier.holds and singular is not None and singular.holds:
        names.append("rabier")
    return names


def aggregate_verdict(f: ExprMap, reports: Mapping[Tuple[int, ...], Sequence[ConditionReport]],
                      properness: Optional[PropernessEvidence] = None, assert_codim2: bool = False,
                      collision: Optional[CollisionPair] = None,
                      global_reports: Sequence[ConditionReport] = (),
                      combinations: Optional[CombinationSet] = None) -> Verdict:
    """
    Aggregate condition reports into a verdict.

    Args:
        f: The analysed square map
        reports: Condition reports per combination (1-based sorted subsets);
            for n = 2 the keys are single components
        properness: Non-proper value search result, if one was run
        assert_codim2: User assertion that codim(S_f) >= 2
        collision: Collision pair, if one was found
        global_reports: Whole-map reports (spectral, balreira)
        combinations: Combinations that were examined (default: all)

    Raises:
        CoverageError: If a combination has no reports
    """
    n = f.n_in
    keyed = {tuple(sorted(k)): list(v) for k, v in reports.items()}
    gaps: List[str] = []

    if assert_codim2:
        status = STATUS_ASSERTED
    elif properness is None:
        status = STATUS_NOT_SEARCHED
    else:
        status = properness.status()
    properness_ok = status in (STATUS_NO_WITNESS, STATUS_ASSERTED)
    if status == STATUS_WITNESS:
        gaps.append(f"S_f is not empty: {len(properness.witnesses)} witness targets "
                    f"(apparent dimension {properness.apparent_dimension}); codim(S_f) >= 2 not established")
    elif status == STATUS_NOT_SEARCHED:
        gaps.append("properness was not searched")

    if n >= 3:
        full = enumerate_combinations(n)
        expected = combinations if combinations is not None else full
        missing = ["{" + combination_label(s) + "}" for s in expected if s not in keyed]
        if missing:
            raise CoverageError(f"No reports for combinations {', '.join(missing)}")
        results = [CombinationResult(s, keyed[s]) for s in expected]
        if len(expected) < len(full):
            skipped = ["{" + combination_label(s) + "}" for s in full if s not in expected]
            gaps.append(f"combinations not examined: {', '.join(skipped)}")
    else:
        results = [CombinationResult(s, v) for s, v in sorted(keyed.items())]

    def verdict(conclusion: str, route: str = "") -> Verdict:
        logger.info(f"Verdict for {f.name}: {conclusion}" + (f" ({route})" if route else ""))
        return Verdict(f.name, n, conclusion, status, results, list(global_reports), properness,
                       collision, gaps, route)

    if collision is not None and collision.verify(f):
        return verdict(NON_INJECTIVE, "verified collision pair")
    if collision is not None:
        gaps.append("collision pair did not re-verify")
        collision = None

    if n >= 3:
        open_combinations = [c for c in results if not c.holds]
        for c in open_combinations:
            gaps.append(f"{{{c.label}}}: no condition holds ({', '.join(f'{k}={v}' for k, v in c.matrix.items())})")
        full_coverage = len(results) == len(enumerate_combinations(n))
        if properness_ok and full_coverage and not open_combinations:
            return verdict(BIJECTIVE, "every combination foliates by planes")
        spectral = _global(global_reports, "spectral")
        if n == 3 and spectral is not None and spectral.holds and properness_ok:
            return verdict(INJECTIVE, "spectral condition")
        return verdict(INCONCLUSIVE)

    if n == 2:
        for c in results:
            names = _planar_holds(c.reports)
            if names:
                return verdict(INJECTIVE, f"planar rule on component {c.label} ({', '.join(names)})")
        gaps.append("no component satisfies PS, Rabier or the integral condition")
        return verdict(INCONCLUSIVE)

    gaps.append("one-dimensional maps are only decided by a collision")
    return verdict(INCONCLUSIVE)
