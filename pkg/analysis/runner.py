"""
Analysis Runner

Orchestrates one analysis of a map: the condition battery for every
combination, the whole-map conditions, the properness and collision
searches, the verdict, planar level-curve scans, and the output bundle.
"""

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from analysis.plots import plot_level_curves, plot_scan, plot_spectrum
from common.config import AnalysisConfig, CONDITION_NAMES, config_to_dict, get_config
from common.formats import ExitCode, write_text
from conditions.checks import (
    check_balreira, check_integral, check_palais_smale, check_rabier, check_singular_set, check_spectral,
    gradient_scan, infer_fibration, integral_chain, rabier_chain,
)
from conditions.report import ConditionReport, Outcome
from expr.maps import ExprMap
from expr.parser import load_map
from scan.schedule import RadiusSchedule
from topology.level_curves import BifurcationReport, bifurcation_scan
from verdict.aggregate import INCONCLUSIVE, STATUS_NOT_SEARCHED, CombinationResult, Verdict, aggregate_verdict
from verdict.collision import collision_search
from verdict.combinations import enumerate_combinations
from verdict.properness import nonproper_witness_search

logger = logging.getLogger(__name__)


@dataclass
class AnalysisBundle:
    """Everything one analysis produced."""
    fmap: ExprMap
    verdict: Verdict
    config: AnalysisConfig
    bifurcations: List[BifurcationReport] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    @property
    def reports(self) -> List[ConditionReport]:
        return self.verdict.reports

    def find(self, condition: str, target: Optional[str] = None) -> Optional[ConditionReport]:
        """First report for a condition, optionally on a target (map or component name)."""
        for report in self.reports:
            if report.condition == condition and (target is None or report.target == target):
                return report
        return None

    @property
    def exit_code(self) -> ExitCode:
        every = [r.verdict for r in self.reports]
        if self.verdict.conclusion == INCONCLUSIVE and all(v is Outcome.INCONCLUSIVE for v in every):
            return ExitCode.INCONCLUSIVE
        return ExitCode.OK


def _validate_conditions(conditions: Sequence[str]) -> None:
    unknown = [c for c in conditions if c not in CONDITION_NAMES]
    if unknown:
        raise ValueError(f"Unknown conditions {unknown}; choose from {list(CONDITION_NAMES)}")


def component_reports(g: ExprMap, schedule: RadiusSchedule, config: AnalysisConfig) -> List[ConditionReport]:
    """Conditions (a)-(d) for a scalar function g (a component of f)."""
    wanted = config.conditions
    reports: List[ConditionReport] = []
    if "palais_smale" in wanted or "integral" in wanted:
        scan = gradient_scan(g, schedule, config)
        if "palais_smale" in wanted:
            reports.append(check_palais_smale(g, schedule, config, scan=scan))
        if "integral" in wanted:
            reports.append(check_integral(g, schedule, config, scan=scan))
    if "rabier" in wanted:
        rabier = check_rabier(g, schedule, config=config)
        singular = check_singular_set(g, config)
        reports.extend([rabier, singular, infer_fibration(rabier, singular)])
    return reports


def projection_reports(g: ExprMap, schedule: RadiusSchedule, config: AnalysisConfig) -> List[ConditionReport]:
    """Conditions (a_h)-(e_h) for a projection g = F_I into R^(n-2), n > 3."""
    wanted = config.conditions
    reports: List[ConditionReport] = []
    if "rabier" in wanted:
        rabier = check_rabier(g, schedule, config=config)
        singular = check_singular_set(g, config)
        reports.extend([rabier, singular, infer_fibration(rabier, singular), rabier_chain(g, schedule, config)])
    if "integral" in wanted:
        reports.append(integral_chain(g, schedule, config))
    return reports


def _run_jobs(jobs, workers: int) -> list:
    """Run callables, in parallel when workers > 1; results in submission order."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [future.result() for future in futures]


def analyze_map(f: ExprMap, config: Optional[AnalysisConfig] = None) -> AnalysisBundle:
    """
    Run the configured condition battery on a map.

    Square maps get the full battery and a verdict; other maps only get
    per-component conditions and an inconclusive verdict.
    """
    config = config if config is not None else get_config()
    _validate_conditions(config.conditions)
    schedule = RadiusSchedule.from_config(config.schedule)
    wanted = config.conditions
    n = f.n_in
    square = f.n_in == f.n_out
    logger.info(f"Analyzing {f.name}: R^{f.n_in} -> R^{f.n_out}, conditions {wanted}")

    if square and n >= 3:
        combinations = enumerate_combinations(n).filtered(config.combinations)
        subsets = list(combinations)
    else:
        combinations = None
        subsets = [(i + 1,) for i in range(f.n_out)]

    def job(subset: Tuple[int, ...]):
        g = f.select([i - 1 for i in subset])
        if g.n_out == 1:
            return component_reports(g, schedule, config)
        return projection_reports(g, schedule, config)

    per_subset = _run_jobs([lambda s=s: job(s) for s in subsets], config.scan.workers)
    reports: Dict[Tuple[int, ...], List[ConditionReport]] = dict(zip(subsets, per_subset))

    global_reports: List[ConditionReport] = []
    properness = collision = None
    bifurcations: List[BifurcationReport] = []
    if square:
        if "spectral" in wanted:
            global_reports.append(check_spectral(f, config=config))
        if "balreira" in wanted:
            global_reports.append(check_balreira(f, config.balreira_k, schedule, config))
        if "properness" in wanted:
            properness = nonproper_witness_search(f, config=config)
        if "collision" in wanted:
            collision = collision_search(f, config=config)
        verdict = aggregate_verdict(f, reports, properness, config.assert_codim2, collision,
                                    global_reports, combinations)
    else:
        results = [CombinationResult(s, reports[s]) for s in subsets]
        verdict = Verdict(f.name, n, INCONCLUSIVE, STATUS_NOT_SEARCHED, results,
                          gaps=[f"map is not square ({f.n_out}x{f.n_in}): only component conditions evaluated"])
        logger.info(f"Verdict for {f.name}: {INCONCLUSIVE} (not a square map)")

    if "topology" in wanted and n == 2:
        t = config.topology
        for i in range(f.n_out):
            g = f.select([i])
            try:
                bifurcations.append(bifurcation_scan(g, t.levels, t.box, t.grid, config))
            except ValueError as exc:
                logger.error(f"Level curves of {g.name} skipped: {exc}")
                verdict.gaps.append(f"level curves of {g.name} not traced: {exc}")

    return AnalysisBundle(f, verdict, config, bifurcations)


# =============================================================================
# Output Bundle
# =============================================================================

def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text).strip("_")


def write_bundle(bundle: AnalysisBundle, out_dir: str) -> List[str]:
    """Write verdict, reports, scans, witnesses and plots; returns the written paths in order."""
    config = bundle.config
    embedded = config_to_dict(config)
    deterministic = config.deterministic
    for sub in ("reports", "scans", "plots", "level_curves"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    files: List[str] = []

    def emit(path: str, text: str) -> None:
        write_text(path, text)
        files.append(path)

    emit(os.path.join(out_dir, "verdict.json"), bundle.verdict.pack(embedded))
    emit(os.path.join(out_dir, "verdict.txt"), bundle.verdict.summary())

    used = set()
    for report in bundle.reports:
        stem = _slug(f"{report.condition}__{report.target}")
        while stem in used:
            stem += "_"
        used.add(stem)
        emit(os.path.join(out_dir, "reports", f"{stem}.json"), report.pack(embedded))
        if report.witness is not None:
            emit(os.path.join(out_dir, "scans", f"{stem}__witness.csv"), report.witness.to_csv())
        scans = dict(report.scans)
        for part in report.parts:
            for label, scan in part.scans.items():
                scans[f"{label}__{part.target}"] = scan
        for label, scan in scans.items():
            name = _slug(f"{stem}__{label}")
            emit(os.path.join(out_dir, "scans", f"{name}.csv"), scan.to_csv())
            svg = os.path.join(out_dir, "plots", f"{name}.svg")
            plot_scan(scan, svg, f"{report.condition} on {report.target}", deterministic)
            files.append(svg)
        if report.spectral is not None:
            svg = os.path.join(out_dir, "plots", f"{stem}.svg")
            plot_spectrum(report.spectral, svg, f"Spec({report.target})", deterministic)
            files.append(svg)

    properness = bundle.verdict.properness
    if properness is not None:
        for k, found in enumerate(properness.witnesses):
            emit(os.path.join(out_dir, "scans", f"properness__target{k}__witness.csv"), found.witness.to_csv())

    for bifurcation in bundle.bifurcations:
        stem = _slug(bifurcation.function)
        emit(os.path.join(out_dir, "level_curves", f"{stem}__bifurcation.json"), bifurcation.pack())
        for curves in bifurcation.curves:
            name = _slug(f"{stem}__c={curves.level:g}__R={curves.half_width:g}")
            emit(os.path.join(out_dir, "level_curves", f"{name}.csv"), curves.to_csv())
            svg = os.path.join(out_dir, "level_curves", f"{name}.svg")
            plot_level_curves(curves, svg, deterministic)
            files.append(svg)

    logger.info(f"Wrote {len(files)} files to {out_dir}")
    bundle.files = files
    return files


def run_analyze(map_source: Union[str, ExprMap], config: Optional[AnalysisConfig] = None,
                out_dir: Optional[str] = None) -> AnalysisBundle:
    """
    Analyze a map file (or a parsed map) and write the report bundle.

    Args:
        map_source: Path to a DSL file, or an ExprMap
        config: Analysis configuration (default: the global one)
        out_dir: Output directory (default: config.output_dir; "" writes nothing)

    Raises:
        DslSyntaxError, DimensionError, OSError: On input errors
    """
    config = config if config is not None else get_config()
    f = load_map(map_source) if isinstance(map_source, str) else map_source
    bundle = analyze_map(f, config)
    target = config.output_dir if out_dir is None else out_dir
    if target:
        write_bundle(bundle, target)
    return bundle
