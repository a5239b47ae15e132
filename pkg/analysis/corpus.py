"""
Fixture Corpus Regression

Runs every `*.map` fixture under a corpus directory that has an
`<fixture>.expect.json` sidecar and compares the produced verdict and
condition reports against the expectations.

Sidecar fields (all optional):
    conclusion      expected aggregate conclusion
    checks          [{"condition": ..., "target": ..., "verdict": [...]}]
    config          partial configuration overrides for this fixture
    optional        mismatches are reported but do not fail the run
    assert_codim2   assert codim(S_f) >= 2 for this fixture
"""

import copy
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from analysis.runner import AnalysisBundle, run_analyze
from common.config import AnalysisConfig, config_from_dict, get_config
from common.formats import KIND_CORPUS, ExitCode, pack_json, read_text, write_text

logger = logging.getLogger(__name__)

FIXTURE_SUFFIX = ".map"
SIDECAR_SUFFIX = ".expect.json"

# Row statuses
MATCH = "match"
MISMATCH = "mismatch"
SKIPPED = "skipped"
ERROR = "error"


@dataclass
class FixtureResult:
    """One row of the corpus table."""
    fixture: str
    status: str
    expected: Optional[str] = None
    produced: Optional[str] = None
    optional: bool = False
    problems: List[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def fatal(self) -> bool:
        return self.status in (MISMATCH, ERROR) and not self.optional

    def to_dict(self) -> Dict[str, Any]:
        return {
            'fixture': self.fixture,
            'status': self.status,
            'expected': self.expected,
            'produced': self.produced,
            'optional': self.optional,
            'problems': self.problems,
            'seconds': round(self.seconds, 3),
        }


@dataclass
class CorpusSummary:
    root: str
    rows: List[FixtureResult] = field(default_factory=list)

    @property
    def exit_code(self) -> ExitCode:
        return ExitCode.MISMATCH if any(row.fatal for row in self.rows) else ExitCode.OK

    def counts(self) -> Dict[str, int]:
        counts = {MATCH: 0, MISMATCH: 0, SKIPPED: 0, ERROR: 0}
        for row in self.rows:
            counts[row.status] += 1
        return counts

    def table(self) -> str:
        """Fixed-width text table of the rows."""
        header = ("fixture", "status", "expected", "produced", "time")
        cells = [(row.fixture, row.status + (" (optional)" if row.optional and row.status != MATCH else ""),
                  row.expected or "-", row.produced or "-", f"{row.seconds:.1f}s") for row in self.rows]
        widths = [max(len(str(c)) for c in column) for column in zip(header, *cells)]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for row, line in zip(self.rows, cells):
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip())
            lines.extend(f"    {problem}" for problem in row.problems)
        counts = self.counts()
        lines.append("")
        lines.append(f"{len(self.rows)} fixtures: " + ", ".join(f"{v} {k}" for k, v in counts.items()))
        return "\n".join(lines) + "\n"

    def pack(self) -> str:
        return pack_json(KIND_CORPUS, {
            'root': self.root,
            'rows': [row.to_dict() for row in self.rows],
            'counts': self.counts(),
            'exit_code': int(self.exit_code),
        })


def find_fixtures(corpus_dir: str) -> List[str]:
    """All fixture files under corpus_dir, in sorted path order."""
    found = []
    for dirpath, dirnames, filenames in os.walk(corpus_dir):
        dirnames.sort()
        for name in sorted(filenames):
            if name.endswith(FIXTURE_SUFFIX):
                found.append(os.path.join(dirpath, name))
    return found


def sidecar_path(fixture: str) -> str:
    return fixture[:-len(FIXTURE_SUFFIX)] + SIDECAR_SUFFIX


def load_sidecar(path: str) -> Dict[str, Any]:
    """Parse and validate an expectation sidecar."""
    data = json.loads(read_text(path))
    if not isinstance(data, dict):
        raise ValueError(f"Sidecar {path} must hold a JSON object")
    unknown = set(data) - {'conclusion', 'checks', 'config', 'optional', 'assert_codim2', 'description'}
    if unknown:
        raise ValueError(f"Sidecar {path} has unknown keys {sorted(unknown)}")
    for check in data.get('checks', []):
        if not {'condition', 'target', 'verdict'} <= set(check):
            raise ValueError(f"Sidecar {path}: each check needs condition, target and verdict")
        if isinstance(check['verdict'], str):
            check['verdict'] = [check['verdict']]
    return data


def compare(bundle: AnalysisBundle, expect: Dict[str, Any]) -> List[str]:
    """Differences between a produced bundle and its expectations."""
    problems = []
    conclusion = expect.get('conclusion')
    if conclusion is not None and bundle.verdict.conclusion != conclusion:
        problems.append(f"conclusion {bundle.verdict.conclusion} != expected {conclusion}")
    for check in expect.get('checks', []):
        report = bundle.find(check['condition'], check['target'])
        if report is None:
            problems.append(f"no {check['condition']} report on {check['target']}")
        elif report.verdict.value not in check['verdict']:
            problems.append(f"{report.key}: {report.verdict.value} not in {check['verdict']} ({report.rationale})")
    return problems


def run_fixture(fixture: str, base: AnalysisConfig, out_dir: Optional[str] = None,
                name: Optional[str] = None) -> FixtureResult:
    """Analyze one fixture against its sidecar."""
    name = name or os.path.basename(fixture)
    sidecar = sidecar_path(fixture)
    if not os.path.exists(sidecar):
        logger.warning(f"No sidecar for {name}; skipping")
        return FixtureResult(name, SKIPPED, problems=["missing sidecar"])

    started = time.perf_counter()
    try:
        expect = load_sidecar(sidecar)
        config = config_from_dict(expect.get('config', {}), copy.deepcopy(base))
        config.assert_codim2 = bool(expect.get('assert_codim2', base.assert_codim2))
        target = os.path.join(out_dir, os.path.splitext(name)[0]) if out_dir else ""
        bundle = run_analyze(fixture, config, out_dir=target)
    except (OSError, ValueError) as e:
        logger.error(f"{name}: {e}")
        return FixtureResult(name, ERROR, problems=[str(e)], seconds=time.perf_counter() - started)

    problems = compare(bundle, expect)
    optional = bool(expect.get('optional', False))
    result = FixtureResult(name, MISMATCH if problems else MATCH, expect.get('conclusion'),
                           bundle.verdict.conclusion, optional, problems, time.perf_counter() - started)
    if problems:
        level = logging.WARNING if optional else logging.ERROR
        logger.log(level, f"{name}: {len(problems)} mismatches")
    else:
        logger.info(f"{name}: match ({result.seconds:.1f}s)")
    return result


def run_corpus(corpus_dir: str, config: Optional[AnalysisConfig] = None,
               out_dir: Optional[str] = None) -> CorpusSummary:
    """
    Run every fixture of a corpus directory.

    Args:
        corpus_dir: Directory searched recursively for fixtures
        config: Base configuration, overridden per fixture by sidecars
        out_dir: Where to write per-fixture bundles and the summary (None: nowhere)

    Returns:
        CorpusSummary; its exit_code is MISMATCH on any non-optional mismatch
    """
    if not os.path.isdir(corpus_dir):
        raise NotADirectoryError(f"Corpus directory not found: {corpus_dir}")
    base = config if config is not None else get_config()
    summary = CorpusSummary(corpus_dir)
    fixtures = find_fixtures(corpus_dir)
    logger.info(f"Running {len(fixtures)} fixtures from {corpus_dir}")
    for fixture in fixtures:
        name = os.path.relpath(fixture, corpus_dir)
        summary.rows.append(run_fixture(fixture, base, out_dir, name))

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_text(os.path.join(out_dir, "corpus.json"), summary.pack())
        write_text(os.path.join(out_dir, "corpus.txt"), summary.table())
    return summary
