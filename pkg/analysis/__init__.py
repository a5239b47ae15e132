"""
Analysis orchestration for the injectivity checker.

Runs the condition battery on a map, writes report bundles and plots,
and replays the fixture corpus against its expectations.
"""

from .runner import (
    AnalysisBundle, analyze_map, component_reports, projection_reports, run_analyze, write_bundle,
)
from .corpus import CorpusSummary, FixtureResult, find_fixtures, load_sidecar, run_corpus, run_fixture
from .plots import plot_level_curves, plot_scan, plot_spectrum

__all__ = [
    'AnalysisBundle', 'analyze_map', 'component_reports', 'projection_reports', 'run_analyze', 'write_bundle',
    'CorpusSummary', 'FixtureResult', 'find_fixtures', 'load_sidecar', 'run_corpus', 'run_fixture',
    'plot_level_curves', 'plot_scan', 'plot_spectrum',
]
