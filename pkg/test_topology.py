#!/usr/bin/env python3
"""
Test planar level-curve tracing and the bifurcation scan.

Usage:
    pytest test_topology.py
"""

import logging
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.config import AnalysisConfig
from expr.parser import parse_map
from topology import CELL_TABLE, bifurcation_scan, sample_grid, trace_level_curve

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)


# =============================================================================
# Tracing
# =============================================================================

def test_two_lines_of_exponential_family():
    """e^x1 (1 - x2^2) = 0 is the pair of lines x2 = +-1."""
    q = parse_map("f1 = exp(x1)*(1 - x2^2)", "q")
    curves = trace_level_curve(q, 0.0, 5.0, 1024, AnalysisConfig())
    assert curves.components == 2
    assert curves.clipped == 2 and curves.closed == 0
    vertices = curves.vertices()
    assert np.allclose(np.abs(vertices[:, 1]), 1.0, atol=1e-4)
    assert curves.max_vertex_residual(q) <= curves.cell_bound


def test_circle_is_one_closed_curve():
    g = parse_map("f1 = x1^2 + x2^2", "bowl")
    curves = trace_level_curve(g, 4.0, 5.0, 128, AnalysisConfig())
    assert curves.components == 1 and curves.closed == 1
    radii = np.linalg.norm(curves.vertices(), axis=-1)
    step = 10.0 / 127
    assert np.all(np.abs(radii - 2.0) <= step)
    assert curves.max_vertex_residual(g) <= curves.cell_bound
    # Closed curves start at their leftmost vertex
    first = curves.polylines[0].vertices[0]
    assert first[0] == pytest.approx(np.min(curves.vertices()[:, 0]))


def test_saddle_cell_is_resolved():
    g = parse_map("f1 = x1*x2", "saddle")
    curves = trace_level_curve(g, 0.0, 3.0, 64, AnalysisConfig())
    assert curves.saddle_cells == 1
    assert curves.components == 2 and curves.clipped == 2


def test_empty_level():
    g = parse_map("f1 = x1^2 + x2^2", "bowl")
    curves = trace_level_curve(g, -1.0, 5.0, 64, AnalysisConfig())
    assert curves.components == 0
    assert curves.vertices().shape == (0, 2)
    assert curves.max_vertex_residual(g) == 0.0


def test_tracing_arguments():
    g = parse_map("f1 = x1 + x2", "plane")
    with pytest.raises(ValueError):
        trace_level_curve(g, 0.0, 1.0, 63, AnalysisConfig())
    with pytest.raises(ValueError):
        trace_level_curve(parse_map("f1 = x1; f2 = x2", "pair"), 0.0, 1.0, 64, AnalysisConfig())
    with pytest.raises(ValueError):
        trace_level_curve(parse_map("f1 = x1 + x2 + x3", "space"), 0.0, 1.0, 64, AnalysisConfig())
    with pytest.raises(ValueError):
        trace_level_curve(parse_map("f1 = sqrt(x1) + x2", "half"), 0.0, 1.0, 64, AnalysisConfig())


def test_grid_sampling_independent_of_workers():
    g = parse_map("f1 = exp(x1)*x2 + x1^3", "wave")
    axis = np.linspace(-2.0, 2.0, 101)
    reference = sample_grid(g, axis, workers=1)
    assert reference[3, 7] == pytest.approx(np.exp(axis[3]) * axis[7] + axis[3] ** 3)
    for workers in (2, 3, 8):
        assert np.array_equal(sample_grid(g, axis, workers=workers), reference)


def test_cell_table_covers_every_case():
    assert len(CELL_TABLE) == 16
    saddles = [index for index, (saddle, _) in enumerate(CELL_TABLE) if saddle]
    assert saddles == [5, 10]


# =============================================================================
# Bifurcation Scan
# =============================================================================

def test_no_jumps_for_linear_function():
    g = parse_map("f1 = x1 + 2*x2", "plane")
    report = bifurcation_scan(g, [1.0, -1.0, 0.0], 2.0, 64, AnalysisConfig())
    assert report.levels == [-1.0, 0.0, 1.0]
    assert report.half_widths == [2.0, 4.0, 8.0]
    assert report.counts == [[1, 1, 1]] * 3
    assert not report.suspected_atypical
    assert len(report.curves) == 9


def test_jump_persists_at_every_box():
    g = parse_map("f1 = x1^2 + x2^2", "bowl")
    report = bifurcation_scan(g, [-1.0, 1.0], 3.0, 64, AnalysisConfig())
    assert report.counts == [[0, 1]] * 3
    assert report.jumps == [(-1.0, 1.0)]
    data = report.to_dict()
    assert data['suspected_atypical'] is True and data['heuristic'] is True
