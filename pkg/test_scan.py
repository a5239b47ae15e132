#!/usr/bin/env python3
"""
Test radius schedules, sphere minimization, radial scans and witnesses.

Usage:
    pytest test_scan.py
"""

import logging
import math
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.config import ScanConfig
from expr.parser import load_map, parse_map
from scan import (
    ExprObjective, GradientNormObjective, Objective, ObjectiveUndefinedError, RabierObjective,
    RadiusSchedule, Witness, WedgeRatioObjective, continue_minimum, derive_seed, radial_scan,
    sphere_min, start_points, tail_fit, witness_from_indices,
)

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

CORPUS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")


def paraboloid_scan():
    g = parse_map("f1 = x1^2 + x2^2", "paraboloid")
    objective = GradientNormObjective(g)
    schedule = RadiusSchedule(1.0, 100.0, 4)
    return objective, radial_scan(objective, schedule, starts=4, seed=9, config=ScanConfig(starts=4))


# =============================================================================
# Schedules and Seeds
# =============================================================================

def test_default_schedule():
    schedule = RadiusSchedule()
    assert len(schedule) == 97
    assert schedule.radii[0] == 1.0 and schedule.radii[-1] == 1.0e6
    assert np.all(np.diff(schedule.radii) > 0)
    assert schedule.r_mid == pytest.approx(1.0e3)


@pytest.mark.parametrize("r_min, r_max, ppd", [(0.0, 10.0, 4), (10.0, 1.0, 4), (1.0, 10.0, 0)])
def test_invalid_schedule(r_min, r_max, ppd):
    with pytest.raises(ValueError):
        RadiusSchedule(r_min, r_max, ppd)


def test_derived_seeds():
    seeds = [derive_seed(1234, i) for i in range(50)]
    assert seeds == [derive_seed(1234, i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert derive_seed(1234, 0) != derive_seed(1235, 0)


def test_start_points_on_sphere():
    points = start_points(4, 7.5, 10, seed=42)
    assert np.allclose(np.linalg.norm(points, axis=-1), 7.5)
    # A start never depends on how many others are drawn
    assert np.array_equal(start_points(4, 7.5, 4, seed=42), points[:4])


# =============================================================================
# Sphere Minimization
# =============================================================================

def test_sphere_min_finds_unique_minimum():
    """x1 + x2^2 + x3^2 on |x| = 2 has its minimum -2 at (-2, 0, 0)."""
    g = parse_map("f1 = x1 + x2^2 + x3^2", "tilted")
    result = sphere_min(ExprObjective(g), 2.0, starts=16, seed=5, config=ScanConfig())
    assert result.value == pytest.approx(-2.0, abs=1e-6)
    assert np.allclose(result.point, [-2.0, 0.0, 0.0], atol=1e-2)
    assert np.linalg.norm(result.point) == pytest.approx(2.0)
    assert result.starts == 16 and result.skipped == 0


def test_sphere_min_independent_of_workers():
    g = parse_map("f1 = x1 + x2^2 + x3^2 + x1*x3", "tilted")
    objective = ExprObjective(g)
    reference = sphere_min(objective, 3.0, starts=16, seed=77, config=ScanConfig(workers=1))
    for workers in range(2, 9):
        result = sphere_min(objective, 3.0, starts=16, seed=77, config=ScanConfig(workers=workers))
        assert abs(result.value - reference.value) <= 1e-12 * (1 + abs(reference.value))
        assert np.allclose(result.point, reference.point, rtol=0, atol=1e-9)


def test_sphere_min_warm_start():
    g = parse_map("f1 = x1 + x2^2 + x3^2", "tilted")
    result = sphere_min(ExprObjective(g), 2.0, starts=2, seed=5, config=ScanConfig(),
                        warm_start=np.array([-1.0, 0.1, 0.0]))
    assert result.warm_value is not None
    assert result.value == pytest.approx(-2.0, abs=1e-6)


def test_sphere_min_several_warm_rows():
    """Unusable rows are dropped; the first usable row reports warm_value."""
    g = parse_map("f1 = x1 + x2^2 + x3^2", "tilted")
    rows = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [np.nan, 1.0, 0.0], [-1.0, 0.1, 0.0]])
    result = sphere_min(ExprObjective(g), 2.0, starts=1, seed=5, config=ScanConfig(), warm_start=rows)
    assert result.warm_value == pytest.approx(math.sqrt(2.0) + 2.0)
    assert result.value == pytest.approx(-2.0, abs=1e-6)


def test_sphere_min_undefined_objective():
    g = parse_map("f1 = sqrt(-x1^2 - 1)", "nowhere")
    with pytest.raises(ObjectiveUndefinedError):
        sphere_min(ExprObjective(g), 1.0, starts=4, seed=1, config=ScanConfig())
    with pytest.raises(ValueError):
        sphere_min(ExprObjective(g), 0.0, starts=4, seed=1, config=ScanConfig())


# =============================================================================
# Objectives
# =============================================================================

def test_analytic_gradients_match_central_differences():
    rng = np.random.default_rng(8)
    X = rng.uniform(-2, 2, size=(40, 3))
    g = parse_map("f1 = x1*x2 + x3^3 - x1^2*x3", "cubic")
    pair = parse_map("f1 = x1 + x2*x3; f2 = x2 - x1^2 + x3", "pair")
    for objective in (GradientNormObjective(g), RabierObjective(g), RabierObjective(pair)):
        value, G = objective.gradients(X)
        _, estimate = Objective.gradients(objective, X)
        assert np.allclose(value, objective.values(X))
        assert np.max(np.abs(G - estimate) / (1 + np.abs(G))) <= 1e-4


def test_rabier_profile_of_scalar_function():
    g = parse_map("f1 = x1^2 + x2^2", "paraboloid")
    X = np.array([[3.0, 4.0]])
    assert RabierObjective(g).values(X)[0] == pytest.approx(5.0 * 10.0)


def test_wedge_ratio_of_identity():
    f = parse_map("f1 = x1; f2 = x2; f3 = x3", "identity3")
    X = np.random.default_rng(0).normal(size=(5, 3))
    for index in range(3):
        assert np.allclose(WedgeRatioObjective(f, index).values(X), 1.0)
    with pytest.raises(ValueError):
        WedgeRatioObjective(f, 3)


# =============================================================================
# Radial Scans and Tail Fits
# =============================================================================

def test_radial_scan_profile():
    objective, scan = paraboloid_scan()
    assert len(scan.radii) == 9 and scan.failed == 0
    assert np.allclose(scan.values, 2.0 * scan.radii)
    assert np.allclose(np.linalg.norm(scan.points, axis=-1), scan.radii)
    assert scan.map_name == "paraboloid"
    assert scan.seeds == [derive_seed(9, i) for i in range(9)]


def test_tail_fit_recovers_exponent():
    _, scan = paraboloid_scan()
    fit = tail_fit(scan, window=2.0, min_points=8)
    assert fit.ok
    assert fit.alpha == pytest.approx(1.0, abs=1e-6)
    assert fit.constant == pytest.approx(2.0, rel=1e-5)


def test_tail_fit_needs_enough_points():
    g = parse_map("f1 = x1^2 + x2^2", "paraboloid")
    scan = radial_scan(GradientNormObjective(g), RadiusSchedule(1.0, 10.0, 4), starts=2, seed=1,
                       config=ScanConfig(starts=2))
    fit = tail_fit(scan, window=2.0, min_points=8)
    assert not fit.ok and fit.points == 5


# =============================================================================
# Continuation Along Valleys
# =============================================================================

def test_continuation_follows_narrow_valley():
    """|grad g| of the PS counterexample stays 1/t along (t, 1/t, 0) out to r = 1000."""
    objective = GradientNormObjective(load_map(os.path.join(CORPUS, "pz.map")))
    start = np.array([10.0, 0.1, 0.0])
    before = np.array([9.5, 1.0 / 9.5, 0.0])
    r_from = float(np.linalg.norm(start))
    point = continue_minimum(objective, start, r_from, 1000.0, ScanConfig(),
                             (float(np.linalg.norm(before)), before))
    assert point is not None
    assert np.linalg.norm(point) == pytest.approx(1000.0)
    value = float(objective.values(point[None, :])[0])
    assert 0.5 <= value * 1000.0 <= 2.0
    assert abs(float(objective.image(point[None, :])[0, 0])) <= 0.1


def test_continuation_rejects_degenerate_input():
    objective = GradientNormObjective(parse_map("f1 = x1^2 + x2^2", "paraboloid"))
    assert continue_minimum(objective, np.zeros(2), 1.0, 2.0) is None
    assert continue_minimum(objective, np.array([1.0, 0.0]), 0.0, 2.0) is None


def test_radial_scan_keeps_valley_of_ps_counterexample():
    objective = GradientNormObjective(load_map(os.path.join(CORPUS, "pz.map")))
    schedule = RadiusSchedule(10.0, 1.0e4, 8)
    scan = radial_scan(objective, schedule, starts=16, seed=1234, config=ScanConfig(starts=16))
    assert scan.failed == 0
    far = scan.radii >= 100.0
    assert np.all(scan.values[far] * scan.radii[far] <= 2.0)


# =============================================================================
# Witnesses
# =============================================================================

def test_witness_replays():
    objective, scan = paraboloid_scan()
    witness = witness_from_indices(scan, range(len(scan.radii)))
    assert len(witness) == 9
    assert witness.last_norm == pytest.approx(100.0)
    assert witness.verify(objective)


def test_witness_from_points():
    objective, _ = paraboloid_scan()
    witness = Witness.from_points(objective, [[1.0, 0.0], [0.0, 3.0], [-10.0, 0.0]])
    assert np.allclose(witness.values, [2.0, 6.0, 20.0])
    assert witness.verify(objective)
    tampered = Witness(witness.map_name, witness.objective, witness.points,
                       witness.values * 1.01, witness.images)
    assert not tampered.verify(objective)


def test_witness_norms_must_increase():
    with pytest.raises(ValueError):
        Witness("m", "o", [[2.0, 0.0], [1.0, 0.0]], [0.0, 0.0], [[0.0], [0.0]])
