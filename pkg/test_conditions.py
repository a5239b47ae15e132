#!/usr/bin/env python3
"""
Test the condition battery on maps whose behavior at infinity is known.

Usage:
    pytest test_conditions.py
"""

import logging
import math
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.config import AnalysisConfig, ScheduleConfig
from conditions import (
    Outcome, check_balreira, check_integral, check_palais_smale, check_rabier, check_singular_set,
    check_spectral, classify_integral, gradient_scan, infer_fibration, integral_chain, rabier_chain,
)
from expr.parser import load_map, parse_map
from scan import RabierObjective, RadialScan, RadiusSchedule

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

CORPUS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")


def make_config(r_min: float, r_max: float, points_per_decade: int, starts: int = 16) -> AnalysisConfig:
    config = AnalysisConfig()
    config.schedule = ScheduleConfig(r_min, r_max, points_per_decade)
    config.scan.starts = starts
    return config


def fixture(name: str):
    return load_map(os.path.join(CORPUS, f"{name}.map"))


def well_conditioned(n: int, seed: int) -> np.ndarray:
    """Random n x n matrix with singular values in [1, 3]."""
    rng = np.random.default_rng(seed)
    q1, _ = np.linalg.qr(rng.normal(size=(n, n)))
    q2, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q1 @ np.diag(rng.uniform(1.0, 3.0, n)) @ q2


def synthetic_scan(radii: np.ndarray, values: np.ndarray) -> RadialScan:
    points = np.stack([radii, np.zeros_like(radii)], axis=-1)
    return RadialScan("synthetic", "synthetic", radii, values, points, values[:, None],
                      np.ones(len(radii), dtype=int), list(range(len(radii))),
                      np.zeros(len(radii), dtype=int), [None] * len(radii))


# =============================================================================
# Henry King's Function
# =============================================================================

@pytest.fixture(scope="module")
def king():
    config = make_config(10.0, 1.0e5, 8)
    schedule = RadiusSchedule.from_config(config.schedule)
    h = fixture("king").select([0])
    return h, schedule, config, gradient_scan(h, schedule, config)


def test_king_gradient_decays_like_inverse_square(king):
    """m(r) tracks the valley x1 x2 = 2 where |grad h| = 4/r^2."""
    h, schedule, config, scan = king
    beyond = scan.finite & (scan.radii >= 100.0)
    assert np.sum(beyond) >= 20
    assert np.all(scan.values[beyond] * scan.radii[beyond] ** 2 <= 11.0)


def test_king_fails_palais_smale(king):
    h, schedule, config, scan = king
    report = check_palais_smale(h, schedule, config, scan=scan)
    assert report.verdict is Outcome.FAILS
    assert report.witness is not None and len(report.witness) >= 3
    assert report.evidence['band'] <= config.thresholds.bound_band


def test_king_fails_integral(king):
    h, schedule, config, scan = king
    report = check_integral(h, schedule, config, scan=scan)
    assert report.verdict is Outcome.FAILS
    assert report.evidence['alpha'] <= -1.5
    assert math.isfinite(report.evidence['bound'])


def test_king_fails_rabier_with_critical_value_zero(king):
    h, schedule, config, _ = king
    report = check_rabier(h, schedule, config=config)
    assert report.verdict is Outcome.FAILS
    value = np.asarray(report.evidence['asymptotic_critical_value'])
    assert abs(float(value[0])) <= 0.05
    assert report.witness.last_norm >= 1.0e3
    assert report.witness.verify(RabierObjective(h))


def test_king_third_component_is_regular():
    config = make_config(1.0, 1.0e4, 4, starts=8)
    schedule = RadiusSchedule.from_config(config.schedule)
    g = fixture("king").select([2])
    assert check_palais_smale(g, schedule, config).verdict is Outcome.HOLDS


# =============================================================================
# Other Components at Infinity
# =============================================================================

def test_pz_fails_palais_smale_only():
    """Gradient decays like 1/r along the valley x1 x2 = 1, x3 = 0 where g = 0."""
    config = make_config(10.0, 1.0e4, 8)
    schedule = RadiusSchedule.from_config(config.schedule)
    g = fixture("pz").select([0])
    ps = check_palais_smale(g, schedule, config)
    assert ps.verdict is Outcome.FAILS
    assert np.all(np.abs(ps.witness.images[:, 0]) <= 0.1)
    rabier = check_rabier(g, schedule, config=config)
    assert rabier.verdict is Outcome.HOLDS
    rho = rabier.scans['rabier']
    far = rho.finite & (rho.radii >= 100.0)
    assert np.sum(far) >= 16
    assert np.all(rho.values[far] >= 1e-2)


@pytest.mark.parametrize("name, expected, schedule_args", [
    ("king", (Outcome.FAILS, Outcome.FAILS), (10.0, 1.0e5, 8)),
    ("pz", (Outcome.FAILS, Outcome.HOLDS), (10.0, 1.0e4, 8)),
    ("quadratic_shear", (Outcome.HOLDS, Outcome.HOLDS), (1.0, 1.0e4, 4)),
])
def test_verdicts_survive_right_composition(name, expected, schedule_args):
    """PS and Rabier verdicts of g and g o A agree for a well-conditioned A."""
    config = make_config(*schedule_args)
    schedule = RadiusSchedule.from_config(config.schedule)
    A = well_conditioned(3, seed=3)
    assert np.linalg.cond(A) <= 10.0
    g = fixture(name).select([0])
    composed = g.compose_right(A)
    for check, verdict in zip((check_palais_smale, check_rabier), expected):
        assert check(g, schedule, config=config).verdict is verdict
        assert check(composed, schedule, config=config).verdict is verdict


def test_quadratic_shear_components_hold():
    config = make_config(1.0, 1.0e4, 4, starts=8)
    schedule = RadiusSchedule.from_config(config.schedule)
    g = fixture("quadratic_shear").select([0])
    scan = gradient_scan(g, schedule, config)
    assert np.allclose(scan.values, 1.0, atol=1e-6)
    assert check_palais_smale(g, schedule, config, scan=scan).verdict is Outcome.HOLDS
    integral = check_integral(g, schedule, config, scan=scan)
    assert integral.verdict is Outcome.HOLDS
    assert abs(integral.evidence['alpha']) <= 0.1
    assert check_rabier(g, schedule, config=config).verdict is Outcome.HOLDS


def test_rotation_changes_integral_verdict():
    """g = A o f repairs the third component: |grad g3| > 1/2 everywhere."""
    config = make_config(1.0, 1.0e4, 8)
    schedule = RadiusSchedule.from_config(config.schedule)
    f3 = fixture("cone_image").select([2])
    g3 = fixture("cone_image_mixed").select([2])
    assert check_integral(f3, schedule, config).verdict in (Outcome.FAILS, Outcome.INCONCLUSIVE)
    g_scan = gradient_scan(g3, schedule, config)
    assert np.all(g_scan.values[g_scan.finite] >= 0.5 - 1e-9)
    assert check_integral(g3, schedule, config, scan=g_scan).verdict is Outcome.HOLDS


def test_scalar_checks_reject_maps():
    f = fixture("quadratic_shear")
    with pytest.raises(ValueError):
        check_palais_smale(f, RadiusSchedule(1.0, 10.0, 2), make_config(1.0, 10.0, 2))


# =============================================================================
# Integral Classifier
# =============================================================================

def test_classify_divergent_profile():
    radii = RadiusSchedule(1.0, 1.0e4, 16).radii
    outcome, fit, _, evidence = classify_integral(synthetic_scan(radii, 3.0 * np.ones_like(radii)))
    assert outcome is Outcome.HOLDS
    assert fit.alpha == pytest.approx(0.0, abs=1e-9)


def test_classify_convergent_profile_bound():
    """Integral of r^-2 from 1 plus the head term 1 is about 2."""
    radii = RadiusSchedule(1.0, 1.0e4, 16).radii
    outcome, fit, _, evidence = classify_integral(synthetic_scan(radii, radii ** -2.0))
    assert outcome is Outcome.FAILS
    assert fit.alpha == pytest.approx(-2.0, abs=1e-9)
    assert evidence['bound'] == pytest.approx(2.0, abs=0.05)


def test_classify_borderline_profile():
    radii = RadiusSchedule(1.0, 1.0e4, 16).radii
    outcome, _, rationale, _ = classify_integral(synthetic_scan(radii, 1.0 / radii))
    assert outcome is Outcome.INCONCLUSIVE
    assert "too close to -1" in rationale


def test_classify_vanished_profile():
    """e^-r drops below the vanish floor: convergent, bound = head + integral, about 1."""
    radii = RadiusSchedule(0.1, 100.0, 16).radii
    outcome, _, rationale, evidence = classify_integral(synthetic_scan(radii, np.exp(-radii)))
    assert outcome is Outcome.FAILS
    assert evidence['tail'] == 0.0
    assert 30.0 <= evidence['vanished_from'] <= 40.0
    assert evidence['bound'] == pytest.approx(1.0, abs=0.05)

    zeros = np.where(radii > 50.0, 0.0, np.exp(-radii))
    outcome, _, _, evidence = classify_integral(synthetic_scan(radii, zeros))
    assert outcome is Outcome.INCONCLUSIVE
    assert 'vanished_from' not in evidence


def test_classify_short_profile():
    radii = RadiusSchedule(1.0, 10.0, 4).radii
    outcome, fit, _, _ = classify_integral(synthetic_scan(radii, np.ones_like(radii)))
    assert outcome is Outcome.INCONCLUSIVE and not fit.ok


# =============================================================================
# Spectral Condition
# =============================================================================

def test_spectral_fails_on_quadratic_shear():
    """Eigenvalues -x1 + sqrt(x1^2 + 1) enter (0, 1/2) for x1 > 3/4."""
    f = fixture("quadratic_shear")
    report = check_spectral(f, config=AnalysisConfig())
    assert report.verdict is Outcome.FAILS
    assert 0.0 <= report.evidence['bound'] < 0.5
    point = report.evidence['offending_point']
    assert point[0] > 0.75


def test_spectral_holds_on_sqrt_ray():
    f = fixture("sqrt_ray")
    report = check_spectral(f, epsilon=0.5, config=AnalysisConfig())
    assert report.verdict is Outcome.HOLDS
    assert report.spectral.min_distance > AnalysisConfig().thresholds.gap_floor
    assert report.spectral.verify(f)
    # d f1 / d x1 < 0 everywhere, the other two eigenvalues are 1
    assert np.all(np.min(report.spectral.eigenvalues.real, axis=-1) < 0)


def test_spectral_needs_square_map():
    with pytest.raises(ValueError):
        check_spectral(parse_map("f1 = x1 + x2", "plane"), config=AnalysisConfig())


# =============================================================================
# Wedge-Ratio Condition
# =============================================================================

def test_wedge_ratio_holds_for_exponential_map():
    config = make_config(0.01, 50.0, 16)
    schedule = RadiusSchedule.from_config(config.schedule)
    report = check_balreira(fixture("exp_plane"), 1, schedule, config)
    assert report.verdict is Outcome.HOLDS
    part = report.parts[0]
    assert part.target == "exp_plane:i=1"
    assert abs(part.evidence['min_ratio'] - 1.0) <= 1e-9
    assert abs(part.evidence['max_ratio'] - 1.0) <= 1e-9


def test_wedge_ratio_fails_after_rotation():
    """The rotated ratio integrates to sqrt(2) asinh(1), about 1.2465."""
    config = make_config(0.01, 50.0, 16)
    schedule = RadiusSchedule.from_config(config.schedule)
    report = check_balreira(fixture("exp_plane_rotated"), 1, schedule, config)
    assert report.verdict is Outcome.FAILS
    assert 1.2 <= report.evidence['bound'] <= 1.3


def test_wedge_ratio_ignores_disconnected_preimages():
    config = make_config(1.0, 100.0, 8)
    schedule = RadiusSchedule.from_config(config.schedule)
    report = check_balreira(fixture("split_level"), 1, schedule, config)
    assert report.verdict is Outcome.HOLDS
    assert abs(report.parts[0].evidence['min_ratio'] - 1.0) <= 1e-9


def test_wedge_ratio_arguments():
    f = fixture("exp_plane")
    with pytest.raises(ValueError):
        check_balreira(f, 3, RadiusSchedule(1.0, 10.0, 2), make_config(1.0, 10.0, 2))


# =============================================================================
# Sing(g) and Fibrations
# =============================================================================

def test_singular_set_of_sphere_function():
    config = AnalysisConfig()
    g = parse_map("f1 = x1^2 + x2^2 + x3^2 - 1", "bowl")
    report = check_singular_set(g, config)
    assert report.verdict is Outcome.FAILS
    assert np.linalg.norm(report.evidence['argmin']) <= 1e-6


def test_fibration_inferred_for_linear_function():
    config = make_config(1.0, 1.0e3, 4, starts=8)
    schedule = RadiusSchedule.from_config(config.schedule)
    g = fixture("identity3").select([1])
    rabier = check_rabier(g, schedule, config=config)
    singular = check_singular_set(g, config)
    fibration = infer_fibration(rabier, singular)
    assert rabier.holds and singular.holds
    assert fibration.holds and fibration.inferred
    assert fibration.target == "identity3[2]"


def test_fibration_never_fails():
    config = AnalysisConfig()
    g = parse_map("f1 = x1^2 + x2^2 + x3^2 - 1", "bowl")
    singular = check_singular_set(g, config)
    rabier = check_rabier(g, RadiusSchedule(1.0, 100.0, 4), config=make_config(1.0, 100.0, 4, starts=8))
    fibration = infer_fibration(rabier, singular)
    assert fibration.verdict is Outcome.INCONCLUSIVE


# =============================================================================
# Restricted Chains
# =============================================================================

def test_chains_on_coordinate_projection():
    """x2 restricted to the hyperplanes x1 = c keeps unit gradient."""
    config = make_config(1.0, 1.0e3, 4, starts=16)
    schedule = RadiusSchedule.from_config(config.schedule)
    g = parse_map("n = 4; f1 = x1; f2 = x2", "plane4")
    integral = integral_chain(g, schedule, config)
    assert integral.verdict is Outcome.HOLDS
    assert len(integral.parts) == 1 + config.chain.levels_per_depth
    assert any("|G1=" in part.target for part in integral.parts)
    rabier = rabier_chain(g, schedule, config)
    assert rabier.verdict is Outcome.HOLDS
