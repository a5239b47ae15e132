#!/usr/bin/env python3
"""
Replay every corpus fixture against its expectation sidecar.

Usage:
    pytest test_regression.py
"""

import logging
import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from analysis.corpus import MATCH, find_fixtures, load_sidecar, run_fixture, sidecar_path
from common.config import AnalysisConfig

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

CORPUS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")

FIXTURES = [f for f in find_fixtures(CORPUS) if not load_sidecar(sidecar_path(f)).get('optional')]


def test_every_fixture_has_a_valid_sidecar():
    assert len(FIXTURES) >= 10
    for fixture in FIXTURES:
        expect = load_sidecar(sidecar_path(fixture))
        assert expect.get('conclusion') or expect.get('checks'), fixture


@pytest.mark.parametrize("fixture", FIXTURES, ids=lambda path: os.path.basename(path)[:-4])
def test_fixture_matches(fixture):
    result = run_fixture(fixture, AnalysisConfig())
    logger.info(f"{result.fixture}: {result.status} in {result.seconds:.1f}s")
    assert result.status == MATCH, result.problems
