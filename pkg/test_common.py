#!/usr/bin/env python3
"""
Test configuration loading and the versioned output formats.

Usage:
    pytest test_common.py
"""

import json
import logging
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.config import (
    AnalysisConfig, config_from_dict, config_to_dict, get_config, load_config_file,
    load_config_from_env, set_config,
)
from common.formats import (
    KIND_SCAN, KIND_VERDICT, ExitCode, format_float, pack_csv, pack_json, unpack_csv,
)
from expr.parser import parse_map
from scan import GradientNormObjective, RadialScan, Witness

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)


# =============================================================================
# Configuration
# =============================================================================

def test_defaults():
    config = AnalysisConfig()
    assert config.schedule.r_min == 1.0 and config.schedule.r_max == 1.0e6
    assert config.scan.starts == 32 and config.scan.seed == 1234
    assert config.combinations is None and config.deterministic


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("INJ_SEED", "99")
    monkeypatch.setenv("INJ_R_MAX", "500")
    monkeypatch.setenv("INJ_LOG_LEVEL", "DEBUG")
    config = load_config_from_env(AnalysisConfig())
    assert config.scan.seed == 99
    assert config.schedule.r_max == 500.0
    assert config.log_level == "DEBUG"


def test_partial_overrides(tmp_path):
    path = tmp_path / "overrides.json"
    path.write_text(json.dumps({
        "scan": {"starts": 8},
        "topology": {"escalations": [1, 3], "levels": [0, 2]},
        "combinations": [[1, 3]],
    }), encoding="utf-8")
    config = load_config_file(str(path))
    assert config.scan.starts == 8 and config.scan.seed == 1234
    assert config.topology.escalations == (1, 3)
    assert config.topology.levels == (0.0, 2.0)
    assert config.combinations == [(1, 3)]


@pytest.mark.parametrize("overrides", [{"no_such_key": 1}, {"scan": 5}, {"scan": {"strats": 4}}])
def test_bad_overrides(overrides):
    with pytest.raises(ValueError):
        config_from_dict(overrides)


def test_config_dict_reloads():
    config = AnalysisConfig()
    config.scan.seed = 7
    config.combinations = [(1, 2)]
    reloaded = config_from_dict(config_to_dict(config))
    assert reloaded == config


def test_global_config():
    previous = get_config()
    try:
        custom = AnalysisConfig(balreira_k=2)
        set_config(custom)
        assert get_config() is custom
    finally:
        set_config(previous)


# =============================================================================
# Formats
# =============================================================================

def test_json_header():
    text = pack_json(KIND_VERDICT, {'value': np.float64(0.1), 'bad': float("nan"), 'z': 1 + 2j})
    document = json.loads(text)
    assert document['schema'] == KIND_VERDICT and document['version'] == 1
    assert document['value'] == 0.1 and document['bad'] == "nan" and document['z'] == [1.0, 2.0]


def test_floats_are_exact():
    assert format_float(0.1) == "0.1"
    assert float(format_float(1 / 3)) == 1 / 3
    assert format_float(float("-inf")) == "-inf"


def test_csv_header():
    text = pack_csv(KIND_SCAN, ["r", "value"], [[1.0, 0.5]])
    assert text.splitlines()[0] == "# radial_scan v1"
    assert unpack_csv(text, KIND_SCAN) == (["r", "value"], [["1.0", "0.5"]])
    with pytest.raises(ValueError):
        unpack_csv("r,value\n1.0,0.5\n", KIND_SCAN)


def test_witness_csv_reloads():
    objective = GradientNormObjective(parse_map("f1 = x1^2 + x2^2", "paraboloid"))
    witness = Witness.from_points(objective, [[1.0, 0.0], [0.0, 3.0], [-10.0, 1.0 / 3.0]])
    again = Witness.from_csv(witness.to_csv(), "paraboloid", objective.name)
    assert np.array_equal(again.points, witness.points)
    assert np.array_equal(again.values, witness.values)
    assert again.verify(objective)


def test_scan_csv_reloads():
    scan = RadialScan("o", "m", np.array([1.0, 2.0]), np.array([0.5, np.inf]),
                      np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([[0.1], [0.2]]),
                      np.array([4, 4]), [11, 12], np.array([0, 1]), [None, None])
    again = RadialScan.from_csv(scan.to_csv(), "o", "m")
    assert np.array_equal(again.values, scan.values)
    assert again.seeds == [11, 12] and again.skipped.tolist() == [0, 1]


def test_exit_codes():
    assert [int(c) for c in ExitCode] == [0, 1, 2, 3]
