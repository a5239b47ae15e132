#!/usr/bin/env python3
"""
Test the analyze and corpus command lines.

Usage:
    pytest test_cli.py
"""

import json
import logging
import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import run_analyze
import run_corpus
from common.formats import ExitCode

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

CORPUS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")

SMALL = {
    "schedule": {"r_min": 1.0, "r_max": 100.0, "points_per_decade": 4},
    "scan": {"starts": 4},
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL), encoding="utf-8")
    return str(path)


def tree(root):
    """Relative path -> bytes for every file under root."""
    found = {}
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as handle:
                found[os.path.relpath(path, root)] = handle.read()
    return found


# =============================================================================
# run_analyze
# =============================================================================

def test_analyze_identity(tmp_path, small_config, capsys):
    out = tmp_path / "identity3"
    code = run_analyze.main(["--map", os.path.join(CORPUS, "identity3.map"), "--config", small_config,
                             "--condition", "palais_smale", "--assert-codim2", "--out", str(out)])
    assert code == ExitCode.OK
    printed = capsys.readouterr().out
    assert "Conclusion: bijective-evidence" in printed
    verdict = (out / "verdict.json").read_text(encoding="utf-8")
    assert '"conclusion": "bijective-evidence"' in verdict
    assert (out / "verdict.txt").exists()
    assert len(os.listdir(out / "reports")) == 3


def test_analyze_outputs_are_reproducible(tmp_path, small_config):
    args = ["--map", os.path.join(CORPUS, "identity2.map"), "--config", small_config,
            "--condition", "palais_smale", "--condition", "integral", "--seed", "11"]
    assert run_analyze.main(args + ["--out", str(tmp_path / "a")]) == ExitCode.OK
    assert run_analyze.main(args + ["--out", str(tmp_path / "b")]) == ExitCode.OK
    first, second = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert sorted(first) == sorted(second)
    assert any(name.endswith(".svg") for name in first)
    for name in first:
        assert first[name] == second[name], name


def test_analyze_inconclusive_only(tmp_path, small_config):
    code = run_analyze.main(["--map", os.path.join(CORPUS, "identity2.map"), "--config", small_config,
                             "--condition", "collision", "--out", ""])
    assert code == ExitCode.INCONCLUSIVE


def test_analyze_input_errors(tmp_path, small_config, capsys):
    empty = tmp_path / "empty.map"
    empty.write_text("# nothing here\n", encoding="utf-8")
    assert run_analyze.main(["--map", str(empty), "--out", ""]) == ExitCode.INPUT_ERROR
    assert "no components defined" in capsys.readouterr().err

    missing = str(tmp_path / "missing.map")
    assert run_analyze.main(["--map", missing, "--out", ""]) == ExitCode.INPUT_ERROR

    identity = os.path.join(CORPUS, "identity2.map")
    assert run_analyze.main(["--map", identity, "--workers", "0", "--out", ""]) == ExitCode.INPUT_ERROR
    assert run_analyze.main(["--map", identity, "--combination", "1,1", "--out", ""]) == ExitCode.INPUT_ERROR
    with pytest.raises(SystemExit):
        run_analyze.main(["--map", identity, "--condition", "not_a_condition"])


# =============================================================================
# run_corpus
# =============================================================================

def write_fixture(root, name, source, sidecar=None):
    (root / f"{name}.map").write_text(source, encoding="utf-8")
    if sidecar is not None:
        (root / f"{name}.expect.json").write_text(json.dumps(sidecar), encoding="utf-8")


def test_corpus_empty_directory(tmp_path, capsys):
    assert run_corpus.main(["--corpus", str(tmp_path)]) == ExitCode.OK
    assert "0 fixtures" in capsys.readouterr().out


def test_corpus_missing_directory(tmp_path):
    assert run_corpus.main(["--corpus", str(tmp_path / "absent")]) == ExitCode.INPUT_ERROR


def test_corpus_match_mismatch_and_skip(tmp_path, capsys):
    config = dict(SMALL, conditions=["palais_smale"])
    write_fixture(tmp_path, "line", "f1 = x1\n", {"conclusion": "inconclusive", "config": config})
    write_fixture(tmp_path, "orphan", "f1 = x1\n")
    assert run_corpus.main(["--corpus", str(tmp_path)]) == ExitCode.OK
    table = capsys.readouterr().out
    assert "match" in table and "skipped" in table

    write_fixture(tmp_path, "flipped", "f1 = x1\n", {"conclusion": "non-injective", "config": config})
    assert run_corpus.main(["--corpus", str(tmp_path)]) == ExitCode.MISMATCH

    write_fixture(tmp_path, "flipped", "f1 = x1\n",
                  {"conclusion": "non-injective", "optional": True, "config": config})
    assert run_corpus.main(["--corpus", str(tmp_path)]) == ExitCode.OK


def test_corpus_writes_bundles(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_fixture(corpus, "identity1", "f1 = x1\n",
                  {"conclusion": "inconclusive", "config": dict(SMALL, conditions=["palais_smale"])})
    out = tmp_path / "out"
    assert run_corpus.main(["--corpus", str(corpus), "--out", str(out)]) == ExitCode.OK
    assert (out / "identity1" / "verdict.json").exists()
