"""Tests for artifact storage."""

import csv

from radio_labeling.artifacts import METRIC_COLUMNS, ArtifactStore


def test_store_creates_directory(tmp_path):
    """Test that the artifact directory is created on demand."""
    store = ArtifactStore(tmp_path / "nested" / "run")
    assert store.root.is_dir()
    assert store.path("labels.txt") == tmp_path / "nested" / "run" / "labels.txt"


def test_store_labels(tmp_path):
    """Test the node-label text format."""
    target = ArtifactStore(tmp_path).store_labels(["111", "100", "001"])
    assert target.read_text() == "0 111\n1 100\n2 001\n"


def test_store_json_is_deterministic(tmp_path):
    """Test sorted, newline-terminated JSON."""
    store = ArtifactStore(tmp_path)
    first = store.store_json({"b": 1, "a": [1, 2]}, "one.json").read_text()
    second = store.store_json({"a": [1, 2], "b": 1}, "two.json").read_text()
    assert first == second
    assert first.endswith("\n")
    assert store.load_json("one.json") == {"a": [1, 2], "b": 1}


def test_store_metrics(tmp_path):
    """Test the metrics CSV with its fixed columns."""
    store = ArtifactStore(tmp_path)
    rows = [
        {"scenario": "a", "rounds": 10, "unknown": "dropped"},
        {"scenario": "b", "solved": True},
    ]
    target = store.store_metrics(rows)
    with target.open() as handle:
        reader = csv.DictReader(handle)
        assert tuple(reader.fieldnames) == METRIC_COLUMNS
        written = list(reader)
    assert [row["scenario"] for row in written] == ["a", "b"]
    assert written[0]["rounds"] == "10"
    assert written[1]["solved"] == "True"
    assert "unknown" not in written[0]
