"""Tests for scenario files and their graphs."""

import pytest

from radio_labeling.config import PolicyMode
from radio_labeling.errors import ScenarioError
from radio_labeling.graph_core import format_graph, star_graph
from radio_labeling.scenario import (
    Algorithm,
    GraphKind,
    Scenario,
    build_graph,
    load_scenario,
    prepare,
    resolve_sources,
)


def test_load_scenario(scenario_file):
    """Test loading a complete scenario file."""
    path = scenario_file(
        {
            "name": "kb-star",
            "graph": {"kind": "star", "size": 3},
            "sources": [1, 2],
            "algorithm": "kb",
            "policy": "faithful",
        }
    )
    scenario = load_scenario(path)
    assert scenario.name == "kb-star"
    assert scenario.graph.kind is GraphKind.STAR
    assert scenario.algorithm is Algorithm.KB
    assert scenario.policy is PolicyMode.FAITHFUL
    assert scenario.schema_version == 1
    assert scenario.fast_forward is None


@pytest.mark.parametrize(
    "data",
    [
        {"graph": {"kind": "path", "size": 3}},
        {"graph": {"kind": "path"}, "algorithm": "kb"},
        {"graph": {"kind": "file"}, "algorithm": "kb"},
        {"graph": {"kind": "path", "size": 3}, "algorithm": "tn"},
        {"graph": {"kind": "tn", "size": 3}, "algorithm": "tn", "sources": [0]},
        {"graph": {"kind": "path", "size": 3}, "algorithm": "custom"},
        {"graph": {"kind": "path", "size": 3}, "algorithm": "kb", "horizon": 0},
        {"graph": {"kind": "path", "size": 3}, "algorithm": "kb", "schema_version": 2},
    ],
)
def test_invalid_scenarios(scenario_file, data):
    """Test that inconsistent scenarios are rejected."""
    with pytest.raises(ScenarioError):
        load_scenario(scenario_file(data))


def test_missing_and_malformed_files(tmp_path):
    """Test scenario files that cannot be read."""
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(broken)


@pytest.mark.parametrize(
    "kind,size,nodes",
    [
        ("path", 4, 4),
        ("cycle", 5, 5),
        ("complete", 6, 6),
        ("star", 3, 4),
        ("tn", 4, 10),
        ("random-tree", 9, 9),
        ("random-connected", 7, 7),
    ],
)
def test_build_graph(make_scenario, kind, size, nodes):
    """Test every graph generator a scenario can name."""
    scenario = make_scenario(graph={"kind": kind, "size": size})
    g, spec = build_graph(scenario.graph)
    assert g.node_count == nodes
    assert (spec is not None) == (kind == "tn")


def test_graph_file(make_scenario, tmp_path):
    """Test graphs read from the text format."""
    graph_file = tmp_path / "star.txt"
    graph_file.write_text(format_graph(star_graph(3)))
    scenario = make_scenario(graph={"kind": "file", "path": str(graph_file)})
    assert build_graph(scenario.graph)[0] == star_graph(3)

    missing = make_scenario(graph={"kind": "file", "path": str(tmp_path / "no.txt")})
    with pytest.raises(ScenarioError):
        build_graph(missing.graph)


def test_resolve_sources(make_scenario):
    """Test the three ways of naming sources."""
    assert resolve_sources(make_scenario(), 4).nodes == (0, 1, 2, 3)
    assert resolve_sources(make_scenario(sources=[3, 1]), 4).nodes == (3, 1)
    counted = make_scenario(sources={"count": 2, "seed": 5})
    first = resolve_sources(counted, 10)
    assert first.k == 2
    assert resolve_sources(counted, 10) == first


@pytest.mark.parametrize("sources", [[0, 0], [7], {"count": 9}])
def test_resolve_sources_errors(make_scenario, sources):
    """Test sources that do not fit the graph."""
    with pytest.raises(ScenarioError):
        resolve_sources(make_scenario(sources=sources), 4)


def test_prepare_checks_graph_dependent_fields(make_scenario):
    """Test checks that need the built graph."""
    with pytest.raises(ScenarioError, match="tree"):
        prepare(make_scenario(graph={"kind": "cycle", "size": 4}, algorithm="gossip"))
    with pytest.raises(ScenarioError, match="offsets"):
        prepare(make_scenario(clock_offsets=[0, 1]))
    with pytest.raises(ScenarioError, match="coordinator"):
        prepare(make_scenario(coordinator=9))
    with pytest.raises(ScenarioError, match="graph"):
        prepare(make_scenario(graph={"kind": "cycle", "size": 2}))


def test_prepare(make_scenario):
    """Test a consistent scenario."""
    g, spec, sources = prepare(make_scenario(sources=[1]))
    assert g.node_count == 4
    assert spec is None
    assert sources.tokens == ("mu_1",)
    assert isinstance(make_scenario(), Scenario)
