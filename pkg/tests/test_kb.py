"""Tests for the KB labeling scheme and k-broadcast runs."""

import math
import random

import pytest

from radio_labeling.errors import PreconditionError
from radio_labeling.graph_core import (
    complete_graph,
    distance_two_coloring,
    path_graph,
    random_connected_graph,
    random_tree,
    star_graph,
)
from radio_labeling.kb import choose_coordinator, kb_label_bound, labeling_kb, run_kb
from radio_labeling.messages import SourceSet
from radio_labeling.radio_sim import RunStatus
from radio_labeling.verify_oracles import check_collision_soundness, check_completion


def assert_solved(g, sources, **kwargs):
    scheme, trace = run_kb(g, sources, **kwargs)
    report = check_completion(trace, sources)
    assert report.solved, report.missing
    assert report.acknowledged
    assert trace.status is RunStatus.TERMINATED
    check_collision_soundness(g, trace)
    return scheme, trace


def test_choose_coordinator():
    assert choose_coordinator(4, SourceSet.of([1, 2])) == 0
    assert choose_coordinator(4, SourceSet.of([0, 2])) == 1
    assert choose_coordinator(3, SourceSet.everyone(3)) == 0


def test_kb_label_bound():
    assert kb_label_bound(0, 1, None, None) == 5
    assert kb_label_bound(0, 5, None, 3) == 4 + 3 + 3
    assert kb_label_bound(1, 9, 4, None) == 7
    with pytest.raises(PreconditionError):
        kb_label_bound(1, 9, None, None)


def test_labels_on_complete_graph_with_two_sources():
    g = complete_graph(8)
    scheme = labeling_kb(g, SourceSet.of([0, 1]))
    assert scheme.strat == 0
    assert scheme.coordinator == 2
    assert not scheme.tree_mode
    assert [label.sched for label in scheme.labels[:3]] == ["1", "10", "0"]
    assert scheme.labels[2].ack.is_coordinator
    assert scheme.max_length == scheme.declared_bound() == 4 + 2 + 4


def test_labels_on_star_with_every_node_a_source(star3):
    scheme = labeling_kb(star3, SourceSet.everyone(4))
    assert scheme.strat == 1
    assert scheme.tree_mode
    assert scheme.colour_count == 4
    assert [label.sched for label in scheme.labels] == ["001", "010", "011", "100"]
    assert all(len(label) == 7 for label in scheme.labels)
    assert scheme.declared_bound() == 7


def test_label_bits_layout(path3):
    scheme = labeling_kb(path3, SourceSet.of([2]))
    assert [label.bits() for label in scheme.labels] == ["01110", "01000", "00011"]


def test_strategy_switches_at_max_degree():
    g = star_graph(3)
    assert labeling_kb(g, SourceSet.of([1, 2, 3])).strat == 0
    assert labeling_kb(g, SourceSet.of([0, 1, 2, 3])).strat == 1


@pytest.mark.parametrize("k", [1, 2, 4])
def test_kb_on_paths(k):
    g = path_graph(6)
    sources = SourceSet.of(range(k))
    scheme, trace = assert_solved(g, sources)
    assert scheme.strat == (0 if k <= 2 else 1)


@pytest.mark.parametrize("n,k", [(3, 1), (3, 3), (5, 2), (5, 5), (6, 4)])
def test_kb_on_complete_graphs(n, k):
    g = complete_graph(n)
    scheme, _ = assert_solved(g, SourceSet.of(range(k)))
    assert scheme.max_length == scheme.declared_bound()


@pytest.mark.slow
@pytest.mark.parametrize("n", range(3, 33))
def test_kb_on_larger_complete_graphs(n):
    """Test KB on K_n for every number of sources."""
    g = complete_graph(n)
    for k in range(1, n + 1):
        scheme, _ = assert_solved(g, SourceSet.of(range(k)))
        assert scheme.max_length == scheme.declared_bound()


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_kb_on_seeded_connected_graphs(seed):
    """Test KB on random connected graphs up to 40 nodes."""
    n = 2 + (seed * 7) % 39
    g = random_connected_graph(n, seed, extra_edges=n // 2)
    rng = random.Random(seed)
    for k in sorted({1, 2, math.ceil(n / 2), n}):
        sources = SourceSet.of(rng.sample(range(n), k))
        scheme, _ = assert_solved(g, sources)
        assert scheme.max_length <= scheme.declared_bound()


@pytest.mark.parametrize("seed", range(8))
def test_kb_on_random_trees(seed):
    tree = random_tree(10, seed)
    sources = SourceSet.of(range(seed % 10, 10, 3))
    scheme, trace = assert_solved(tree, sources)
    assert scheme.max_length == scheme.declared_bound()


@pytest.mark.parametrize("seed", range(6))
def test_kb_on_random_graphs(seed):
    g = random_connected_graph(9, seed, extra_edges=4)
    sources = SourceSet.of([0, 4, 8])
    scheme, _ = assert_solved(g, sources)
    if scheme.strat == 1:
        assert scheme.colour_count == distance_two_coloring(g).color_count


def test_kb_with_every_node_a_source():
    g = random_connected_graph(7, 11, extra_edges=3)
    assert_solved(g, SourceSet.everyone(7))


def test_kb_with_source_coordinator():
    g = complete_graph(4)
    scheme, _ = assert_solved(g, SourceSet.of([0, 1]), coordinator=0)
    assert scheme.coordinator == 0


def test_kb_horizon_exhaustion(path5):
    _, trace = run_kb(path5, SourceSet.of([4]), horizon=5)
    assert trace.status is RunStatus.EXHAUSTED
    assert not check_completion(trace, SourceSet.of([4])).solved
