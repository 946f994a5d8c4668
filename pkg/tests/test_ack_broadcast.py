"""Tests for acknowledged broadcast labels and runs."""

import pytest

from radio_labeling.ack_broadcast import (
    AckBits,
    SlotSchedule,
    label_ack_general,
    label_ack_tree,
    predicted_m,
    run_broadcast,
)
from radio_labeling.errors import GraphError, PreconditionError
from radio_labeling.graph_core import (
    Graph,
    complete_graph,
    path_graph,
    random_tree,
    rooted_view,
)
from radio_labeling.radio_sim import RunStatus
from radio_labeling.tn_family import build_tn
from radio_labeling.verify_oracles import check_collision_soundness


def bit_strings(bits):
    return tuple(b.bits() for b in bits)


def test_ack_bits_parse():
    assert AckBits.parse("101") == AckBits(1, 0, 1)
    assert AckBits.parse("111").is_coordinator
    assert AckBits.parse("001").is_acknowledger
    assert AckBits.parse("100").relays
    with pytest.raises(ValueError):
        AckBits.parse("12")


def test_slot_schedule():
    slot = SlotSchedule(colour=3, width=2)
    assert slot.slots == 3
    assert slot.bits() == "11"
    assert [slot.next_slot(rho) for rho in range(0, 7)] == [3, 3, 3, 6, 6, 6, 9]
    with pytest.raises(ValueError):
        SlotSchedule(colour=4, width=2)


def test_label_ack_tree_examples(path3, star3):
    assert bit_strings(label_ack_tree(path3, 0)) == ("111", "100", "001")
    assert bit_strings(label_ack_tree(star3, 0)) == ("111", "001", "000", "000")
    edge = path_graph(2)
    assert bit_strings(label_ack_tree(edge, 1)) == ("001", "111")


def test_label_ack_tree_rejects_cycles(cycle4):
    with pytest.raises(GraphError):
        label_ack_tree(cycle4, 0)


def test_bounded_broadcast_on_path(path3):
    result = run_broadcast(path3, 0, "bounded")
    assert result.m == 2
    assert result.t_done == 6
    assert result.reception_rounds == (0, 1, 2)
    assert result.ack_round == 4
    assert result.trace.status is RunStatus.TERMINATED
    assert result.trace.final_round == 6
    assert all(v in result.trace.acknowledgements for v in range(3))


def test_bounded_broadcast_on_single_edge():
    result = run_broadcast(path_graph(2), 1, "bounded")
    assert result.m == 1
    assert result.t_done == 3
    assert result.reception_rounds == (1, 0)


def test_bounded_broadcast_on_tn():
    g, spec, _ = build_tn(3)
    result = run_broadcast(g, spec.root, "bounded")
    assert result.m == 3
    assert result.t_done == 9
    assert max(result.reception_rounds) == 3


def test_ack_variant_stops_at_acknowledgement(path5):
    result = run_broadcast(path5, 0, "ack")
    assert result.trace.status is RunStatus.STOPPED
    assert result.ack_round == 2 * 4
    assert result.trace.final_round == result.ack_round
    assert result.reception_rounds == (0, 1, 2, 3, 4)


@pytest.mark.parametrize("designated,ack_round", [(2, 4), (1, 3), (None, None)])
def test_designated_acknowledger(path3, designated, ack_round):
    result = run_broadcast(path3, 0, "des", m=2, designated=designated)
    assert result.ack_round == ack_round
    assert result.t_done == 4
    assert result.trace.status is RunStatus.TERMINATED


def test_designated_needs_m(path3):
    with pytest.raises(PreconditionError):
        run_broadcast(path3, 0, "des")
    with pytest.raises(PreconditionError):
        run_broadcast(path3, 0, "gossip")


def test_general_labels_on_complete_graph():
    g = complete_graph(4)
    bits, slots = label_ack_general(g, 0)
    assert bit_strings(bits) == ("111", "001", "100", "100")
    assert [s.colour for s in slots] == [1, 2, 3, 4]
    assert {s.width for s in slots} == {3}
    assert predicted_m(g, 0, slots) == 1 + 7


def test_bounded_broadcast_on_complete_graph():
    g = complete_graph(4)
    result = run_broadcast(g, 0, "bounded")
    assert result.reception_rounds == (0, 1, 1, 1)
    assert result.m == 8
    assert result.ack_round == 9
    assert result.t_done == 24
    assert result.trace.metrics().collisions == 0


@pytest.mark.parametrize(
    "graph",
    [
        complete_graph(4),
        Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]),
        Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]),
    ],
)
def test_general_graph_broadcast_reaches_everyone(graph):
    result = run_broadcast(graph, 0, "bounded")
    assert None not in result.reception_rounds
    assert result.ack_round is not None
    assert result.trace.status is RunStatus.TERMINATED
    check_collision_soundness(graph, result.trace)


@pytest.mark.parametrize("seed", range(10))
def test_tree_broadcast_matches_height(seed):
    tree = random_tree(12, seed)
    result = run_broadcast(tree, 0, "bounded")
    assert result.m == predicted_m(tree, 0, None)
    assert max(result.reception_rounds) == result.m
    assert result.t_done == 3 * result.m


@pytest.mark.parametrize("seed", range(6))
def test_tree_relays_are_the_internal_nodes(seed):
    """Test that every internal node relays and each level hears its parent next."""
    tree = random_tree(14, seed)
    view = rooted_view(tree, 0)
    bits = label_ack_tree(tree, 0)
    for v in range(1, tree.node_count):
        assert bits[v].relays == bool(view.children[v])

    result = run_broadcast(tree, 0, "bounded")
    assert list(result.reception_rounds) == list(view.depth)
    assert result.m == view.height
