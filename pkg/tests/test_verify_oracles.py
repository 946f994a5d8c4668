"""Tests for completion checks, impossibility demos and label reports."""

from dataclasses import replace

import pytest

from radio_labeling.ack_broadcast import RELAY
from radio_labeling.demo_programs import (
    ALGORITHM_FAMILIES,
    PROGRAM_FAMILIES,
    AllTransmit,
    FloodOnReceive,
    ack_role,
    gossip_from_label,
    kb_from_label,
    tn_from_label,
)
from radio_labeling.errors import InvariantViolation, PreconditionError
from radio_labeling.graph_core import (
    Coloring,
    Graph,
    Permutation,
    bfs_distances,
    center,
    enumerate_trees,
    path_graph,
    star_graph,
)
from radio_labeling.messages import SourceSet
from radio_labeling.primes import FaithfulPrime
from radio_labeling.radio_sim import run
from radio_labeling.tn_family import TnLabel
from radio_labeling.verify_oracles import (
    check_collision_soundness,
    check_completion,
    demo_automorphism_histories,
    demo_duplicate_labels_kn,
    demo_four_cycle,
    find_preserved_automorphism,
    harmful_collisions,
    label_length_report,
    locate_midpoint,
)


def layer_colouring(tree: Graph) -> Coloring:
    """Colour by distance to the centre; every automorphism preserves it."""
    middle = center(tree)
    distances = [bfs_distances(tree, c) for c in middle]
    return Coloring(
        tuple(min(d[v] for d in distances) + 1 for v in range(tree.node_count))
    )


def symmetric_trees():
    for n in range(3, 8):
        for tree in enumerate_trees(n):
            if find_preserved_automorphism(tree, layer_colouring(tree)) is not None:
                yield tree


def test_check_completion(path5):
    sources = SourceSet.of([0])
    programs = [FloodOnReceive("1", sources.token_of(v)) for v in range(5)]
    trace = run(path5, programs, horizon=20)
    report = check_completion(trace, sources)
    assert report.solved
    assert report.completion_round == 4
    assert not report.acknowledged
    assert report.to_jsonable()["missing"] == {}


def test_check_completion_reports_missing(path3):
    sources = SourceSet.everyone(3)
    programs = [AllTransmit("1", sources.token_of(v)) for v in range(3)]
    trace = run(path3, programs, horizon=5)
    report = check_completion(trace, sources)
    assert not report.solved
    assert report.completion_round is None
    assert report.missing[0] == frozenset({"mu_1", "mu_2"})
    assert harmful_collisions(trace, "mu_0") == []


def test_harmful_collisions(star3):
    sources = SourceSet.of([1, 2])
    programs = [FloodOnReceive("1", sources.token_of(v)) for v in range(4)]
    trace = run(star3, programs, horizon=10)
    assert harmful_collisions(trace, "mu_1") == [1]
    assert check_collision_soundness(star3, trace) == len(trace.rounds)


def test_collision_soundness_detects_tampering(path3):
    programs = [FloodOnReceive("1", "mu_0" if v == 0 else None) for v in range(3)]
    trace = run(path3, programs, horizon=10)
    trace.rounds[0] = replace(trace.rounds[0], receptions=())
    with pytest.raises(InvariantViolation):
        check_collision_soundness(path3, trace)


@pytest.mark.parametrize("program", sorted(PROGRAM_FAMILIES))
@pytest.mark.parametrize("n", range(3, 9))
def test_duplicate_labels_demo(program, n):
    for k in (2, n):
        evidence = demo_duplicate_labels_kn(
            n, k, PROGRAM_FAMILIES[program], horizon=200, program_name=program
        )
        assert evidence["history_equal"]
        assert not evidence["delivered"]
        assert evidence["rounds_checked"] == 200


def test_algorithm_families_are_registered():
    assert set(ALGORITHM_FAMILIES) <= set(PROGRAM_FAMILIES)


def test_algorithm_factories_decode_demo_labels():
    assert ack_role("1").is_coordinator
    assert ack_role("10") == RELAY

    kb = kb_from_label("101", "mu_3")
    assert kb.kb_label.strat == 0
    assert kb.kb_label.sched == "101"
    assert kb.kb_label.slot is None
    assert kb.source == "mu_3"

    gossip = gossip_from_label("11", None)
    assert gossip.gossip_label.colour == 3
    assert isinstance(gossip.policy, FaithfulPrime)

    roles = [tn_from_label(label).role for label in ("1", "10", "11", "100")]
    assert roles == [TnLabel.LEAF, TnLabel.LAST_LEAF, TnLabel.CENTRE, TnLabel.RELAY]


@pytest.mark.parametrize("program", ALGORITHM_FAMILIES)
@pytest.mark.parametrize("n", [3, 4, 7])
def test_duplicate_labels_demo_on_algorithms(program, n):
    """Test that the packaged algorithms act and still keep the pair silent."""
    evidence = demo_duplicate_labels_kn(
        n, 2, PROGRAM_FAMILIES[program], horizon=300, program_name=program
    )
    assert evidence["program"] == program
    assert evidence["transmissions"] > 0
    assert not evidence["delivered"]


@pytest.mark.parametrize("n,k", [(2, 2), (4, 1), (4, 5)])
def test_duplicate_labels_demo_preconditions(n, k):
    with pytest.raises(PreconditionError):
        demo_duplicate_labels_kn(n, k, AllTransmit)


@pytest.mark.parametrize("program", sorted(PROGRAM_FAMILIES))
def test_four_cycle_demo(program):
    evidence = demo_four_cycle(PROGRAM_FAMILIES[program], horizon=100)
    assert not evidence["far_node_informed"]
    assert 2 not in evidence["holders"]


def test_locate_midpoint():
    path4 = path_graph(4)
    witness = locate_midpoint(path4, Permutation((3, 2, 1, 0)), 0)
    assert witness.case == "edge"
    assert witness.blocked == [1, 2]
    witness = locate_midpoint(path_graph(3), Permutation((2, 1, 0)), 0)
    assert witness.case == "node"
    assert witness.blocked == [0, 1, 2]
    witness = locate_midpoint(star_graph(3), Permutation((0, 2, 1, 3)), 1)
    assert witness.path == [1, 0, 2]


def test_find_preserved_automorphism(star3, asymmetric_tree):
    phi = find_preserved_automorphism(star3, Coloring((1, 1, 1, 2)))
    assert phi is not None and phi.moved == (1, 2)
    assert find_preserved_automorphism(star3, Coloring((1, 2, 3, 4))) is None
    assert find_preserved_automorphism(asymmetric_tree, Coloring.uniform(7)) is None


def test_automorphism_demo_count():
    assert len(list(symmetric_trees())) >= 20


@pytest.mark.parametrize("program", sorted(PROGRAM_FAMILIES))
def test_automorphism_demo_on_symmetric_trees(program):
    for tree in symmetric_trees():
        evidence = demo_automorphism_histories(
            tree,
            layer_colouring(tree),
            PROGRAM_FAMILIES[program],
            horizon=64,
            program_name=program,
        )
        assert evidence["witnesses"]
        assert evidence["program"] == program


def test_automorphism_demo_rejects_distinguishing_colourings(path3, cycle4):
    with pytest.raises(PreconditionError):
        demo_automorphism_histories(path3, Coloring((1, 1, 2)), FloodOnReceive)
    with pytest.raises(PreconditionError):
        demo_automorphism_histories(
            path3, Coloring((1, 1, 1)), FloodOnReceive, phi=Permutation((1, 0, 2))
        )
    with pytest.raises(PreconditionError):
        demo_automorphism_histories(cycle4, Coloring.uniform(4), FloodOnReceive)


def test_automorphism_demo_needs_closed_sources(path3):
    with pytest.raises(PreconditionError):
        demo_automorphism_histories(
            path3, Coloring.uniform(3), FloodOnReceive, sources=SourceSet.of([0])
        )


def test_label_length_report():
    report = label_length_report(["11", "0", "101"], {"kb": 3, "tight": 2})
    assert report.max_bits == 3
    assert report.per_node == [2, 1, 3]
    assert report.within_bounds == {"kb": True, "tight": False}
    assert report.to_jsonable()["within_bounds"]["kb"]
    assert label_length_report([]).max_bits == 0


@pytest.mark.slow
@pytest.mark.parametrize("program", sorted(PROGRAM_FAMILIES))
def test_demos_over_a_thousand_rounds(program):
    """Test every demo over 1000 rounds with each program family."""
    factory = PROGRAM_FAMILIES[program]
    for n in range(3, 9):
        for k in (2, n):
            evidence = demo_duplicate_labels_kn(
                n, k, factory, horizon=1000, program_name=program
            )
            assert evidence["rounds_checked"] == 1000
            assert not evidence["delivered"]

    evidence = demo_four_cycle(factory, horizon=1000, program_name=program)
    assert not evidence["far_node_informed"]

    for tree in symmetric_trees():
        evidence = demo_automorphism_histories(
            tree, layer_colouring(tree), factory, horizon=1000, program_name=program
        )
        assert evidence["witnesses"]
