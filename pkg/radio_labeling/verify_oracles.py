"""Completion checks, indistinguishability demos and label-length reports.

The demos cannot quantify over every deterministic algorithm; they check
the history-equality and non-delivery claims on the program families of
:mod:`radio_labeling.demo_programs` and on the algorithms of this package.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence

from .demo_programs import ProgramFactory
from .errors import InvariantViolation, PreconditionError
from .graph_core import Coloring, Graph, Permutation, complete_graph, cycle_graph
from .messages import LISTEN, Action, Message, SourceSet
from .radio_sim import Trace, histories_equal, run, step
from .symmetry import (
    enumerate_automorphisms,
    is_automorphism,
    preserves,
    tree_path,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompletionReport:
    """Whether a run solved k-broadcast, and when."""
    solved: bool
    completion_round: Optional[int]
    missing: Dict[int, FrozenSet[str]]
    acknowledged: bool
    final_round: int
    status: str

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "solved": self.solved,
            "completion_round": self.completion_round,
            "missing": {str(v): sorted(m) for v, m in sorted(self.missing.items())},
            "acknowledged": self.acknowledged,
            "final_round": self.final_round,
            "status": self.status,
        }


def check_completion(trace: Trace, sources: SourceSet) -> CompletionReport:
    """
    Check that every node ended with every source message.

    The completion round is the round the last message arrived at the
    last node. The run is acknowledged when every source node had
    concluded, with certainty, that all nodes are informed.
    """
    expected = frozenset(sources.tokens)
    missing = {
        v: expected - knowledge
        for v, knowledge in enumerate(trace.final_knowledge)
        if not expected <= knowledge
    }
    solved = not missing
    completion = None
    if solved:
        completion = max(
            trace.acquisitions[v][token]
            for v in range(trace.node_count)
            for token in expected
        )
    acknowledged = solved and all(
        v in trace.acknowledgements for v in sources.nodes
    )
    report = CompletionReport(
        solved=solved,
        completion_round=completion,
        missing=missing,
        acknowledged=acknowledged,
        final_round=trace.final_round,
        status=trace.status.value,
    )
    if not solved:
        logger.warning("%d nodes miss source messages", len(missing))
    return report


def check_collision_soundness(g: Graph, trace: Trace) -> int:
    """
    Replay every recorded round through :func:`step` and compare outcomes.

    Returns:
        Number of rounds replayed

    Raises:
        InvariantViolation: If a recorded reception or collision disagrees
            with the radio rule
    """
    for record in trace.rounds:
        actions = [LISTEN] * g.node_count
        for v, message in record.transmissions:
            actions[v] = Action.transmit(message)
        outcomes = step(g, actions)
        receptions = tuple(
            (v, o.sender, o.received)
            for v, o in enumerate(outcomes)
            if o.received is not None
        )
        if receptions != record.receptions:
            raise InvariantViolation(
                "collision soundness",
                f"round {record.round}: receptions differ from the radio rule",
            )
        collided = tuple(v for v, o in enumerate(outcomes) if o.collided)
        if collided != record.collisions:
            raise InvariantViolation(
                "collision soundness", f"round {record.round}: collisions differ"
            )
    return len(trace.rounds)


def harmful_collisions(trace: Trace, token: str) -> List[int]:
    """Rounds with a collision at a node that did not yet hold ``token``."""
    rounds = []
    for record in trace.rounds:
        for v in record.collisions:
            learned = trace.acquisitions.get(v, {}).get(token)
            if learned is None or learned > record.round:
                rounds.append(record.round)
                break
    return rounds


def _token_renaming(mapping: Mapping[str, str]) -> Callable[[Message], Message]:
    def rename(message: Message) -> Message:
        return message.relabel(mapping)

    return rename


def _assert_history_equal(
    trace: Trace, u: int, v: int, invariant: str, rename: Any = None
) -> None:
    if not histories_equal(trace, u, v, rename=rename):
        rounds = sorted(set(trace.history(u).outcomes) | set(trace.history(v).outcomes))
        first = next(
            t for t in rounds if not histories_equal(trace, u, v, t, rename)
        )
        raise InvariantViolation(invariant, f"nodes {u},{v} diverge at round {first}")


def _holders(trace: Trace, token: str) -> List[int]:
    return [v for v in range(trace.node_count) if token in trace.acquisitions[v]]


def demo_duplicate_labels_kn(
    n: int,
    k: int,
    program: ProgramFactory,
    horizon: int = 1000,
    program_name: str = "custom",
) -> Dict[str, Any]:
    """
    Two sources sharing a label on ``K_n`` never get their messages out.

    Nodes ``0`` and ``1`` are sources with the same label; every other node
    gets a label of its own. Sources are ``0..k-1``.

    Returns:
        Evidence record

    Raises:
        PreconditionError: Unless ``n >= 3`` and ``2 <= k <= n``
        InvariantViolation: If the pair's histories differ or either
            source message reaches another node
    """
    if n < 3 or not 2 <= k <= n:
        raise PreconditionError(f"need n >= 3 and 2 <= k <= n, got n={n}, k={k}")
    g = complete_graph(n)
    labels = [format(v + 1, "b") for v in range(n)]
    labels[1] = labels[0]
    sources = SourceSet.of(range(k))
    tokens = sources.per_node(n)
    programs = [program(labels[v], tokens[v]) for v in range(n)]
    trace = run(g, programs, horizon=horizon)

    # Both sources see exactly the same messages: no renaming.
    _assert_history_equal(trace, 0, 1, "duplicate-label histories")
    for alpha in (0, 1):
        token = sources.token_of(alpha)
        holders = _holders(trace, token)  # type: ignore[arg-type]
        if holders != [alpha]:
            raise InvariantViolation(
                "duplicate-label non-delivery", f"{token} reached nodes {holders}"
            )
    metrics = trace.metrics()
    evidence = {
        "demo": "duplicate-labels-complete-graph",
        "program": program_name,
        "n": n,
        "k": k,
        "horizon": horizon,
        "rounds_checked": trace.final_round,
        "transmissions": metrics.transmissions,
        "collisions": metrics.collisions,
        "history_equal": True,
        "delivered": False,
    }
    logger.info("Duplicate-label demo holds on K_%d with %s", n, program_name)
    return evidence


def demo_four_cycle(
    program: ProgramFactory, horizon: int = 1000, program_name: str = "custom"
) -> Dict[str, Any]:
    """With equal labels on a 4-cycle, node 2 never hears node 0's message."""
    g = cycle_graph(4)
    sources = SourceSet.of([0])
    tokens = sources.per_node(4)
    programs = [program("1", tokens[v]) for v in range(4)]
    trace = run(g, programs, horizon=horizon)
    _assert_history_equal(trace, 1, 3, "four-cycle histories")
    token = sources.tokens[0]
    if token in trace.acquisitions[2]:
        raise InvariantViolation("four-cycle non-delivery", "node 2 got the message")
    return {
        "demo": "four-cycle",
        "program": program_name,
        "horizon": horizon,
        "rounds_checked": trace.final_round,
        "far_node_informed": False,
        "holders": _holders(trace, token),
    }


@dataclass
class SymmetryWitness:
    """Where the message of ``x`` is blocked on its way to ``phi(x)``."""
    x: int
    image: int
    path: List[int]
    case: str
    blocked: List[int] = field(default_factory=list)

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "x": self.x,
            "image": self.image,
            "path": self.path,
            "case": self.case,
            "blocked": self.blocked,
        }


def locate_midpoint(tree: Graph, phi: Permutation, x: int) -> SymmetryWitness:
    """
    Midpoint of the path from ``x`` to ``phi(x)``.

    An odd path has a middle edge whose ends ``phi`` swaps (edge case);
    an even path has a middle node fixed by ``phi`` whose two path
    neighbours ``phi`` swaps (node case).
    """
    path = tree_path(tree, x, phi(x))
    length = len(path) - 1
    if length % 2 == 1:
        a, b = path[length // 2], path[length // 2 + 1]
        if phi(a) != b:
            raise PreconditionError("automorphism does not reverse the path")
        return SymmetryWitness(x, phi(x), path, "edge", [a, b])
    mid = path[length // 2]
    a, b = path[length // 2 - 1], path[length // 2 + 1]
    if phi(mid) != mid or phi(a) != b:
        raise PreconditionError("automorphism does not reverse the path")
    return SymmetryWitness(x, phi(x), path, "node", [a, mid, b])


def _check_blocked(trace: Trace, witness: SymmetryWitness) -> None:
    if witness.case == "edge":
        a, b = witness.blocked
        for record in trace.rounds:
            for receiver, sender, _ in record.receptions:
                if {receiver, sender} == {a, b}:
                    raise InvariantViolation(
                        "midpoint edge", f"{sender}->{receiver} at round {record.round}"
                    )
        return
    a, mid, b = witness.blocked
    for record in trace.rounds:
        for receiver, sender, _ in record.receptions:
            if receiver == mid and sender in (a, b):
                raise InvariantViolation(
                    "midpoint node", f"{sender}->{mid} at round {record.round}"
                )


def find_preserved_automorphism(
    g: Graph, colouring: Coloring
) -> Optional[Permutation]:
    """A non-trivial automorphism preserving ``colouring``, fewest moves first."""
    for p in enumerate_automorphisms(g):
        if not p.is_identity and preserves(p, colouring):
            return p
    return None


def demo_automorphism_histories(
    tree: Graph,
    colouring: Coloring,
    program: ProgramFactory,
    phi: Optional[Permutation] = None,
    horizon: int = 1000,
    sources: Optional[SourceSet] = None,
    program_name: str = "custom",
) -> Dict[str, Any]:
    """
    Symmetric nodes of a non-distinguishing labeling stay indistinguishable.

    Labels are the binary colours. For every node ``x`` the history of
    ``phi(x)`` equals that of ``x`` with each token ``mu_y`` renamed to
    ``mu_phi(y)``, and the message of any moved ``x`` never reaches
    ``phi(x)`` because it cannot cross the midpoint of their path.

    Args:
        tree: Tree network
        colouring: Colouring preserved by ``phi``
        program: Node program factory
        phi: Automorphism; searched for when omitted
        horizon: Rounds simulated
        sources: Sources, all nodes when omitted; must be closed under ``phi``
        program_name: Recorded in the evidence

    Raises:
        PreconditionError: If ``phi`` is not a non-trivial automorphism
            preserving the colouring, or none exists
        InvariantViolation: If a history or non-delivery claim fails
    """
    if not tree.is_tree:
        raise PreconditionError("the automorphism demo runs on trees")
    if phi is None:
        phi = find_preserved_automorphism(tree, colouring)
        if phi is None:
            raise PreconditionError("colouring is distinguishing: nothing to demo")
    valid = is_automorphism(tree, phi) and preserves(phi, colouring)
    if phi.is_identity or not valid:
        raise PreconditionError(
            "phi must be a non-trivial colour-preserving automorphism"
        )
    n = tree.node_count
    sources = sources or SourceSet.everyone(n)
    if {phi(v) for v in sources.nodes} != set(sources.nodes):
        raise PreconditionError("sources must be closed under phi")

    labels = [format(colouring[v], "b") for v in range(n)]
    tokens = sources.per_node(n)
    programs = [program(labels[v], tokens[v]) for v in range(n)]
    trace = run(tree, programs, horizon=horizon)

    mapping = {
        sources.token_of(v): sources.token_of(phi(v)) for v in sources.nodes
    }
    rename = _token_renaming(mapping)  # type: ignore[arg-type]
    for x in range(n):
        _assert_history_equal(trace, x, phi(x), "automorphic histories", rename)

    witnesses = []
    for x in phi.moved:
        witness = locate_midpoint(tree, phi, x)
        _check_blocked(trace, witness)
        token = sources.token_of(x)
        if token is not None and token in trace.acquisitions[phi(x)]:
            raise InvariantViolation(
                "automorphic non-delivery", f"{token} reached node {phi(x)}"
            )
        witnesses.append(witness.to_jsonable())
    evidence = {
        "demo": "automorphism-histories",
        "program": program_name,
        "nodes": n,
        "automorphism": list(phi.mapping),
        "horizon": horizon,
        "rounds_checked": trace.final_round,
        "witnesses": witnesses,
    }
    logger.info("Automorphism demo holds (%d moved nodes)", len(phi.moved))
    return evidence


@dataclass(frozen=True)
class LabelLengthReport:
    """Measured label lengths against declared bounds."""
    max_bits: int
    per_node: List[int]
    bounds: Dict[str, int]

    @property
    def within_bounds(self) -> Dict[str, bool]:
        return {name: self.max_bits <= bound for name, bound in self.bounds.items()}

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "max_bits": self.max_bits,
            "per_node": self.per_node,
            "bounds": self.bounds,
            "within_bounds": self.within_bounds,
        }


def label_length_report(
    labels: Sequence[str], bounds: Optional[Mapping[str, int]] = None
) -> LabelLengthReport:
    """Maximum and per-node label lengths, compared with named bounds."""
    per_node = [len(label) for label in labels]
    return LabelLengthReport(
        max_bits=max(per_node, default=0),
        per_node=per_node,
        bounds=dict(bounds or {}),
    )
