"""The triangular trees T_n and their two-bit gossip algorithm.

``T_n`` has a centre ``r`` and, for every ``i`` in ``2..x``, a path of
length ``i`` hanging off ``r`` whose far end is the leaf ``l_i``. Since
the paths have pairwise different lengths, their gather waves reach ``r``
in different rounds and never collide there.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .errors import InvariantViolation, PreconditionError
from .graph_core import Graph
from .messages import LISTEN, Action, Message, SourceSet
from .radio_sim import NodeProgram, Trace, run

logger = logging.getLogger(__name__)

INIT = "init"
GATHER = "gather"
SPREAD = "spread"

TN_LABEL_BITS = 2


class TnLabel(str, Enum):
    """Two-bit T_n labels."""
    CENTRE = "11"
    LEAF = "01"
    LAST_LEAF = "10"
    RELAY = "00"


@dataclass(frozen=True)
class TnSpec:
    """
    Node roles of ``T_n``.

    Attributes:
        x: Number of the longest path; ``n = x(x+1)/2``
        paths: ``paths[i]`` lists the nodes of ``P_i`` by distance from ``r``
    """
    x: int
    paths: Dict[int, Tuple[int, ...]]
    root: int = 0

    @property
    def n(self) -> int:
        return self.x * (self.x + 1) // 2

    def leaf(self, i: int) -> int:
        return self.paths[i][-1]

    def position(self, v: int) -> Tuple[int, int]:
        """``(i, j)``: node ``v`` sits at distance ``j`` from ``r`` on ``P_i``."""
        for i, path in self.paths.items():
            if v in path:
                return i, path.index(v) + 1
        raise PreconditionError(f"node {v} is not on a path of T_n")


def build_tn(x: int) -> Tuple[Graph, TnSpec, Tuple[TnLabel, ...]]:
    """
    Build ``T_n`` for ``n = x(x+1)/2`` with its labels.

    Node 0 is ``r``; the paths follow in order of length, each listed
    from ``r`` outwards so that ``l_i`` comes last.

    Raises:
        PreconditionError: If ``x < 2``
    """
    if x < 2:
        raise PreconditionError(f"T_n needs x >= 2, got {x}")
    edges: List[Tuple[int, int]] = []
    paths: Dict[int, Tuple[int, ...]] = {}
    next_node = 1
    for i in range(2, x + 1):
        path = tuple(range(next_node, next_node + i))
        next_node += i
        previous = 0
        for v in path:
            edges.append((previous, v))
            previous = v
        paths[i] = path
    spec = TnSpec(x, paths)
    g = Graph.from_edges(spec.n, edges)

    labels = [TnLabel.RELAY] * spec.n
    labels[0] = TnLabel.CENTRE
    for i in range(2, x):
        labels[spec.leaf(i)] = TnLabel.LEAF
    labels[spec.leaf(x)] = TnLabel.LAST_LEAF
    logger.debug("Built T_n with x=%d, n=%d", x, spec.n)
    return g, spec, tuple(labels)


class TnProgram(NodeProgram):
    """
    Two-bit gossip on ``T_n`` at one node.

    Every node acts in the round right after a first reception of a
    message kind; the centre also acts in its first round.
    """

    def __init__(self, label: TnLabel, source: Optional[str]):
        super().__init__(TnLabel(label).value, source)
        self.role = TnLabel(label)
        self.seen: Set[str] = set()
        self.pending: Optional[Tuple[int, str]] = None

    def wake(self, clock: int) -> None:
        if self.role is TnLabel.CENTRE:
            self.pending = (clock, INIT)

    @staticmethod
    def kind_of(message: Message) -> str:
        if message.tag == GATHER and message.get("last"):
            return "gather-last"
        return message.tag

    def _gather(self, last: bool) -> Message:
        return Message.create(GATHER, msgs=frozenset(self.known), last=last)

    def observe(self, clock: int, message: Message) -> None:
        kind = self.kind_of(message)
        first = kind not in self.seen
        self.seen.add(kind)
        if kind != INIT:
            self.known.update(message.tokens())
        role = self.role
        reply = None
        if role is TnLabel.CENTRE:
            if kind == "gather-last" and first:
                reply = SPREAD
        elif first and kind == INIT:
            reply = {
                TnLabel.LEAF: GATHER,
                TnLabel.LAST_LEAF: "gather-last",
                TnLabel.RELAY: INIT,
            }[role]
        elif first and kind == SPREAD:
            reply = SPREAD if role is TnLabel.RELAY else "stop"
        elif first and role is TnLabel.RELAY and kind in (GATHER, "gather-last"):
            reply = kind
        if reply is not None:
            self.pending = (clock + 1, reply)

    def decide(self, clock: int) -> Action:
        if self.pending is None or self.pending[0] != clock:
            return LISTEN
        _, reply = self.pending
        if reply == INIT:
            return Action.transmit(Message.create(INIT))
        if reply == GATHER:
            return Action.transmit(self._gather(last=False))
        if reply == "gather-last":
            return Action.transmit(self._gather(last=True))
        if reply == SPREAD:
            return Action.transmit(Message.create(SPREAD, msgs=frozenset(self.known)))
        return LISTEN

    def conclude(self, clock: int) -> None:
        if self.pending is None or self.pending[0] != clock:
            return
        reply = self.pending[1]
        self.pending = None
        if reply in (SPREAD, "stop"):
            self.terminated = True

    def next_active(self, clock: int) -> Optional[int]:
        if self.pending is not None and self.pending[0] >= clock:
            return self.pending[0]
        return None


def tn_program(label: TnLabel, source: Optional[str] = None) -> TnProgram:
    return TnProgram(label, source)


def run_tn(
    x: int, horizon: int = 1_000_000, fast_forward: bool = True
) -> Tuple[Graph, TnSpec, Trace]:
    """Build ``T_n``, give every node a source message and run the algorithm."""
    g, spec, labels = build_tn(x)
    tokens = SourceSet.everyone(spec.n).per_node(spec.n)
    programs = [tn_program(labels[v], tokens[v]) for v in range(spec.n)]
    trace = run(g, programs, horizon=horizon, fast_forward=fast_forward)
    return g, spec, trace


def tn_schedule_oracle(x: int) -> Dict[int, Dict[str, object]]:
    """
    Closed-form first-reception rounds of every node of ``T_n``.

    Returns:
        ``node -> kind -> round``. Path nodes carry ``init``, ``spread``
        and, below their leaf, ``gather`` or ``gather-last``; the centre
        carries ``gathers`` (path length to round) and ``gather-last``.
    """
    _, spec, _ = build_tn(x)
    schedule: Dict[int, Dict[str, object]] = {
        spec.root: {
            "gathers": {i: 2 * i for i in range(2, x + 1)},
            "gather-last": 2 * x,
        }
    }
    for i, path in spec.paths.items():
        for j, v in enumerate(path, start=1):
            events: Dict[str, object] = {INIT: j, SPREAD: 2 * x + j}
            if j < i:
                events["gather-last" if i == x else GATHER] = 2 * i - j
            schedule[v] = events
    return schedule


def first_receptions(trace: Trace, v: int) -> Dict[str, int]:
    """First round each message kind reached ``v``."""
    firsts: Dict[str, int] = {}
    for t, _, message in trace.receptions_of(v):
        firsts.setdefault(TnProgram.kind_of(message), t)
    return firsts


def check_tn_trace(
    g: Graph, spec: TnSpec, trace: Trace
) -> Dict[str, object]:
    """
    Compare a T_n trace with the closed-form schedule.

    Returns:
        Evidence record

    Raises:
        InvariantViolation: On any round mismatch, a gather collision at
            the centre, a label wider than two bits or incomplete gossip
    """
    x = spec.x
    oracle = tn_schedule_oracle(x)
    for v, label in enumerate(trace.labels):
        if len(label) != TN_LABEL_BITS:
            raise InvariantViolation("two-bit labels", f"node {v} has label {label!r}")

    for v in range(spec.n):
        observed = first_receptions(trace, v)
        expected = oracle[v]
        if v == spec.root:
            gathers = {
                t: message
                for t, _, message in trace.receptions_of(v)
                if message.tag == GATHER
            }
            want = expected["gathers"]
            got_rounds = sorted(gathers)
            if got_rounds != sorted(want.values()):  # type: ignore[attr-defined]
                raise InvariantViolation(
                    "centre gather schedule", f"gathers at rounds {got_rounds}"
                )
            if observed.get("gather-last") != expected["gather-last"]:
                raise InvariantViolation(
                    "last gather", f"arrived at round {observed.get('gather-last')}"
                )
            continue
        for kind, round_ in expected.items():
            if observed.get(kind) != round_:
                raise InvariantViolation(
                    f"{kind} schedule",
                    f"node {v} got {kind} at {observed.get(kind)}, expected {round_}",
                )

    neighbours = g.neighbours(spec.root)
    for record in trace.rounds:
        senders = [
            v for v, m in record.transmissions if v in neighbours and m.tag == GATHER
        ]
        if len(senders) > 1:
            raise InvariantViolation(
                "distinct path lengths",
                f"round {record.round}: centre neighbours {senders} gather together",
            )

    everything = frozenset(trace.sources)  # type: ignore[arg-type]
    completion = 0
    for v in range(spec.n):
        learned = trace.acquisitions[v]
        if not everything <= learned.keys():
            raise InvariantViolation("gossip completion", f"node {v} misses messages")
        completion = max(completion, max(learned.values()))
    if completion > 3 * x:
        raise InvariantViolation(
            "gossip completion", f"completed at round {completion}"
        )
    logger.info("T_n schedule holds for x=%d (completion round %d)", x, completion)
    return {
        "x": x,
        "n": spec.n,
        "completion_round": completion,
        "final_round": trace.final_round,
        "nodes_checked": spec.n,
    }
