"""Synchronous radio-network execution engine.

A node receives a message in a round iff it listens and exactly one of its
neighbours transmits. Transmitters, silent listeners and listeners with two
or more transmitting neighbours receive nothing, and collisions cannot be
told apart from silence.
"""

import heapq
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Hashable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
)

from .errors import PreconditionError
from .graph_core import Graph
from .messages import LISTEN, Action, Message

logger = logging.getLogger(__name__)


class NodeProgram(ABC):
    """Deterministic per-node program.

    The engine calls, for every round in which the node is consulted,
    :meth:`decide`, then :meth:`observe` if a message arrived, then
    :meth:`conclude`. Clocks passed in are the node's local clock values.
    Programs may only change state in rounds covered by :meth:`next_active`
    or in :meth:`observe`; the fast-forward path relies on it.
    """

    def __init__(self, label: str, source: Optional[str] = None):
        self.label = label
        self.source = source
        self.known: Set[str] = {source} if source is not None else set()
        self.terminated = False
        self.acknowledged = False

    def wake(self, clock: int) -> None:
        """Called once before the run with the local clock of round one."""

    @abstractmethod
    def decide(self, clock: int) -> Action:
        """Radio mode for the round at local ``clock``."""

    def observe(self, clock: int, message: Message) -> None:
        """Called only when a message is actually received."""

    def conclude(self, clock: int) -> None:
        """End-of-round hook, used for scheduled termination."""

    def next_active(self, clock: int) -> Optional[int]:
        """
        Earliest local clock at or after ``clock`` where the program may act.

        ``None`` means the program only reacts to receptions. The default
        consults the program every round.
        """
        return clock

    def snapshot(self) -> Optional[Hashable]:
        """Optional snapshot of internal state recorded in the trace."""
        return None


class RunStatus(str, Enum):
    """How a run ended."""
    TERMINATED = "terminated"
    EXHAUSTED = "exhausted"
    STOPPED = "stopped"


@dataclass(frozen=True)
class RoundOutcome:
    """What a node got in one round."""
    received: Optional[Message] = None
    sender: Optional[int] = None
    collided: bool = False


@dataclass(frozen=True)
class RoundRecord:
    """A round with at least one transmission."""
    round: int
    transmissions: Tuple[Tuple[int, Message], ...]
    receptions: Tuple[Tuple[int, int, Message], ...]
    collisions: Tuple[int, ...]


@dataclass(frozen=True)
class History:
    """Label plus the messages a node received, keyed by round."""
    label: str
    source: Optional[str]
    outcomes: Mapping[int, Message]


@dataclass
class RunStats:
    """Engine bookkeeping that differs between naive and fast-forward runs."""
    processed_rounds: int = 0
    skipped_rounds: int = 0


@dataclass(frozen=True)
class TraceMetrics:
    rounds: int
    active_rounds: int
    transmissions: int
    deliveries: int
    collisions: int
    max_message_bytes: int


@dataclass
class Trace:
    """Complete record of one execution."""
    node_count: int
    labels: Tuple[str, ...]
    sources: Tuple[Optional[str], ...]
    offsets: Tuple[int, ...]
    horizon: int
    rounds: List[RoundRecord] = field(default_factory=list)
    terminations: Dict[int, int] = field(default_factory=dict)
    acknowledgements: Dict[int, int] = field(default_factory=dict)
    acquisitions: Dict[int, Dict[str, int]] = field(default_factory=dict)
    snapshots: Dict[int, List[Tuple[int, Any]]] = field(default_factory=dict)
    final_knowledge: Tuple[FrozenSet[str], ...] = ()
    status: RunStatus = RunStatus.EXHAUSTED
    final_round: int = 0
    stats: RunStats = field(default_factory=RunStats, compare=False)

    def history(self, v: int) -> History:
        outcomes = {
            record.round: message
            for record in self.rounds
            for receiver, _, message in record.receptions
            if receiver == v
        }
        return History(self.labels[v], self.sources[v], outcomes)

    def receptions_of(self, v: int) -> List[Tuple[int, int, Message]]:
        """``(round, sender, message)`` for every reception at ``v``."""
        return [
            (record.round, sender, message)
            for record in self.rounds
            for receiver, sender, message in record.receptions
            if receiver == v
        ]

    def metrics(self) -> TraceMetrics:
        messages = [m for record in self.rounds for _, m in record.transmissions]
        return TraceMetrics(
            rounds=self.final_round,
            active_rounds=len(self.rounds),
            transmissions=len(messages),
            deliveries=sum(len(record.receptions) for record in self.rounds),
            collisions=sum(len(record.collisions) for record in self.rounds),
            max_message_bytes=max((m.size for m in messages), default=0),
        )

    def to_jsonable(self) -> Dict[str, Any]:
        return {
            "node_count": self.node_count,
            "labels": list(self.labels),
            "sources": list(self.sources),
            "offsets": list(self.offsets),
            "horizon": self.horizon,
            "status": self.status.value,
            "final_round": self.final_round,
            "rounds": [
                {
                    "round": record.round,
                    "transmissions": [
                        {"node": v, "message": m.to_jsonable()}
                        for v, m in record.transmissions
                    ],
                    "receptions": [
                        {"node": v, "sender": s, "message": m.to_jsonable()}
                        for v, s, m in record.receptions
                    ],
                    "collisions": list(record.collisions),
                }
                for record in self.rounds
            ],
            "terminations": {str(v): t for v, t in sorted(self.terminations.items())},
            "acknowledgements": {
                str(v): t for v, t in sorted(self.acknowledgements.items())
            },
            "final_knowledge": [sorted(k) for k in self.final_knowledge],
        }


def step(g: Graph, actions: Sequence[Action]) -> List[RoundOutcome]:
    """
    Resolve one round of radio actions.

    Args:
        g: Network
        actions: One action per node

    Returns:
        One outcome per node
    """
    if len(actions) != g.node_count:
        raise PreconditionError("step needs exactly one action per node")
    heard: Dict[int, List[int]] = {}
    for v, action in enumerate(actions):
        if action.transmits:
            for u in g.adjacency[v]:
                heard.setdefault(u, []).append(v)
    outcomes = []
    for v, action in enumerate(actions):
        senders = heard.get(v, [])
        if action.transmits or not senders:
            outcomes.append(RoundOutcome())
        elif len(senders) == 1:
            sender = senders[0]
            outcomes.append(RoundOutcome(actions[sender].message, sender))
        else:
            outcomes.append(RoundOutcome(collided=True))
    return outcomes


class _Recorder:
    """Builds a :class:`Trace` from the engine's per-round events."""

    def __init__(self, trace: Trace, programs: Sequence[NodeProgram]):
        self.trace = trace
        self.programs = programs
        self._last_snapshot: Dict[int, Any] = {}
        for v, program in enumerate(programs):
            trace.acquisitions[v] = {token: 0 for token in sorted(program.known)}
            snapshot = program.snapshot()
            if snapshot is not None:
                self._last_snapshot[v] = snapshot
                trace.snapshots[v] = [(0, snapshot)]

    def after_round(self, t: int, touched: Sequence[int]) -> None:
        for v in touched:
            program = self.programs[v]
            learned = self.trace.acquisitions[v]
            for token in sorted(program.known - learned.keys()):
                learned[token] = t
            if program.acknowledged and v not in self.trace.acknowledgements:
                self.trace.acknowledgements[v] = t
            if program.terminated and v not in self.trace.terminations:
                self.trace.terminations[v] = t
            snapshot = program.snapshot()
            if snapshot is not None and snapshot != self._last_snapshot.get(v):
                self._last_snapshot[v] = snapshot
                self.trace.snapshots.setdefault(v, []).append((t, snapshot))


def run(
    g: Graph,
    programs: Sequence[NodeProgram],
    clock_offsets: Optional[Sequence[int]] = None,
    horizon: int = 1_000_000,
    fast_forward: bool = True,
    until: Optional[Callable[[Sequence[NodeProgram]], bool]] = None,
) -> Trace:
    """
    Execute ``programs`` on ``g`` round by round.

    Args:
        g: Network
        programs: One program per node
        clock_offsets: Added to the global round to form each local clock
        horizon: Last global round that may be simulated
        fast_forward: Skip rounds in which no program can act
        until: Optional stop predicate checked after every processed round

    Returns:
        Execution trace; horizon exhaustion is a status, not an error
    """
    n = g.node_count
    if horizon < 1:
        raise PreconditionError("horizon must be positive")
    if len(programs) != n:
        raise PreconditionError("one program per node is required")
    offsets = tuple(clock_offsets) if clock_offsets is not None else (0,) * n

    trace = Trace(
        node_count=n,
        labels=tuple(p.label for p in programs),
        sources=tuple(p.source for p in programs),
        offsets=offsets,
        horizon=horizon,
    )
    for v, program in enumerate(programs):
        program.wake(1 + offsets[v])
    recorder = _Recorder(trace, programs)
    logger.debug("Starting run on %d nodes, horizon %d", n, horizon)

    heap: List[Tuple[int, int]] = []
    scheduled: List[Optional[int]] = [None] * n

    def reschedule(v: int, earliest: int) -> None:
        program = programs[v]
        scheduled[v] = None
        if program.terminated:
            return
        hint = program.next_active(earliest + offsets[v])
        if hint is not None:
            scheduled[v] = max(hint - offsets[v], earliest)
            heapq.heappush(heap, (scheduled[v], v))

    if fast_forward:
        for v in range(n):
            reschedule(v, 1)

    t = 0
    while True:
        if fast_forward:
            while heap and scheduled[heap[0][1]] != heap[0][0]:
                heapq.heappop(heap)
            if not heap or heap[0][0] > horizon:
                break
            trace.stats.skipped_rounds += heap[0][0] - t - 1
            t = heap[0][0]
            active = []
            while heap and heap[0][0] == t:
                _, v = heapq.heappop(heap)
                if scheduled[v] == t and (not active or active[-1] != v):
                    active.append(v)
            active.sort()
        else:
            t += 1
            if t > horizon:
                break
            active = [v for v in range(n) if not programs[v].terminated]
        trace.stats.processed_rounds += 1

        actions = [LISTEN] * n
        for v in active:
            actions[v] = programs[v].decide(t + offsets[v])
        outcomes = step(g, actions)

        received = []
        for v, outcome in enumerate(outcomes):
            if outcome.received is not None:
                received.append(v)
                if not programs[v].terminated:
                    programs[v].observe(t + offsets[v], outcome.received)

        touched = sorted(set(active).union(received))
        for v in touched:
            if not programs[v].terminated:
                programs[v].conclude(t + offsets[v])

        transmissions = tuple(
            (v, a.message) for v, a in enumerate(actions) if a.message is not None
        )
        if transmissions:
            trace.rounds.append(
                RoundRecord(
                    round=t,
                    transmissions=transmissions,
                    receptions=tuple(
                        (v, outcomes[v].sender, outcomes[v].received)  # type: ignore
                        for v in received
                    ),
                    collisions=tuple(v for v, o in enumerate(outcomes) if o.collided),
                )
            )
        recorder.after_round(t, touched)

        if fast_forward:
            for v in touched:
                reschedule(v, t + 1)
        if all(p.terminated for p in programs):
            trace.status = RunStatus.TERMINATED
            trace.final_round = t
            break
        if until is not None and until(programs):
            trace.status = RunStatus.STOPPED
            trace.final_round = t
            break

    if trace.status is RunStatus.EXHAUSTED:
        trace.final_round = horizon
    trace.final_knowledge = tuple(frozenset(p.known) for p in programs)
    logger.info(
        "Run finished: status=%s final_round=%d transmissions=%d",
        trace.status.value,
        trace.final_round,
        sum(len(r.transmissions) for r in trace.rounds),
    )
    return trace


def histories_equal(
    trace: Trace,
    u: int,
    v: int,
    through_round: Optional[int] = None,
    rename: Optional[Callable[[Message], Message]] = None,
) -> bool:
    """
    Whether ``u`` and ``v`` have identical histories up to ``through_round``.

    Histories start with the label; the source message is not compared.

    Args:
        trace: Execution trace
        u: First node
        v: Second node
        through_round: Last round compared (whole trace when omitted)
        rename: Applied to ``u``'s messages before comparing
    """
    if trace.labels[u] != trace.labels[v]:
        return False
    limit = trace.final_round if through_round is None else through_round
    left = {t: m for t, m in trace.history(u).outcomes.items() if t <= limit}
    right = {t: m for t, m in trace.history(v).outcomes.items() if t <= limit}
    if rename is not None:
        left = {t: rename(m) for t, m in left.items()}
    return left == right
