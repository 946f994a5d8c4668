"""The KB labeling scheme and k-broadcast algorithm.

KB runs three stages on the coordinator's synchronised clock:

1. Initialize, a B_bounded of ``"init"`` over rounds ``1..3m``.
2. Aggregate from round ``A = 3m + 1``: Individual-Collect when
   ``strat = 0`` (one acknowledged broadcast per source, ``2m`` rounds
   each) or RoundRobin-Collect when ``strat = 1`` (``m`` phases of one
   slot per colour).
3. Inform, a B_bounded of the coordinator's knowledge, after which every
   node stops.

Label bit layout: bit 0 strat, bits 1-3 join/stay/ack, then sched, then
the colour slot on non-tree graphs when ``strat = 0``.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .ack_broadcast import (
    AckBits,
    BroadcastSession,
    SlotSchedule,
    SyncedProgram,
    label_ack_general,
    label_ack_tree,
    predicted_m,
)
from .errors import PreconditionError
from .graph_core import Graph, distance_two_coloring
from .messages import LISTEN, Action, Message, SourceSet
from .radio_sim import NodeProgram, Trace, run

logger = logging.getLogger(__name__)

INIT = "init"
COLLECT = "collect"
DONE = "done"
INFORM = "inform"
ROUND_ROBIN = "roundrobin"


@dataclass(frozen=True)
class KBLabel:
    """Label of one node under the KB scheme."""
    strat: int
    ack: AckBits
    sched: str
    slot: Optional[SlotSchedule] = None
    slot_in_sched: bool = False

    def bits(self) -> str:
        extra = "" if self.slot is None or self.slot_in_sched else self.slot.bits()
        return f"{self.strat}{self.ack.bits()}{self.sched}{extra}"

    @property
    def sched_value(self) -> int:
        return int(self.sched, 2)

    def __len__(self) -> int:
        return len(self.bits())


@dataclass(frozen=True)
class KBScheme:
    """Labels plus the metadata the labeling scheme decided."""
    labels: Tuple[KBLabel, ...]
    coordinator: int
    strat: int
    sources: SourceSet
    tree_mode: bool
    m: int
    colour_count: Optional[int] = None

    @property
    def max_length(self) -> int:
        return max(len(label) for label in self.labels)

    def declared_bound(self) -> int:
        """Maximum label length the scheme promises for this input."""
        return kb_label_bound(
            self.strat,
            self.sources.k,
            self.colour_count,
            None if self.tree_mode else self.labels[0].slot.width,  # type: ignore
        )


def kb_label_bound(
    strat: int, k: int, colour_count: Optional[int], slot_width: Optional[int]
) -> int:
    """
    Length formula of the KB scheme.

    ``4 + max(1, bits(k))`` when ``strat = 0``, plus the slot width on
    non-trees; ``4 + bits(c)`` when ``strat = 1``.
    """
    if strat == 1:
        if colour_count is None:
            raise PreconditionError("strat 1 needs the colour count")
        return 4 + colour_count.bit_length()
    return 4 + max(1, k.bit_length()) + (slot_width or 0)


def choose_coordinator(
    node_count: int, sources: SourceSet, preferred: int = 0
) -> int:
    """``preferred``, unless it is a source and some non-source exists."""
    if preferred not in sources.nodes or sources.k == node_count:
        return preferred
    return min(v for v in range(node_count) if v not in sources.nodes)


def labeling_kb(
    g: Graph, sources: SourceSet, coordinator: Optional[int] = None
) -> KBScheme:
    """
    Label ``g`` for k-broadcast of ``sources``.

    Args:
        g: Network
        sources: Source nodes in index order
        coordinator: Forced coordinator; chosen automatically when omitted

    Returns:
        The labels with their strategy, coordinator and broadcast bound
    """
    n = g.node_count
    sources.validate(n)
    r = coordinator if coordinator is not None else choose_coordinator(n, sources)
    strat = 0 if sources.k <= g.max_degree else 1

    slots: Optional[Tuple[SlotSchedule, ...]] = None
    if g.is_tree:
        ack_bits = label_ack_tree(g, r)
    else:
        ack_bits, slots = label_ack_general(g, r)

    colour_count = None
    if strat == 0:
        scheds = []
        for v in range(n):
            index = sources.index_of(v)
            scheds.append(format(index, "b") if index is not None else "0")
    else:
        colouring = distance_two_coloring(g)
        colour_count = colouring.color_count
        width = colour_count.bit_length()
        scheds = [format(colouring[v], f"0{width}b") for v in range(n)]

    labels = tuple(
        KBLabel(
            strat=strat,
            ack=ack_bits[v],
            sched=scheds[v],
            slot=slots[v] if slots is not None else None,
            slot_in_sched=strat == 1,
        )
        for v in range(n)
    )
    scheme = KBScheme(
        labels=labels,
        coordinator=r,
        strat=strat,
        sources=sources,
        tree_mode=slots is None,
        m=predicted_m(g, r, slots),
        colour_count=colour_count,
    )
    logger.info(
        "KB labels: strat=%d coordinator=%d k=%d max length %d",
        strat,
        r,
        sources.k,
        scheme.max_length,
    )
    return scheme


class IndividualCollect:
    """
    Aggregate with one B_ack:des phase of ``2m`` rounds per source.

    In phase ``p`` the coordinator broadcasts ``p`` and the source whose
    sched reads ``p`` acknowledges with its message. The first phase
    without an acknowledgement is followed by a ``"done"`` phase.
    """

    def __init__(self, owner: "KBProgram", m: int, start: int):
        self.owner = owner
        self.m = m
        self.start = start
        self.phase = 0
        self.phase_kinds: List[str] = []
        self.answered: List[bool] = []
        self.inform_start: Optional[int] = None

    def phase_start(self, p: int) -> int:
        return self.start + (p - 1) * 2 * self.m

    def next_round(self, t: int) -> Optional[int]:
        if not self.owner.is_root or self.inform_start is not None:
            return None
        return max(t, self.phase_start(self.phase + 1))

    def begin_phase(self, t: int) -> None:
        """Coordinator only: open the phase starting in round ``t``."""
        previous = self.phase_kinds[-1] if self.phase_kinds else None
        if previous == DONE:
            self.inform_start = t
            return
        self.phase += 1
        answered = previous is None or self.answered[-1]
        name = f"{COLLECT}-{self.phase}" if answered else DONE
        kind = COLLECT if name != DONE else DONE
        self.phase_kinds.append(kind)
        self.answered.append(False)
        body = {"index": self.phase} if kind == COLLECT else {}
        self.owner.open_session(name, kind, t, m=self.m, body=body)
        if kind == COLLECT and self.owner.kb_label.sched_value == self.phase:
            if self.owner.source is not None:
                self.owner.known.add(self.owner.source)
            self.answered[-1] = True
        logger.debug("Coordinator opened %s at round %d", name, t)

    def on_broadcast(self, session: BroadcastSession) -> None:
        owner = self.owner
        if session.kind == COLLECT and owner.kb_label.strat == 0:
            if session.body.get("index") == owner.kb_label.sched_value and owner.source:
                session.acknowledge(msg=owner.source)
        elif session.kind == DONE and owner.bits.is_acknowledger:
            session.acknowledge()

    def on_ack(self, session: BroadcastSession) -> None:
        if session.kind != COLLECT:
            return
        token = session.ack_fields.get("msg")
        if token is not None:
            self.owner.known.add(token)
        self.answered[-1] = True


class RoundRobinCollect:
    """
    Aggregate in ``m`` phases of ``2^|sched| - 1`` rounds.

    In round ``i`` of a phase every node whose sched reads ``i`` transmits
    the messages it knows.
    """

    def __init__(self, owner: "KBProgram", m: int, start: int):
        self.owner = owner
        self.m = m
        self.start = start
        self.colour = owner.kb_label.sched_value
        self.slots = 2 ** len(owner.kb_label.sched) - 1
        self.inform_start = start + m * self.slots

    def next_round(self, t: int) -> Optional[int]:
        offset = self.colour - 1
        first = self.start + offset
        if t <= first:
            return first
        candidate = t + (offset - (t - self.start)) % self.slots
        return candidate if candidate < self.inform_start else None

    def transmission(self, t: int) -> Optional[Message]:
        if t < self.start or t >= self.inform_start:
            return None
        if (t - self.start) % self.slots != self.colour - 1:
            return None
        return Message.create(ROUND_ROBIN, known=frozenset(self.owner.known))


def individual_collect(owner: "KBProgram", m: int, start: int) -> IndividualCollect:
    return IndividualCollect(owner, m, start)


def round_robin_collect(owner: "KBProgram", m: int, start: int) -> RoundRobinCollect:
    return RoundRobinCollect(owner, m, start)


class KBProgram(SyncedProgram):
    """The KB algorithm at one node."""

    def __init__(self, label: KBLabel, source: Optional[str] = None):
        super().__init__(label.bits(), label.ack, source, label.slot)
        self.kb_label = label
        self.m: Optional[int] = None
        self.aggregate: Optional[Any] = None

    def wake(self, clock: int) -> None:
        super().wake(clock)
        if self.is_root:
            self.open_session(INIT, INIT, 1, bounded=True)

    def _session_options(self, name: str) -> Tuple[str, Dict[str, Any]]:
        if name == INIT:
            return INIT, {"bounded": True}
        if name == INFORM:
            return INFORM, {"m": self.m, "bounded": True}
        if name == DONE:
            return DONE, {"m": self.m}
        return COLLECT, {"m": self.m}

    def _learn_m(self, m: int) -> None:
        self.m = m
        start = 3 * m + 1
        if self.kb_label.strat == 0:
            self.aggregate = individual_collect(self, m, start)
        else:
            self.aggregate = round_robin_collect(self, m, start)

    @property
    def inform(self) -> Optional[BroadcastSession]:
        return self.sessions.get(INFORM)

    def decide(self, clock: int) -> Action:
        if self.delta is None:
            return LISTEN
        t = self.synced(clock)
        if self.is_root and self.aggregate is not None:
            self._advance_coordinator(t)
        message = self.pop_transmission(t)
        if message is None and isinstance(self.aggregate, RoundRobinCollect):
            message = self.aggregate.transmission(t)
        return Action.transmit(message) if message is not None else LISTEN

    def _advance_coordinator(self, t: int) -> None:
        aggregate = self.aggregate
        if isinstance(aggregate, IndividualCollect):
            while aggregate.inform_start is None and aggregate.next_round(t) == t:
                aggregate.begin_phase(t)
        if aggregate.inform_start == t and self.inform is None:
            self.open_session(
                INFORM,
                INFORM,
                t,
                m=self.m,
                bounded=True,
                body={"known": frozenset(self.known)},
            )

    def observe(self, clock: int, message: Message) -> None:
        self.sync_from(clock, message)
        t = self.synced(clock)
        if message.tag == ROUND_ROBIN:
            self.known.update(message.tokens())
            return
        kind, options = self._session_options(message["session"])
        session = self.session_of(message, kind, **options)
        event = session.receive(t, message)
        if event == "broadcast":
            if session.kind == INIT:
                if self.bits.is_acknowledger:
                    session.acknowledge()
            elif session.kind == INFORM:
                self.known.update(message.tokens())
                if self.bits.is_acknowledger:
                    session.acknowledge()
            elif self.aggregate is not None:
                self.aggregate.on_broadcast(session)
        elif event == "ack":
            if session.kind == INIT:
                self._learn_m(session.m)  # type: ignore[arg-type]
            elif isinstance(self.aggregate, IndividualCollect):
                self.aggregate.on_ack(session)
        elif event == "bound" and session.kind == INIT:
            self._learn_m(session.m)  # type: ignore[arg-type]

    def conclude(self, clock: int) -> None:
        inform = self.inform
        if inform is not None and inform.finished(self.synced(clock)):
            self.terminated = True
            self.acknowledged = True

    def next_active(self, clock: int) -> Optional[int]:
        if self.delta is None:
            return None
        t = self.synced(clock)
        candidates = [self.pending_round(t)]
        if self.aggregate is not None:
            candidates.append(self.aggregate.next_round(t))
            if self.is_root:
                candidates.append(self.aggregate.inform_start)
        if self.inform is not None:
            candidates.append(self.inform.end_synced)
        rounds = [r for r in candidates if r is not None and r >= t]
        return self.local(min(rounds)) if rounds else None

    def snapshot(self) -> Optional[Any]:
        return self.m


def kb_program(label: KBLabel, source: Optional[str] = None) -> KBProgram:
    return KBProgram(label, source)


def run_kb(
    g: Graph,
    sources: SourceSet,
    horizon: int = 1_000_000,
    clock_offsets: Optional[Sequence[int]] = None,
    fast_forward: bool = True,
    coordinator: Optional[int] = None,
) -> Tuple[KBScheme, Trace]:
    """Label ``g`` with the KB scheme and run the algorithm."""
    scheme = labeling_kb(g, sources, coordinator)
    tokens = sources.per_node(g.node_count)
    programs: List[NodeProgram] = [
        kb_program(scheme.labels[v], tokens[v]) for v in range(g.node_count)
    ]
    trace = run(g, programs, clock_offsets, horizon, fast_forward)
    return scheme, trace
