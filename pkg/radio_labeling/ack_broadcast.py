"""Acknowledged broadcast primitives: B_ack, B_bounded and B_ack:des.

A broadcast is run as a :class:`BroadcastSession`, one per node and per
broadcast, driven by the node's synchronised clock. Trees use depth-gated
flooding: only internal nodes (``join=1``) relay and the acknowledgement
climbs one level per round. Other graphs relay in colour slots of a
distance-two colouring and route the acknowledgement back along the
colour path recorded in the broadcast messages.

Label bit layout: bit 0 join, bit 1 stay, bit 2 ack.
"""

import heapq
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import PreconditionError
from .graph_core import Graph, distance_two_coloring, rooted_view
from .messages import LISTEN, Action, Message
from .radio_sim import NodeProgram, Trace, run

logger = logging.getLogger(__name__)

ACK = "ack"
BOUND = "bound"
# Fields that steer a session; everything else in a broadcast is its body.
CONTROL_FIELDS = frozenset({"session", "origin", "sync", "hops", "path", "bstart"})


@dataclass(frozen=True)
class AckBits:
    """The three acknowledgement bits of a label."""
    join: int = 0
    stay: int = 0
    ack: int = 0

    @classmethod
    def parse(cls, bits: str) -> "AckBits":
        if len(bits) != 3 or set(bits) - {"0", "1"}:
            raise ValueError(f"expected three bits, got {bits!r}")
        return cls(int(bits[0]), int(bits[1]), int(bits[2]))

    def bits(self) -> str:
        return f"{self.join}{self.stay}{self.ack}"

    @property
    def is_coordinator(self) -> bool:
        return self.join == 1 and self.stay == 1 and self.ack == 1

    @property
    def is_acknowledger(self) -> bool:
        return self.ack == 1 and not self.join and not self.stay

    @property
    def relays(self) -> bool:
        return self.join == 1 and not self.is_coordinator


COORDINATOR = AckBits(1, 1, 1)
ACKNOWLEDGER = AckBits(0, 0, 1)
RELAY = AckBits(1, 0, 0)
QUIET = AckBits(0, 0, 0)


@dataclass(frozen=True)
class SlotSchedule:
    """Colour slot of a node: it relays in rounds congruent to ``colour``."""
    colour: int
    width: int

    def __post_init__(self) -> None:
        if not 1 <= self.colour <= self.slots:
            raise ValueError(f"colour {self.colour} does not fit in {self.width} bits")

    @property
    def slots(self) -> int:
        return 2**self.width - 1

    def next_slot(self, rho: int) -> int:
        """First round after ``rho`` that belongs to this colour."""
        return rho + 1 + (self.colour - 1 - rho) % self.slots

    def bits(self) -> str:
        return format(self.colour, f"0{self.width}b")


@dataclass(frozen=True)
class BroadcastResult:
    """Outcome of a stand-alone broadcast run."""
    m: int
    t_done: Optional[int]
    reception_rounds: Tuple[Optional[int], ...]
    ack_round: Optional[int]
    trace: Trace


def label_ack_tree(tree: Graph, root: int) -> Tuple[AckBits, ...]:
    """
    Acknowledgement bits for a tree broadcast started at ``root``.

    The root is ``111``. The designated acknowledger, the smallest node at
    maximum depth, is ``001``. Every other node with children relays and
    gets ``100``; remaining leaves are ``000``. Giving join=1 to every
    internal node, rather than to the root alone, lets depth-gated flooding
    reach each level one round after the previous one, so the broadcast
    bound ``m`` is the tree height.

    Raises:
        GraphError: If ``tree`` is not a tree
    """
    view = rooted_view(tree, root)
    z = view.deepest()
    bits = []
    for v in range(tree.node_count):
        if v == root:
            bits.append(COORDINATOR)
        elif v == z:
            bits.append(ACKNOWLEDGER)
        elif view.children[v]:
            bits.append(RELAY)
        else:
            bits.append(QUIET)
    return tuple(bits)


def slot_flood_rounds(
    g: Graph, root: int, slots: Sequence[SlotSchedule], relays: Sequence[bool]
) -> List[Optional[int]]:
    """
    First-reception round of every node under slot flooding from ``root``.

    The root transmits in round 1; a relay informed in round ``r``
    transmits once, in its next slot after ``r``.
    """
    received: List[Optional[int]] = [None] * g.node_count
    received[root] = 0
    heap = [(1, root)]
    while heap:
        sent, u = heapq.heappop(heap)
        for w in sorted(g.adjacency[u]):
            if received[w] is None:
                received[w] = sent
                if relays[w]:
                    heapq.heappush(heap, (slots[w].next_slot(sent), w))
    return received


def label_ack_general(
    g: Graph, root: int
) -> Tuple[Tuple[AckBits, ...], Tuple[SlotSchedule, ...]]:
    """
    Acknowledgement bits plus colour slots for any connected graph.

    Slots come from the greedy distance-two colouring; their width is the
    bit length of the colour count. Every node except the root and the
    acknowledger relays. The acknowledger is the smallest node among the
    last ones to receive the broadcast.

    Returns:
        ``(bits, slots)`` per node
    """
    colouring = distance_two_coloring(g)
    width = colouring.color_count.bit_length()
    slots = tuple(SlotSchedule(colouring[v], width) for v in range(g.node_count))
    relays = [v != root for v in range(g.node_count)]
    rounds = slot_flood_rounds(g, root, slots, relays)
    last = max(r for r in rounds if r is not None)
    z = min(v for v, r in enumerate(rounds) if r == last)
    bits = tuple(
        COORDINATOR if v == root else ACKNOWLEDGER if v == z else RELAY
        for v in range(g.node_count)
    )
    logger.debug(
        "Slot labels: %d colours, width %d, acknowledger %d",
        colouring.color_count,
        width,
        z,
    )
    return bits, slots


def predicted_m(
    g: Graph, root: int, slots: Optional[Sequence[SlotSchedule]]
) -> int:
    """Broadcast bound: tree height, or last reception plus one slot cycle."""
    if slots is None:
        return rooted_view(g, root).height
    relays = [v != root for v in range(g.node_count)]
    last = max(r for r in slot_flood_rounds(g, root, slots, relays) if r is not None)
    return last + slots[root].slots


class BroadcastSession:
    """
    One broadcast as seen by one node.

    Rounds passed in and out are synchronised rounds; ``rho`` denotes the
    round number inside the session, starting at 1.

    Args:
        name: Session identifier carried by every message
        kind: Tag of the broadcast message
        start: Synchronised round of session round 1
        bits: Acknowledgement bits of this node
        slots: Colour slot in general mode, ``None`` in tree mode
        m: Broadcast bound when already known
        bounded: Re-broadcast ``m`` after the acknowledgement (B_bounded)
        body: Broadcast payload, used at the coordinator only
    """

    def __init__(
        self,
        name: str,
        kind: str,
        start: int,
        bits: AckBits,
        slots: Optional[SlotSchedule] = None,
        m: Optional[int] = None,
        bounded: bool = False,
        body: Optional[Mapping[str, Any]] = None,
    ):
        self.name = name
        self.kind = kind
        self.start = start
        self.bits = bits
        self.slots = slots
        self.m = m
        self.bounded = bounded
        self.body: Dict[str, Any] = dict(body or {})
        self.is_root = bits.is_coordinator
        self.received: Optional[int] = 0 if self.is_root else None
        self.depth: Optional[int] = 0 if self.is_root else None
        self.path: Tuple[int, ...] = ()
        self.ack_round: Optional[int] = None
        self.ack_fields: Dict[str, Any] = {}
        self.bound_start: Optional[int] = None
        self.acknowledging = False
        self._outbox: Dict[int, Message] = {}
        self._seen_bound = False
        if self.is_root:
            self._send(1, kind, hops=1, **self._path_field(), **self.body)

    def round_of(self, synced: int) -> int:
        return synced - self.start + 1

    def synced_of(self, rho: int) -> int:
        return self.start + rho - 1

    @property
    def end(self) -> Optional[int]:
        """Last session round, once ``m`` is known."""
        if self.m is None:
            return None
        return 3 * self.m if self.bounded else 2 * self.m

    @property
    def end_synced(self) -> Optional[int]:
        end = self.end
        return None if end is None else self.synced_of(end)

    def finished(self, synced: int) -> bool:
        end = self.end_synced
        return end is not None and synced >= end

    def _path_field(self, extend: bool = True) -> Dict[str, Any]:
        if self.slots is None:
            return {}
        path = self.path + (self.slots.colour,) if extend else self.path
        return {"path": path}

    def _send(self, rho: int, tag: str, **fields: Any) -> None:
        synced = self.synced_of(rho)
        self._outbox[synced] = Message.create(
            tag, session=self.name, origin=self.start, sync=synced, **fields
        )

    def _relay_round(self, rho: int, base: int = 1) -> int:
        if self.slots is None:
            return rho + 1
        return base - 1 + self.slots.next_slot(rho - base + 1)

    def pop(self, synced: int) -> Optional[Message]:
        """Message to transmit in round ``synced``, if any."""
        return self._outbox.pop(synced, None)

    def next_round(self, synced: int) -> Optional[int]:
        """Earliest pending transmission at or after ``synced``."""
        pending = [t for t in self._outbox if t >= synced]
        return min(pending) if pending else None

    def acknowledge(self, **extra: Any) -> None:
        """
        Act as the designated acknowledger of this broadcast.

        The acknowledgement starts in round ``m + 1`` when ``m`` is known;
        otherwise right after the last round the broadcast can still use,
        reporting that round as ``m``.
        """
        if self.received is None or self.is_root:
            raise PreconditionError("only an informed non-coordinator can acknowledge")
        if self.m is not None:
            rho, m = self.m + 1, self.m
        elif self.slots is None:
            rho, m = self.received + 1, self.received
        else:
            m = self.received + self.slots.slots
            rho = m + 1
        self.acknowledging = True
        route = {"depth": self.depth} if self.slots is None else {"path": self.path}
        self._send(rho, ACK, m=m, **route, **extra)

    def receive(self, synced: int, message: Message) -> Optional[str]:
        """
        Handle a message of this session.

        Returns:
            ``"broadcast"`` on the first broadcast reception, ``"ack"`` when
            the coordinator accepts the acknowledgement, ``"forward"`` when
            relaying it, ``"bound"`` on learning ``m`` from the
            re-broadcast, ``None`` otherwise
        """
        rho = self.round_of(synced)
        if message.tag == self.kind:
            return self._on_broadcast(rho, message)
        if message.tag == ACK:
            return self._on_ack(rho, message)
        if message.tag == BOUND:
            return self._on_bound(rho, message)
        return None

    def _on_broadcast(self, rho: int, message: Message) -> Optional[str]:
        if self.received is not None:
            return None
        self.received = rho
        self.depth = message["hops"]
        self.path = message.get("path", ())
        self.body = {k: v for k, v in message.payload if k not in CONTROL_FIELDS}
        if self.bits.relays:
            self._send(
                self._relay_round(rho),
                self.kind,
                hops=self.depth + 1,  # type: ignore[operator]
                **self._path_field(),
                **self.body,
            )
        return "broadcast"

    def _ack_for_me(self, message: Message) -> bool:
        if self.received is None:
            return False
        if self.slots is None:
            return message.get("depth") == self.depth + 1  # type: ignore[operator]
        path = message.get("path", ())
        return bool(path) and path[-1] == self.slots.colour

    def _on_ack(self, rho: int, message: Message) -> Optional[str]:
        if not self._ack_for_me(message):
            return None
        skipped = CONTROL_FIELDS | {"depth"}
        fields = {k: v for k, v in message.payload if k not in skipped}
        if self.is_root:
            if self.ack_round is not None:
                return None
            self.ack_round = rho
            self.ack_fields = fields
            if self.m is None:
                self.m = fields["m"]
            if self.bounded:
                self.bound_start = rho + 1
                self._send(
                    rho + 1,
                    BOUND,
                    hops=1,
                    bstart=rho + 1,
                    m=self.m,
                    **self._path_field(),
                )
            return ACK
        route = (
            {"depth": self.depth}
            if self.slots is None
            else {"path": message["path"][:-1]}
        )
        self._send(rho + 1, ACK, **route, **fields)
        return "forward"

    def _on_bound(self, rho: int, message: Message) -> Optional[str]:
        if self._seen_bound or self.is_root:
            return None
        self._seen_bound = True
        self.m = message["m"]
        self.bound_start = message["bstart"]
        if self.bits.relays:
            self._send(
                self._relay_round(rho, base=self.bound_start),  # type: ignore[arg-type]
                BOUND,
                hops=message["hops"] + 1,
                bstart=self.bound_start,
                m=self.m,
                **self._path_field(),
            )
        return BOUND


class SyncedProgram(NodeProgram):
    """
    Node program with a clock synchronised to the coordinator's.

    The coordinator's first round is synchronised round 1; every other node
    adopts the ``sync`` field of the first message it receives.
    """

    def __init__(
        self,
        label: str,
        bits: AckBits,
        source: Optional[str] = None,
        slots: Optional[SlotSchedule] = None,
    ):
        super().__init__(label, source)
        self.bits = bits
        self.slots = slots
        self.delta: Optional[int] = None
        self.sessions: Dict[str, BroadcastSession] = {}

    @property
    def is_root(self) -> bool:
        return self.bits.is_coordinator

    def wake(self, clock: int) -> None:
        if self.is_root:
            self.delta = 1 - clock

    def synced(self, clock: int) -> int:
        if self.delta is None:
            raise PreconditionError("clock is not synchronised yet")
        return clock + self.delta

    def local(self, synced: int) -> int:
        return synced - self.delta  # type: ignore[operator]

    def sync_from(self, clock: int, message: Message) -> None:
        if self.delta is None:
            self.delta = message["sync"] - clock

    def open_session(
        self, name: str, kind: str, start: int, **options: Any
    ) -> BroadcastSession:
        session = BroadcastSession(name, kind, start, self.bits, self.slots, **options)
        self.sessions[name] = session
        return session

    def session_of(
        self, message: Message, kind: str, **options: Any
    ) -> BroadcastSession:
        """The session ``message`` belongs to, opened on first contact."""
        name = message["session"]
        session = self.sessions.get(name)
        if session is None:
            session = self.open_session(name, kind, message["origin"], **options)
        return session

    def pop_transmission(self, t: int) -> Optional[Message]:
        for session in self.sessions.values():
            message = session.pop(t)
            if message is not None:
                return message
        return None

    def pending_round(self, t: int) -> Optional[int]:
        rounds = [s.next_round(t) for s in self.sessions.values()]
        rounds = [r for r in rounds if r is not None]
        return min(rounds) if rounds else None


class AckBroadcastProgram(SyncedProgram):
    """
    A single B_ack, B_bounded or B_ack:des broadcast.

    The coordinator broadcasts its source token. Designated nodes
    acknowledge; with ``m`` known every node stops after the session.
    """

    SESSION = "bcast"

    def __init__(
        self,
        bits: AckBits,
        source: Optional[str] = None,
        slots: Optional[SlotSchedule] = None,
        m: Optional[int] = None,
        bounded: bool = False,
        designated: bool = False,
    ):
        label = bits.bits() + (slots.bits() if slots is not None else "")
        super().__init__(label, bits, source, slots)
        self.m = m
        self.bounded = bounded
        self.designated = designated

    def wake(self, clock: int) -> None:
        super().wake(clock)
        if self.is_root:
            body = {"msg": self.source} if self.source is not None else {}
            self.open_session(
                self.SESSION, self.SESSION, 1, m=self.m, bounded=self.bounded, body=body
            )

    def decide(self, clock: int) -> Action:
        if self.delta is None:
            return LISTEN
        message = self.pop_transmission(self.synced(clock))
        return Action.transmit(message) if message is not None else LISTEN

    def observe(self, clock: int, message: Message) -> None:
        self.sync_from(clock, message)
        session = self.session_of(
            message, self.SESSION, m=self.m, bounded=self.bounded
        )
        event = session.receive(self.synced(clock), message)
        if event == "broadcast":
            self.known.update(message.tokens())
            if self.designated:
                session.acknowledge()
        elif event == ACK:
            self.known.update(message.tokens())
            if not self.bounded:
                self.acknowledged = True

    def conclude(self, clock: int) -> None:
        session = self.sessions.get(self.SESSION)
        if session is not None and session.finished(self.synced(clock)):
            self.terminated = True
            if self.bounded:
                self.acknowledged = True

    def next_active(self, clock: int) -> Optional[int]:
        session = self.sessions.get(self.SESSION)
        if session is None or self.delta is None:
            return None
        t = self.synced(clock)
        candidates = [session.next_round(t), session.end_synced]
        candidates = [r for r in candidates if r is not None and r >= t]
        return self.local(min(candidates)) if candidates else None

    def snapshot(self) -> Optional[Any]:
        session = self.sessions.get(self.SESSION)
        return None if session is None else session.m


def b_ack_program_tree(
    bits: AckBits, source: Optional[str] = None, slots: Optional[SlotSchedule] = None
) -> AckBroadcastProgram:
    """
    B_ack: the ``001`` node acknowledges after its first reception.

    On a tree the depth is learned from the counter; other graphs relay in
    the colour slots of ``slots``.
    """
    return AckBroadcastProgram(bits, source, slots, designated=bits.is_acknowledger)


def b_bounded_program(
    bits: AckBits, source: Optional[str] = None, slots: Optional[SlotSchedule] = None
) -> AckBroadcastProgram:
    """B_bounded: every node learns ``m`` and stops at round ``3m``."""
    return AckBroadcastProgram(
        bits, source, slots, bounded=True, designated=bits.is_acknowledger
    )


def b_ack_des_program(
    bits: AckBits,
    m: int,
    des_marker: bool,
    source: Optional[str] = None,
    slots: Optional[SlotSchedule] = None,
) -> AckBroadcastProgram:
    """B_ack:des: with ``m`` known, the marked node acknowledges in round ``m + 1``."""
    if m < 1:
        raise PreconditionError("m must be positive")
    return AckBroadcastProgram(bits, source, slots, m=m, designated=des_marker)


def run_broadcast(
    g: Graph,
    root: int,
    variant: str = "bounded",
    m: Optional[int] = None,
    designated: Optional[int] = None,
    horizon: int = 100_000,
    fast_forward: bool = True,
) -> BroadcastResult:
    """
    Label ``g`` and run one broadcast from ``root``.

    Args:
        g: Network
        root: Start node
        variant: ``"ack"``, ``"bounded"`` or ``"des"``
        m: Known bound, required by ``"des"``
        designated: Acknowledger for ``"des"``; ``None`` means nobody
        horizon: Round limit
        fast_forward: Engine round skipping

    Returns:
        Reception rounds, acknowledgement round and the trace
    """
    if variant not in ("ack", "bounded", "des"):
        raise PreconditionError(f"unknown broadcast variant: {variant}")
    if g.is_tree:
        bits, slots = label_ack_tree(g, root), None
    else:
        bits, general_slots = label_ack_general(g, root)
        slots = general_slots
    programs: List[NodeProgram] = []
    for v in range(g.node_count):
        slot = slots[v] if slots is not None else None
        source = "mu" if v == root else None
        if variant == "ack":
            programs.append(b_ack_program_tree(bits[v], source, slot))
        elif variant == "bounded":
            programs.append(b_bounded_program(bits[v], source, slot))
        else:
            if m is None:
                raise PreconditionError("B_ack:des needs m")
            programs.append(
                b_ack_des_program(bits[v], m, v == designated, source, slot)
            )

    def root_done(ps: Sequence[NodeProgram]) -> bool:
        return variant == "ack" and ps[root].acknowledged

    trace = run(
        g, programs, horizon=horizon, fast_forward=fast_forward, until=root_done
    )
    receptions: List[Optional[int]] = [None] * g.node_count
    receptions[root] = 0
    for record in trace.rounds:
        for receiver, _, message in record.receptions:
            first = receptions[receiver] is None
            if message.tag == AckBroadcastProgram.SESSION and first:
                receptions[receiver] = record.round
    session = programs[root].sessions[AckBroadcastProgram.SESSION]  # type: ignore
    final_m = session.m if session.m is not None else predicted_m(g, root, slots)
    return BroadcastResult(
        final_m, session.end, tuple(receptions), session.ack_round, trace
    )
