"""Label-driven node programs used by the indistinguishability demos.

None of these programs looks at anything but its label, its clock and the
messages it received, so nodes with equal labels and equal histories act
identically. The last three families wrap the KB, GOSSIP and T_n programs,
decoding a demo label into a label of the algorithm.
"""

from typing import Callable, Dict, Optional

from .ack_broadcast import COORDINATOR, AckBits
from .ack_broadcast import RELAY as RELAY_BITS
from .kb import KBLabel, KBProgram, kb_program
from .messages import LISTEN, Action, Message
from .primes import FaithfulPrime
from .radio_sim import NodeProgram
from .tn_family import TnLabel, TnProgram, tn_program
from .tree_gossip import GossipLabel, GossipProgram

RELAY = "relay"

ProgramFactory = Callable[[str, Optional[str]], NodeProgram]


def _relay(program: NodeProgram) -> Action:
    return Action.transmit(Message.create(RELAY, msgs=frozenset(program.known)))


def label_value(label: str) -> int:
    """Binary value of a bit-string label, otherwise the sum of its character codes."""
    if label and set(label) <= {"0", "1"}:
        return int(label, 2)
    return sum(ord(c) for c in label)


class RoundRobinByLabel(NodeProgram):
    """Transmits what it knows once per ``period`` rounds, in the slot of its label."""

    def __init__(self, label: str, source: Optional[str] = None, period: int = 8):
        super().__init__(label, source)
        self.period = period
        self.slot = label_value(label) % period

    def decide(self, clock: int) -> Action:
        return _relay(self) if clock % self.period == self.slot else LISTEN

    def observe(self, clock: int, message: Message) -> None:
        self.known.update(message.tokens())

    def next_active(self, clock: int) -> Optional[int]:
        return clock + (self.slot - clock) % self.period


class FloodOnReceive(NodeProgram):
    """Sources transmit in their first round; others after learning something new."""

    def __init__(self, label: str, source: Optional[str] = None):
        super().__init__(label, source)
        self.pending: Optional[int] = None

    def wake(self, clock: int) -> None:
        if self.source is not None:
            self.pending = clock

    def decide(self, clock: int) -> Action:
        if self.pending == clock:
            self.pending = None
            return _relay(self)
        return LISTEN

    def observe(self, clock: int, message: Message) -> None:
        before = len(self.known)
        self.known.update(message.tokens())
        if len(self.known) > before:
            self.pending = clock + 1

    def next_active(self, clock: int) -> Optional[int]:
        if self.pending is not None and self.pending >= clock:
            return self.pending
        return None


class AllTransmit(NodeProgram):
    """Transmits every round."""

    def decide(self, clock: int) -> Action:
        return _relay(self)


def _bits(label: str) -> str:
    return format(label_value(label), "b")


def ack_role(label: str) -> AckBits:
    """Demo label ``"1"`` is a coordinator; every other label relays."""
    return COORDINATOR if label_value(label) == 1 else RELAY_BITS


def kb_from_label(label: str, source: Optional[str] = None) -> KBProgram:
    """KB program with strat 0, no colour slot and the demo label as sched."""
    kb_label = KBLabel(strat=0, ack=ack_role(label), sched=_bits(label))
    return kb_program(kb_label, source)


def gossip_from_label(label: str, source: Optional[str] = None) -> GossipProgram:
    """
    GOSSIP program whose colour is the demo label.

    Delays come from the faithful prime policy, which depends on the
    encoding alone and so keeps each node a function of its own label
    and history.
    """
    gossip_label = GossipLabel(ack=ack_role(label), term=0, sched=_bits(label))
    return GossipProgram(gossip_label, source, FaithfulPrime())


def tn_from_label(label: str, source: Optional[str] = None) -> TnProgram:
    """``T_n`` program reading the last two bits of the demo label."""
    bits = format(label_value(label) % 4, "02b")
    return tn_program(TnLabel(bits), source)


PROGRAM_FAMILIES: Dict[str, ProgramFactory] = {
    "round-robin": RoundRobinByLabel,
    "flood": FloodOnReceive,
    "all-transmit": AllTransmit,
    "kb": kb_from_label,
    "gossip": gossip_from_label,
    "tn": tn_from_label,
}

# Families that run the package's own algorithms on demo labels.
ALGORITHM_FAMILIES = ("gossip", "kb", "tn")


def program_family(name: str) -> ProgramFactory:
    try:
        return PROGRAM_FAMILIES[name]
    except KeyError:
        raise ValueError(
            f"unknown program family {name!r}; choose from {sorted(PROGRAM_FAMILIES)}"
        ) from None
