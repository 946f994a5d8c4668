"""GOSSIP on trees: labeling, the Aggregate subroutine and its invariants.

Timeline on the coordinator's synchronised clock, with ``u = t - 3m``:

* rounds ``1..3m``: Initialize, a tree-mode B_bounded of ``"init"``; the
  first received hop counter is the node's distance ``dist``;
* odd ``u = 2a - 1``: Aggregate round ``a``; a non-coordinator transmits
  ``<known, enc, dist>`` whenever ``a`` is a multiple of its delay;
* even ``u``: the finish wave, started by the coordinator one round after
  the message marked ``last`` arrives and repeated two rounds later by
  every node that receives it;
* from ``u_last + 2m + 2``: Inform, a B_ack of the coordinator's
  knowledge; every node stops in its round ``2m``.

Label bit layout: bits 0-2 join/stay/ack, bit 3 term, then sched.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from .ack_broadcast import AckBits, BroadcastSession, SyncedProgram, label_ack_tree
from .encoding import Encoding, absorb_child_enc, enc_base, enc_combine
from .errors import GraphError, InvariantViolation, PreconditionError
from .graph_core import Coloring, Graph, RootedTreeView, rooted_view
from .messages import LISTEN, Action, Message, SourceSet
from .primes import DelayPolicy
from .radio_sim import NodeProgram, RunStatus, Trace, run
from .symmetry import distinguishing_number, subtree_forms

logger = logging.getLogger(__name__)

INIT = "init"
AGGREGATE = "aggregate"
FINISH = "finish"
INFORM = "inform"


@dataclass(frozen=True)
class GossipLabel:
    """Label of one node under the GOSSIP scheme."""
    ack: AckBits
    term: int
    sched: str

    def bits(self) -> str:
        return f"{self.ack.bits()}{self.term}{self.sched}"

    @property
    def colour(self) -> int:
        return int(self.sched, 2)

    def __len__(self) -> int:
        return len(self.bits())


@dataclass(frozen=True)
class GossipScheme:
    """Labels plus the decisions taken while computing them."""
    labels: Tuple[GossipLabel, ...]
    coordinator: int
    distinguishing_number: int
    colouring: Coloring
    term_node: int
    sources: SourceSet
    m: int

    @property
    def max_length(self) -> int:
        return max(len(label) for label in self.labels)

    def declared_bound(self) -> int:
        return gossip_label_bound(self.distinguishing_number)


def gossip_label_bound(d: int) -> int:
    """``4 + floor(log2 D) + 1``."""
    return 4 + d.bit_length()


@dataclass
class AggregateState:
    """Algorithm-2 variables of one node."""
    colour: int
    dist: int
    enc: Encoding
    children_encs: List[Encoding] = field(default_factory=list)
    delay: Optional[int] = None


def aggregate_round_of(u: int) -> Optional[int]:
    """Aggregate round run in stage-two round ``u``, if ``u`` is odd."""
    return (u + 1) // 2 if u > 0 and u % 2 == 1 else None


def next_transmission(u: int, delay: int) -> int:
    """First stage-two round from ``u`` on in which a node with ``delay`` transmits."""
    first = max(u, 1) // 2 + 1
    a = -(-first // delay) * delay
    return 2 * a - 1


class GossipProgram(SyncedProgram):
    """
    GOSSIP at one node.

    Args:
        label: Gossip label
        source: Source token, ``None`` for a blank message
        policy: Delay policy shared by every node of the run
    """

    def __init__(self, label: GossipLabel, source: Optional[str], policy: DelayPolicy):
        super().__init__(label.bits(), label.ack, source)
        self.gossip_label = label
        self.policy = policy
        self.m: Optional[int] = None
        self.state: Optional[AggregateState] = None
        self.has_last = bool(label.term)
        self.halted = False
        self.last_round: Optional[int] = None
        self.finish_round: Optional[int] = None
        self.inform_start: Optional[int] = None

    def wake(self, clock: int) -> None:
        super().wake(clock)
        if self.is_root:
            colour = self.gossip_label.colour
            self.state = AggregateState(colour, 0, enc_base(colour, 0))
            self.open_session(INIT, INIT, 1, bounded=True)

    @property
    def stage_two(self) -> Optional[int]:
        """Synchronised round preceding stage-two round 1."""
        return None if self.m is None else 3 * self.m

    def _learn_m(self, m: int) -> None:
        self.m = m
        if self.is_root and self.has_last:
            # Own message is the last one: behave as if it arrived in round 1.
            self._mark_last(1)

    def _mark_last(self, u: int) -> None:
        if self.last_round is not None:
            return
        self.last_round = u
        self.finish_round = u + 1
        self.inform_start = u + 2 * self.m + 2  # type: ignore[operator]

    def _stage_round(self, t: int) -> Optional[int]:
        base = self.stage_two
        return None if base is None or t <= base else t - base

    def _aggregate_message(self) -> Message:
        state = self.state
        return Message.create(
            AGGREGATE,
            known=frozenset(self.known),
            enc=state.enc,  # type: ignore[union-attr]
            dist=state.dist,  # type: ignore[union-attr]
            last=self.has_last,
        )

    def _transmits_aggregate(self, u: int) -> bool:
        if self.is_root or self.halted or self.state is None:
            return False
        a = aggregate_round_of(u)
        return a is not None and a % self.state.delay == 0  # type: ignore[operator]

    def decide(self, clock: int) -> Action:
        if self.delta is None:
            return LISTEN
        t = self.synced(clock)
        u = self._stage_round(t)
        if u is not None:
            if self.is_root and self.inform_start == u and INFORM not in self.sessions:
                self.open_session(
                    INFORM, INFORM, t, m=self.m, body={"known": frozenset(self.known)}
                )
            if self.finish_round == u:
                return Action.transmit(Message.create(FINISH))
            if self._transmits_aggregate(u):
                return Action.transmit(self._aggregate_message())
        message = self.pop_transmission(t)
        return Action.transmit(message) if message is not None else LISTEN

    def observe(self, clock: int, message: Message) -> None:
        self.sync_from(clock, message)
        t = self.synced(clock)
        if message.tag == AGGREGATE:
            self._absorb(t, message)
        elif message.tag == FINISH:
            self._on_finish(t)
        else:
            self._on_session(t, message)

    def _on_session(self, t: int, message: Message) -> None:
        name = message["session"]
        if name == INIT:
            session = self.session_of(message, INIT, bounded=True)
        else:
            session = self.session_of(message, INFORM, m=self.m)
        event = session.receive(t, message)
        if event == "broadcast":
            if session.kind == INIT:
                self._start_aggregate(session)
                if self.bits.is_acknowledger:
                    session.acknowledge()
            else:
                self.known.update(message.tokens())
                if self.bits.is_acknowledger:
                    session.acknowledge()
        elif event in ("ack", "bound") and session.kind == INIT:
            self._learn_m(session.m)  # type: ignore[arg-type]

    def _start_aggregate(self, session: BroadcastSession) -> None:
        dist = session.depth
        enc = enc_base(self.gossip_label.colour, dist)  # type: ignore[arg-type]
        colour = self.gossip_label.colour
        self.state = AggregateState(colour, dist, enc)  # type: ignore[arg-type]
        self.state.delay = self.policy.delay_for(enc)

    def _absorb(self, t: int, message: Message) -> None:
        state = self.state
        u = self._stage_round(t)
        if state is None or self.halted or u is None:
            return
        if message["dist"] != state.dist + 1:
            return
        self.known.update(message.tokens())
        state.children_encs = absorb_child_enc(state.children_encs, message["enc"])
        state.enc = enc_combine(state.colour, state.dist, state.children_encs)
        if not self.is_root:
            state.delay = self.policy.delay_for(state.enc)
        if message["last"]:
            self.has_last = True
            if self.is_root:
                self._mark_last(u)

    def _on_finish(self, t: int) -> None:
        u = self._stage_round(t)
        if self.halted or self.is_root or u is None:
            return
        self.halted = True
        self.finish_round = u + 2

    def conclude(self, clock: int) -> None:
        inform = self.sessions.get(INFORM)
        if inform is not None and inform.finished(self.synced(clock)):
            self.terminated = True
            self.acknowledged = True

    def next_active(self, clock: int) -> Optional[int]:
        if self.delta is None:
            return None
        t = self.synced(clock)
        candidates = [self.pending_round(t)]
        base = self.stage_two
        if base is not None:
            u = max(t - base, 1)
            if self.finish_round is not None:
                candidates.append(base + self.finish_round)
            if self.is_root and self.inform_start is not None:
                candidates.append(base + self.inform_start)
            if not self.is_root and not self.halted and self.state is not None:
                delay = self.state.delay or 1
                candidates.append(base + next_transmission(u, delay))
        inform = self.sessions.get(INFORM)
        if inform is not None:
            candidates.append(inform.end_synced)
        rounds = [r for r in candidates if r is not None and r >= t]
        return self.local(min(rounds)) if rounds else None

    def snapshot(self) -> Optional[Any]:
        state = self.state
        if state is None or (state.delay is None and not self.is_root):
            return None
        return (state.enc, state.delay, len(state.children_encs))


def gossip_programs(
    labels: Sequence[GossipLabel],
    sources: SourceSet,
    policy: DelayPolicy,
) -> List[NodeProgram]:
    tokens = sources.per_node(len(labels))
    return [GossipProgram(labels[v], tokens[v], policy) for v in range(len(labels))]


def _originator(sources: SourceSet, token: str) -> int:
    return sources.nodes[sources.tokens.index(token)]


def labeling_gossip(
    tree: Graph,
    policy: DelayPolicy,
    sources: Optional[SourceSet] = None,
    coordinator: int = 0,
    horizon: int = 1_000_000,
) -> GossipScheme:
    """
    Label ``tree`` for GOSSIP under ``policy``.

    The term bit goes to the node whose message reaches the coordinator
    last in a run of the term-less algorithm; ties go to the smallest
    originating node.

    Args:
        tree: Network, must be a tree
        policy: Delay policy; a fresh copy drives the labeling run
        sources: Sources, all nodes when omitted
        coordinator: Coordinator node
        horizon: Round limit of the labeling run

    Raises:
        GraphError: If ``tree`` is not a tree
        PreconditionError: If the labeling run cannot gather every message
    """
    if not tree.is_tree:
        raise GraphError("GOSSIP labels are defined on trees")
    n = tree.node_count
    sources = sources or SourceSet.everyone(n)
    sources.validate(n)
    ack_bits = label_ack_tree(tree, coordinator)
    d, colouring = distinguishing_number(tree)
    scheds = [format(colouring[v], "b") for v in range(n)]
    draft = tuple(GossipLabel(ack_bits[v], 0, scheds[v]) for v in range(n))

    expected = set(sources.tokens)
    programs = gossip_programs(draft, sources, policy.fresh())

    def root_knows_all(ps: Sequence[NodeProgram]) -> bool:
        return expected <= ps[coordinator].known

    trace = run(tree, programs, horizon=horizon, until=root_knows_all)
    if not expected <= trace.final_knowledge[coordinator]:
        raise PreconditionError(
            f"labeling run did not gather every message within {horizon} rounds"
        )
    arrivals = trace.acquisitions[coordinator]
    last = max(arrivals[token] for token in expected)
    term = min(_originator(sources, tok) for tok in expected if arrivals[tok] == last)
    labels = tuple(
        GossipLabel(ack_bits[v], int(v == term), scheds[v]) for v in range(n)
    )
    scheme = GossipScheme(
        labels=labels,
        coordinator=coordinator,
        distinguishing_number=d,
        colouring=colouring,
        term_node=term,
        sources=sources,
        m=rooted_view(tree, coordinator).height,
    )
    logger.info(
        "GOSSIP labels: D(G)=%d coordinator=%d term node=%d (last arrival round %d)",
        d,
        coordinator,
        term,
        last,
    )
    return scheme


def gossip_full(
    tree: Graph,
    scheme: GossipScheme,
    policy: DelayPolicy,
    horizon: int = 1_000_000,
    clock_offsets: Optional[Sequence[int]] = None,
    fast_forward: bool = True,
) -> Trace:
    """Run GOSSIP on a labeled tree; ``policy`` is copied fresh for the run."""
    programs = gossip_programs(scheme.labels, scheme.sources, policy.fresh())
    trace = run(tree, programs, clock_offsets, horizon, fast_forward)
    if trace.status is not RunStatus.TERMINATED:
        logger.warning(
            "GOSSIP stopped at round %d: %s", trace.final_round, trace.status.value
        )
    return trace


def run_gossip(
    tree: Graph,
    policy: DelayPolicy,
    sources: Optional[SourceSet] = None,
    horizon: int = 1_000_000,
    fast_forward: bool = True,
) -> Tuple[GossipScheme, Trace]:
    scheme = labeling_gossip(tree, policy, sources, horizon=horizon)
    return scheme, gossip_full(tree, scheme, policy, horizon, fast_forward=fast_forward)


# Invariant suite over recorded traces.

Snapshot = Tuple[Encoding, Optional[int], int]


def _timelines(trace: Trace) -> Dict[int, List[Tuple[int, Snapshot]]]:
    return {v: list(points) for v, points in trace.snapshots.items()}


def _state_at(points: List[Tuple[int, Snapshot]], t: int) -> Optional[Snapshot]:
    current = None
    for round_, snapshot in points:
        if round_ > t:
            break
        current = snapshot
    return current


def check_enc_monotonic(trace: Trace) -> int:
    """Every recorded encoding divides the next one. Returns the pairs checked."""
    checked = 0
    for v, points in _timelines(trace).items():
        for (t0, (e0, _, _)), (t1, (e1, _, _)) in zip(points, points[1:]):
            checked += 1
            if not e0.divides(e1):
                raise InvariantViolation(
                    "encoding monotonicity",
                    f"node {v}: round {t0} enc does not divide round {t1}",
                )
    return checked


def check_children_bound(trace: Trace, view: RootedTreeView) -> int:
    """Saved child encodings never outnumber the children."""
    checked = 0
    for v, points in _timelines(trace).items():
        for t, (_, _, count) in points:
            checked += 1
            if count > len(view.children[v]):
                raise InvariantViolation(
                    "children list bound",
                    f"node {v} stores {count} encodings at round {t}",
                )
    return checked


def check_ancestor_distinct(trace: Trace, view: RootedTreeView) -> int:
    """Ancestor and descendant never share an encoding or a delay."""
    timelines = _timelines(trace)
    rounds = sorted({t for points in timelines.values() for t, _ in points})
    checked = 0
    for t in rounds:
        states = {v: _state_at(points, t) for v, points in timelines.items()}
        for v, state in states.items():
            if state is None:
                continue
            for w in view.ancestors(v):
                other = states.get(w)
                if other is None:
                    continue
                checked += 1
                if state[0] == other[0]:
                    raise InvariantViolation(
                        "ancestor distinctness", f"nodes {v},{w} share enc at round {t}"
                    )
                if state[1] is not None and state[1] == other[1]:
                    raise InvariantViolation(
                        "ancestor distinctness",
                        f"nodes {v},{w} share delay at round {t}",
                    )
    return checked


def settle_rounds(
    trace: Trace, view: RootedTreeView, sources: SourceSet
) -> Dict[int, Optional[int]]:
    """
    Round from which each node is settled, ``None`` if it never is.

    A node is settled once its encoding never changes again and it holds
    the messages of its whole subtree.
    """
    result: Dict[int, Optional[int]] = {}
    for v in range(trace.node_count):
        points = trace.snapshots.get(v, [])
        stable = points[-1][0] if points else 0
        tokens = [sources.token_of(u) for u in view.subtree(v)]
        needed = [tok for tok in tokens if tok is not None]
        learned = trace.acquisitions.get(v, {})
        if any(tok not in learned for tok in needed):
            result[v] = None
            continue
        result[v] = max([stable] + [learned[tok] for tok in needed])
    return result


def check_settling(
    trace: Trace, view: RootedTreeView, sources: SourceSet
) -> Dict[int, int]:
    """Every node settles no later than the run's final round."""
    settled = settle_rounds(trace, view, sources)
    for v, t in settled.items():
        if t is None or t > trace.final_round:
            raise InvariantViolation("settling", f"node {v} never settles")
    return settled  # type: ignore[return-value]


def check_sibling_delays(trace: Trace, view: RootedTreeView) -> int:
    """Settled siblings end with different delays."""
    checked = 0
    for v in range(trace.node_count):
        kids = view.children[v]
        finals = {}
        for c in kids:
            points = trace.snapshots.get(c)
            if points:
                finals[c] = points[-1][1][1]
        for i, a in enumerate(kids):
            for b in kids[i + 1:]:
                if a in finals and b in finals:
                    checked += 1
                    if finals[a] == finals[b]:
                        raise InvariantViolation(
                            "sibling delays",
                            f"siblings {a},{b} share delay {finals[a]}",
                        )
    return checked


def check_equal_encodings(
    trace: Trace, view: RootedTreeView, colouring: Coloring
) -> int:
    """Nodes settled on equal encodings root colour-isomorphic subtrees."""
    forms = subtree_forms(view, colouring.colors)
    by_enc: Dict[Encoding, List[int]] = {}
    for v, points in trace.snapshots.items():
        if points and v != view.root:
            by_enc.setdefault(points[-1][1][0], []).append(v)
    checked = 0
    for enc, nodes in by_enc.items():
        for a in nodes[1:]:
            checked += 1
            if forms[a] != forms[nodes[0]]:
                raise InvariantViolation(
                    "equal encodings",
                    f"nodes {nodes[0]},{a} share {enc} with different subtrees",
                )
    return checked


def verify_gossip_trace(
    tree: Graph, scheme: GossipScheme, trace: Trace
) -> Dict[str, Any]:
    """
    Run the whole Aggregate invariant suite on ``trace``.

    Returns:
        Evidence record with the number of checks per invariant

    Raises:
        InvariantViolation: On the first failing check
    """
    view = rooted_view(tree, scheme.coordinator)
    settled = check_settling(trace, view, scheme.sources)
    evidence = {
        "encoding_monotonicity": check_enc_monotonic(trace),
        "children_bound": check_children_bound(trace, view),
        "ancestor_distinctness": check_ancestor_distinct(trace, view),
        "sibling_delays": check_sibling_delays(trace, view),
        "equal_encodings": check_equal_encodings(trace, view, scheme.colouring),
        "settle_rounds": {str(v): t for v, t in sorted(settled.items())},
        "final_round": trace.final_round,
    }
    logger.info("GOSSIP invariants hold on a %d-node tree", tree.node_count)
    return evidence


def observed_delays(trace: Trace) -> Dict[int, Set[Tuple[Encoding, int]]]:
    """Every ``(enc, delay)`` pair each non-coordinator ever used."""
    pairs: Dict[int, Set[Tuple[Encoding, int]]] = {}
    for v, points in trace.snapshots.items():
        for _, (enc, delay, _) in points:
            if delay is not None:
                pairs.setdefault(v, set()).add((enc, delay))
    return pairs
