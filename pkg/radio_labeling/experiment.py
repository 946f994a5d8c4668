"""Label, run and verify one scenario."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .ack_broadcast import (
    BroadcastResult,
    label_ack_general,
    label_ack_tree,
    predicted_m,
    run_broadcast,
)
from .artifacts import ArtifactStore
from .config import SimulationSettings
from .demo_programs import program_family
from .errors import InvariantViolation, LimitExceededError
from .graph_core import Graph
from .kb import KBScheme, kb_program, labeling_kb
from .messages import SourceSet
from .primes import DelayPolicy, make_policy
from .radio_sim import NodeProgram, RunStatus, Trace, run
from .run_state import RunStage, RunState
from .scenario import Algorithm, Scenario, prepare
from .symmetry import distinguishing_number
from .tn_family import TnSpec, build_tn, check_tn_trace, tn_program
from .tree_gossip import (
    GossipScheme,
    gossip_full,
    labeling_gossip,
    verify_gossip_trace,
)
from .verify_oracles import (
    CompletionReport,
    check_collision_soundness,
    check_completion,
    harmful_collisions,
    label_length_report,
)

logger = logging.getLogger(__name__)

BROADCAST_TOKEN = "mu"


@dataclass
class Labeling:
    """Labels of one scenario plus what the scheme decided."""
    labels: List[str]
    metadata: Dict[str, Any]
    bounds: Dict[str, int] = field(default_factory=dict)
    scheme: Any = None


@dataclass
class ExperimentResult:
    """Everything one scenario produced."""
    name: str
    state: RunState
    labeling: Optional[Labeling] = None
    trace: Optional[Trace] = None
    completion: Optional[CompletionReport] = None
    evidence: Dict[str, Any] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        """0 when solved and verified, 1 when unsolved, 2 on a violation."""
        if not self.state.can_proceed():
            return 2
        if self.completion is None or not self.completion.solved:
            return 1
        return 0


class ExperimentRunner:
    def __init__(
        self,
        scenario: Scenario,
        output_dir: Optional[Path] = None,
        settings: Optional[SimulationSettings] = None,
    ):
        """
        Prepare one scenario.

        Args:
            scenario: Validated scenario
            output_dir: Artifact directory; nothing is written when omitted
            settings: Defaults for values the scenario leaves open
        """
        self.scenario = scenario
        self.settings = settings or SimulationSettings()
        self.store = ArtifactStore(output_dir) if output_dir is not None else None
        self.state = RunState()
        self.graph: Graph
        self.tn_spec: Optional[TnSpec]
        self.sources: SourceSet
        self.graph, self.tn_spec, self.sources = prepare(scenario)
        self.horizon = scenario.horizon or self.settings.horizon
        self.policy_mode = scenario.policy or self.settings.policy
        self.fast_forward = (
            self.settings.fast_forward
            if scenario.fast_forward is None
            else scenario.fast_forward
        )
        self.state.state.horizon = self.horizon
        self.broadcast: Optional[BroadcastResult] = None
        self._policy: Optional[DelayPolicy] = None
        self.completion: Optional[CompletionReport] = None

    @property
    def policy(self) -> DelayPolicy:
        if self._policy is None:
            bound = self.scenario.prime_bound or self.settings.prime_bound
            self._policy = make_policy(self.policy_mode, bound)
        return self._policy

    @property
    def root(self) -> int:
        return self.scenario.coordinator or 0

    def network_distinguishing_number(self) -> Optional[int]:
        """
        Distinguishing number of the network.

        Non-tree graphs above the configured brute-force limit give ``None``.
        """
        try:
            d, _ = distinguishing_number(self.graph, self.settings.brute_force_limit)
        except LimitExceededError as e:
            logger.warning("Distinguishing number skipped: %s", str(e))
            return None
        return d

    def label(self) -> Labeling:
        """Apply the scenario's labeling scheme."""
        self.state.update_state(RunStage.LABELING)
        try:
            labeling = self._label()
        except Exception as e:
            logger.error("Labeling failed: %s", str(e))
            self.state.update_state(RunStage.LABELING, error=f"Labeling failed: {e}")
            raise
        if self.store is not None:
            self.state.add_artifact("labels", self.store.store_labels(labeling.labels))
            self.state.add_artifact(
                "labels_meta", self.store.store_json(labeling.metadata, "labels.json")
            )
        return labeling

    def _label(self) -> Labeling:
        algorithm = self.scenario.algorithm
        g = self.graph
        if algorithm is Algorithm.KB:
            kb: KBScheme = labeling_kb(g, self.sources, self.scenario.coordinator)
            return Labeling(
                [label.bits() for label in kb.labels],
                {
                    "scheme": "kb",
                    "strat": kb.strat,
                    "coordinator": kb.coordinator,
                    "k": self.sources.k,
                    "m": kb.m,
                    "tree_mode": kb.tree_mode,
                    "sched_width": max(len(label.sched) for label in kb.labels),
                },
                {"kb": kb.declared_bound()},
                kb,
            )
        if algorithm is Algorithm.GOSSIP:
            gossip: GossipScheme = labeling_gossip(
                g, self.policy, self.sources, self.root, self.horizon
            )
            return Labeling(
                [label.bits() for label in gossip.labels],
                {
                    "scheme": "gossip",
                    "distinguishing_number": gossip.distinguishing_number,
                    "coordinator": gossip.coordinator,
                    "term_node": gossip.term_node,
                    "m": gossip.m,
                    "policy": self.policy.mode.value,
                },
                {"gossip": gossip.declared_bound()},
                gossip,
            )
        if algorithm is Algorithm.TN:
            _, spec, labels = build_tn(self.tn_spec.x)  # type: ignore[union-attr]
            return Labeling(
                [label.value for label in labels],
                {"scheme": "tn", "x": spec.x, "n": spec.n},
                {"tn": 2},
                labels,
            )
        if algorithm is Algorithm.BROADCAST:
            if g.is_tree:
                bits, slots = label_ack_tree(g, self.root), None
                labels = [b.bits() for b in bits]
            else:
                bits, slots = label_ack_general(g, self.root)
                labels = [b.bits() + s.bits() for b, s in zip(bits, slots)]
            return Labeling(
                labels,
                {
                    "scheme": "broadcast",
                    "variant": self.scenario.broadcast_variant,
                    "coordinator": self.root,
                    "m": predicted_m(g, self.root, slots),
                },
            )
        labels = [format(v + 1, "b") for v in range(g.node_count)]
        return Labeling(
            labels, {"scheme": "distinct", "program": self.scenario.program}
        )

    def simulate(self, labeling: Labeling) -> Trace:
        """Run the scenario's algorithm on its labels."""
        self.state.update_state(RunStage.SIMULATION)
        try:
            trace = self._simulate(labeling)
        except Exception as e:
            logger.error("Simulation failed: %s", str(e))
            self.state.update_state(
                RunStage.SIMULATION, error=f"Simulation failed: {e}"
            )
            raise
        self.state.update_state(
            RunStage.SIMULATION, processed_rounds=trace.stats.processed_rounds
        )
        if self.store is not None:
            self.state.add_artifact(
                "trace", self.store.store_json(trace.to_jsonable(), "trace.json")
            )
        return trace

    def _simulate(self, labeling: Labeling) -> Trace:
        scenario = self.scenario
        algorithm = scenario.algorithm
        g = self.graph
        offsets = scenario.clock_offsets
        if algorithm is Algorithm.GOSSIP:
            return gossip_full(
                g,
                labeling.scheme,
                self.policy,
                self.horizon,
                offsets,
                self.fast_forward,
            )
        if algorithm is Algorithm.BROADCAST:
            self.broadcast = run_broadcast(
                g,
                self.root,
                scenario.broadcast_variant,
                m=labeling.metadata["m"],
                horizon=self.horizon,
                fast_forward=self.fast_forward,
            )
            self.sources = SourceSet((self.root,), (BROADCAST_TOKEN,))
            return self.broadcast.trace
        tokens = self.sources.per_node(g.node_count)
        programs: List[NodeProgram]
        if algorithm is Algorithm.KB:
            programs = [
                kb_program(label, tokens[v])
                for v, label in enumerate(labeling.scheme.labels)
            ]
        elif algorithm is Algorithm.TN:
            programs = [
                tn_program(label, tokens[v]) for v, label in enumerate(labeling.scheme)
            ]
        else:
            factory = program_family(scenario.program)  # type: ignore[arg-type]
            programs = [
                factory(label, tokens[v]) for v, label in enumerate(labeling.labels)
            ]
        return run(g, programs, offsets, self.horizon, self.fast_forward)

    def verify(self, labeling: Labeling, trace: Trace) -> Dict[str, Any]:
        """
        Run the invariant suites that apply to the scenario.

        Raises:
            InvariantViolation: On the first failing property
        """
        self.state.update_state(RunStage.VERIFICATION)
        try:
            evidence = self._verify(labeling, trace)
        except Exception as e:
            logger.error("Verification failed: %s", str(e))
            self.state.update_state(RunStage.VERIFICATION, error=str(e))
            raise
        if self.store is not None:
            self.state.add_artifact(
                "evidence", self.store.store_json(evidence, "evidence.json")
            )
        return evidence

    def _verify(self, labeling: Labeling, trace: Trace) -> Dict[str, Any]:
        algorithm = self.scenario.algorithm
        evidence: Dict[str, Any] = {
            "scenario": self.scenario.name,
            "collision_soundness": check_collision_soundness(self.graph, trace),
        }
        report = label_length_report(labeling.labels, labeling.bounds)
        evidence["label_lengths"] = report.to_jsonable()
        for name, bound in labeling.bounds.items():
            exact = algorithm in (Algorithm.KB, Algorithm.GOSSIP, Algorithm.TN)
            if (exact and report.max_bits != bound) or report.max_bits > bound:
                raise InvariantViolation(
                    "label length",
                    f"{name}: measured {report.max_bits}, declared {bound}",
                )
        if algorithm is Algorithm.TN:
            evidence["tn_schedule"] = check_tn_trace(
                self.graph, self.tn_spec, trace  # type: ignore[arg-type]
            )
        elif algorithm is Algorithm.GOSSIP:
            evidence["gossip_invariants"] = verify_gossip_trace(
                self.graph, labeling.scheme, trace
            )
        elif algorithm is Algorithm.BROADCAST:
            evidence["broadcast"] = self._verify_broadcast()
        return evidence

    def _verify_broadcast(self) -> Dict[str, Any]:
        result = self.broadcast
        assert result is not None
        late = [
            v
            for v, t in enumerate(result.reception_rounds)
            if t is None or t > result.m
        ]
        if late:
            raise InvariantViolation(
                "broadcast bound", f"nodes {late} informed after m"
            )
        harmful = harmful_collisions(result.trace, BROADCAST_TOKEN)
        if harmful:
            raise InvariantViolation("harmful collisions", f"rounds {harmful}")
        return {
            "m": result.m,
            "t_done": result.t_done,
            "ack_round": result.ack_round,
            "reception_rounds": list(result.reception_rounds),
        }

    def metrics_row(self, labeling: Labeling, trace: Trace) -> Dict[str, Any]:
        metrics = trace.metrics()
        completion = self.completion
        harmful = 0
        if self.sources.k == 1:
            harmful = len(harmful_collisions(trace, self.sources.tokens[0]))
        return {
            "scenario": self.scenario.name,
            "algorithm": self.scenario.algorithm.value,
            "nodes": self.graph.node_count,
            "status": trace.status.value,
            "rounds": metrics.rounds,
            "active_rounds": metrics.active_rounds,
            "processed_rounds": trace.stats.processed_rounds,
            "transmissions": metrics.transmissions,
            "deliveries": metrics.deliveries,
            "collisions": metrics.collisions,
            "harmful_collisions": harmful,
            "max_message_bytes": metrics.max_message_bytes,
            "max_label_bits": max(len(label) for label in labeling.labels),
            "solved": completion.solved if completion else False,
            "completion_round": completion.completion_round if completion else None,
        }

    def execute(self, verify: bool = True) -> ExperimentResult:
        """
        Label, simulate and optionally verify the scenario.

        Failures are recorded in the returned state rather than raised.
        """
        result = ExperimentResult(self.scenario.name, self.state)
        self.completion = None
        try:
            labeling = result.labeling = self.label()
            trace = result.trace = self.simulate(labeling)
            self.completion = result.completion = check_completion(trace, self.sources)
            if self.store is not None:
                self.state.add_artifact(
                    "trace_completion",
                    self.store.store_json(
                        self.completion.to_jsonable(), "completion.json"
                    ),
                )
            if verify:
                result.evidence = self.verify(labeling, trace)
            result.metrics = self.metrics_row(labeling, trace)
            if self.store is not None:
                self.state.add_artifact(
                    "trace_metrics", self.store.store_metrics([result.metrics])
                )
            if trace.status is RunStatus.EXHAUSTED:
                logger.warning("Horizon %d exhausted", self.horizon)
            self.state.update_state(RunStage.COMPLETED)
        except Exception as e:
            if self.state.can_proceed():
                self.state.update_state(self.state.state.stage, error=str(e))
            self._handle_failure()
        return result

    def _handle_failure(self) -> None:
        last_stage = self.state.get_last_successful_stage()
        logger.error(
            "Scenario %s failed at %s. Last successful stage: %s. Error: %s",
            self.scenario.name,
            self.state.state.stage.value,
            last_stage.value,
            self.state.state.error,
        )
