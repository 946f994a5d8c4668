"""Scenario files: which graph, which sources, which algorithm."""

import json
import logging
import random
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from .config import PolicyMode
from .errors import GraphError, ScenarioError
from .graph_core import (
    Graph,
    complete_graph,
    cycle_graph,
    parse_graph,
    path_graph,
    random_connected_graph,
    random_tree,
    star_graph,
)
from .messages import SourceSet
from .tn_family import TnSpec, build_tn

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class GraphKind(str, Enum):
    FILE = "file"
    RANDOM_TREE = "random-tree"
    RANDOM_CONNECTED = "random-connected"
    COMPLETE = "complete"
    TN = "tn"
    STAR = "star"
    PATH = "path"
    CYCLE = "cycle"


class Algorithm(str, Enum):
    KB = "kb"
    GOSSIP = "gossip"
    TN = "tn"
    BROADCAST = "broadcast"
    CUSTOM = "custom"


class GraphSource(BaseModel):
    """
    Where the network comes from.

    ``size`` is the node count, except for ``star`` (number of leaves) and
    ``tn`` (the path count ``x``).
    """

    kind: GraphKind
    size: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    extra_edges: Optional[int] = Field(default=None, ge=0)
    path: Optional[Path] = None

    @model_validator(mode="after")
    def _complete(self) -> "GraphSource":
        if self.kind is GraphKind.FILE and self.path is None:
            raise ValueError("file graphs need a path")
        if self.kind is not GraphKind.FILE and self.size is None:
            raise ValueError(f"{self.kind.value} graphs need a size")
        return self


class SourceCount(BaseModel):
    """``count`` sources drawn with a seeded PRNG."""

    count: int = Field(ge=1)
    seed: int = 0


class Scenario(BaseModel):
    """One reproducible experiment."""

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    graph: GraphSource
    sources: Union[Literal["all"], List[int], SourceCount] = "all"
    algorithm: Algorithm
    program: Optional[str] = None
    broadcast_variant: Literal["ack", "bounded", "des"] = "bounded"
    policy: Optional[PolicyMode] = None
    prime_bound: Optional[int] = Field(default=None, ge=1)
    horizon: Optional[int] = Field(default=None, ge=1)
    clock_offsets: Optional[List[int]] = None
    coordinator: Optional[int] = Field(default=None, ge=0)
    fast_forward: Optional[bool] = None

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        if self.algorithm is Algorithm.TN and self.graph.kind is not GraphKind.TN:
            raise ValueError("the tn algorithm runs on tn graphs only")
        if self.algorithm is Algorithm.CUSTOM and not self.program:
            raise ValueError("custom algorithms need a program family")
        if self.algorithm is Algorithm.TN and self.sources != "all":
            raise ValueError("the tn algorithm gossips: sources must be 'all'")
        return self


def load_scenario(path: Path) -> Scenario:
    """
    Read and validate a scenario file.

    Raises:
        ScenarioError: If the file is missing, not JSON or inconsistent
    """
    try:
        data = json.loads(Path(path).read_text())
        return Scenario.model_validate(data)
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        logger.error("Invalid scenario %s: %s", path, str(e))
        raise ScenarioError(f"invalid scenario {path}: {e}") from e


def build_graph(source: GraphSource) -> Tuple[Graph, Optional[TnSpec]]:
    """The scenario's network, plus the T_n roles for ``tn`` graphs."""
    size = source.size or 0
    kind = source.kind
    if kind is GraphKind.FILE:
        try:
            return parse_graph(Path(source.path).read_text()), None  # type: ignore
        except OSError as e:
            raise ScenarioError(f"cannot read graph file: {e}") from e
    if kind is GraphKind.TN:
        g, spec, _ = build_tn(size)
        return g, spec
    builders = {
        GraphKind.RANDOM_TREE: lambda: random_tree(size, source.seed),
        GraphKind.RANDOM_CONNECTED: lambda: random_connected_graph(
            size, source.seed, source.extra_edges
        ),
        GraphKind.COMPLETE: lambda: complete_graph(size),
        GraphKind.STAR: lambda: star_graph(size),
        GraphKind.PATH: lambda: path_graph(size),
        GraphKind.CYCLE: lambda: cycle_graph(size),
    }
    return builders[kind](), None


def resolve_sources(scenario: Scenario, node_count: int) -> SourceSet:
    """
    The scenario's source set on a graph with ``node_count`` nodes.

    Counted sources are ``random.Random(seed).sample(range(n), count)`` in
    draw order, which is also their index order.
    """
    chosen = scenario.sources
    if chosen == "all":
        return SourceSet.everyone(node_count)
    if isinstance(chosen, SourceCount):
        if chosen.count > node_count:
            raise ScenarioError(f"{chosen.count} sources on {node_count} nodes")
        nodes = random.Random(chosen.seed).sample(range(node_count), chosen.count)
        return SourceSet.of(nodes)
    try:
        sources = SourceSet.of(chosen)  # type: ignore[arg-type]
        sources.validate(node_count)
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    return sources


def prepare(scenario: Scenario) -> Tuple[Graph, Optional[TnSpec], SourceSet]:
    """Build the graph and sources, checking what depends on the graph."""
    try:
        g, spec = build_graph(scenario.graph)
    except GraphError as e:
        raise ScenarioError(f"cannot build graph: {e}") from e
    if scenario.algorithm is Algorithm.GOSSIP and not g.is_tree:
        raise ScenarioError("gossip requires a tree")
    offsets = scenario.clock_offsets
    if offsets is not None and len(offsets) != g.node_count:
        raise ScenarioError("clock offsets must list one value per node")
    if scenario.coordinator is not None and scenario.coordinator >= g.node_count:
        raise ScenarioError(f"coordinator {scenario.coordinator} is not a node")
    return g, spec, resolve_sources(scenario, g.node_count)
