"""Graph representation, distances, graph powers and colorings.

Node identifiers are dense integers ``0..n-1``. Graphs are immutable and
validated on construction: symmetric adjacency, no self-loops, connected.
"""

import logging
import random
from dataclasses import dataclass
from functools import cached_property
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
)

import networkx as nx

from .errors import GraphError, PreconditionError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Simple undirected connected graph."""
    node_count: int
    adjacency: Tuple[FrozenSet[int], ...]

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise GraphError("a graph needs at least one node")
        if len(self.adjacency) != self.node_count:
            raise GraphError(
                f"adjacency has {len(self.adjacency)} entries for "
                f"{self.node_count} nodes"
            )
        for v, neighbours in enumerate(self.adjacency):
            for u in neighbours:
                if not 0 <= u < self.node_count:
                    raise GraphError(f"node {v} has unknown neighbour {u}")
                if u == v:
                    raise GraphError(f"self-loop at node {v}")
                if v not in self.adjacency[u]:
                    raise GraphError(f"edge {v}-{u} is not symmetric")
        if len(bfs_order(self.adjacency, 0)) != self.node_count:
            raise GraphError("graph is not connected")

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Edge]) -> "Graph":
        """
        Build a graph from an edge list.

        Args:
            node_count: Number of nodes
            edges: Undirected edges as node pairs

        Returns:
            Validated graph

        Raises:
            GraphError: On duplicate edges, self-loops, unknown nodes or
                disconnected input
        """
        neighbours: List[Set[int]] = [set() for _ in range(max(node_count, 0))]
        for u, v in edges:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise GraphError(f"edge {u}-{v} references an unknown node")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if v in neighbours[u]:
                raise GraphError(f"duplicate edge {u}-{v}")
            neighbours[u].add(v)
            neighbours[v].add(u)
        return cls(node_count, tuple(frozenset(s) for s in neighbours))

    @classmethod
    def from_networkx(cls, graph: nx.Graph) -> "Graph":
        """Convert a networkx graph, relabelling nodes in sorted order."""
        nodes = sorted(graph.nodes())
        index = {node: i for i, node in enumerate(nodes)}
        return cls.from_edges(
            len(nodes), ((index[u], index[v]) for u, v in graph.edges())
        )

    @cached_property
    def nx_graph(self) -> nx.Graph:
        """Read-only networkx view used by the library algorithms."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(self.edges)
        return nx.freeze(graph)

    @cached_property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(
            (u, v)
            for u in range(self.node_count)
            for v in sorted(self.adjacency[u])
            if u < v
        )

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbours(self, v: int) -> FrozenSet[int]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max(len(s) for s in self.adjacency)

    @property
    def is_tree(self) -> bool:
        return self.edge_count == self.node_count - 1

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]


def bfs_order(adjacency: Sequence[FrozenSet[int]], start: int) -> List[int]:
    """Nodes reachable from ``start`` in breadth-first order."""
    seen = {start}
    order = [start]
    for v in order:
        for u in sorted(adjacency[v]):
            if u not in seen:
                seen.add(u)
                order.append(u)
    return order


@dataclass(frozen=True)
class RootedTreeView:
    """A tree oriented away from ``root``; children sorted ascending."""
    root: int
    parent: Tuple[Optional[int], ...]
    children: Tuple[Tuple[int, ...], ...]
    depth: Tuple[int, ...]

    @property
    def height(self) -> int:
        return max(self.depth)

    def ancestors(self, v: int) -> List[int]:
        """Proper ancestors of ``v``, nearest first."""
        result = []
        p = self.parent[v]
        while p is not None:
            result.append(p)
            p = self.parent[p]
        return result

    def subtree(self, v: int) -> List[int]:
        """Nodes of the subtree rooted at ``v`` in breadth-first order."""
        order = [v]
        for u in order:
            order.extend(self.children[u])
        return order

    def deepest(self) -> int:
        """Smallest identifier among the nodes at maximum depth."""
        height = self.height
        return min(v for v, d in enumerate(self.depth) if d == height)


def rooted_view(tree: Graph, root: int) -> RootedTreeView:
    """
    Orient a tree away from ``root``.

    Args:
        tree: Tree to orient
        root: Root node

    Returns:
        Rooted view with parents, sorted children and depths

    Raises:
        GraphError: If ``tree`` is not a tree
    """
    if not tree.is_tree:
        raise GraphError("rooted views require a tree")
    depth = bfs_distances(tree, root)
    parent: List[Optional[int]] = [None] * tree.node_count
    children: List[List[int]] = [[] for _ in range(tree.node_count)]
    for v in range(tree.node_count):
        for u in tree.adjacency[v]:
            if depth[u] == depth[v] - 1:
                parent[v] = u
                children[u].append(v)
    return RootedTreeView(
        root=root,
        parent=tuple(parent),
        children=tuple(tuple(sorted(c)) for c in children),
        depth=tuple(depth),
    )


@dataclass(frozen=True)
class Coloring:
    """Node colouring with colours drawn from ``1..color_count``."""
    colors: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 1 for c in self.colors):
            raise PreconditionError("colours must be positive integers")

    @classmethod
    def uniform(cls, node_count: int, color: int = 1) -> "Coloring":
        return cls(tuple([color] * node_count))

    @property
    def color_count(self) -> int:
        return max(self.colors)

    def __getitem__(self, v: int) -> int:
        return self.colors[v]

    def __len__(self) -> int:
        return len(self.colors)


@dataclass(frozen=True)
class Permutation:
    """Bijection on node identifiers."""
    mapping: Tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise PreconditionError(f"not a bijection: {self.mapping}")

    @classmethod
    def identity(cls, node_count: int) -> "Permutation":
        return cls(tuple(range(node_count)))

    @classmethod
    def from_dict(cls, mapping: Mapping[int, int]) -> "Permutation":
        return cls(tuple(mapping[v] for v in range(len(mapping))))

    def __call__(self, v: int) -> int:
        return self.mapping[v]

    def __len__(self) -> int:
        return len(self.mapping)

    @property
    def is_identity(self) -> bool:
        return all(v == image for v, image in enumerate(self.mapping))

    @property
    def moved(self) -> Tuple[int, ...]:
        return tuple(v for v, image in enumerate(self.mapping) if v != image)

    def compose(self, other: "Permutation") -> "Permutation":
        """The permutation ``v -> self(other(v))``."""
        return Permutation(tuple(self.mapping[image] for image in other.mapping))

    def inverse(self) -> "Permutation":
        inverse = [0] * len(self.mapping)
        for v, image in enumerate(self.mapping):
            inverse[image] = v
        return Permutation(tuple(inverse))


def bfs_distances(g: Graph, src: int) -> List[int]:
    """
    Hop distances from ``src`` to every node.

    Args:
        g: Graph
        src: Source node

    Returns:
        List indexed by node identifier
    """
    lengths = nx.single_source_shortest_path_length(g.nx_graph, src)
    return [lengths[v] for v in range(g.node_count)]


def eccentricities(g: Graph) -> List[int]:
    ecc = nx.eccentricity(g.nx_graph)
    return [ecc[v] for v in range(g.node_count)]


def center(g: Graph) -> FrozenSet[int]:
    """Nodes of minimum eccentricity."""
    return frozenset(nx.center(g.nx_graph))


def square_graph(g: Graph) -> Graph:
    """Graph on the same nodes joining every pair at distance one or two."""
    return Graph.from_networkx(nx.power(g.nx_graph, 2))


def greedy_coloring(g: Graph, order: Sequence[int]) -> Coloring:
    """
    Greedy proper colouring visiting nodes in ``order``.

    Each node receives the smallest positive colour not used by an already
    coloured neighbour.

    Args:
        g: Graph to colour
        order: Permutation of all nodes

    Returns:
        Proper colouring with at most ``max_degree + 1`` colours

    Raises:
        PreconditionError: If ``order`` is not a permutation of the nodes
    """
    order = list(order)
    if sorted(order) != list(range(g.node_count)):
        raise PreconditionError("order must list every node exactly once")
    assigned = nx.greedy_color(
        g.nx_graph, strategy=lambda graph, colors: iter(order)
    )
    return Coloring(tuple(assigned[v] + 1 for v in range(g.node_count)))


def distance_two_coloring(g: Graph) -> Coloring:
    """Greedy colouring of the square graph in ascending node order."""
    return greedy_coloring(square_graph(g), range(g.node_count))


# Generators


def path_graph(node_count: int) -> Graph:
    return Graph.from_edges(node_count, ((v, v + 1) for v in range(node_count - 1)))


def star_graph(leaves: int) -> Graph:
    """Star with hub ``0`` and leaves ``1..leaves``."""
    return Graph.from_edges(leaves + 1, ((0, v) for v in range(1, leaves + 1)))


def complete_graph(node_count: int) -> Graph:
    return Graph.from_networkx(nx.complete_graph(node_count))


def cycle_graph(node_count: int) -> Graph:
    if node_count < 3:
        raise GraphError("cycles need at least three nodes")
    return Graph.from_networkx(nx.cycle_graph(node_count))


def random_tree(node_count: int, seed: int) -> Graph:
    """
    Uniform random labelled tree from a seeded Prüfer sequence.

    The sequence is drawn with ``random.Random(seed).randrange(node_count)``
    repeated ``node_count - 2`` times and decoded by networkx.

    Args:
        node_count: Number of nodes
        seed: PRNG seed

    Returns:
        Tree on ``node_count`` nodes
    """
    if node_count < 1:
        raise GraphError("a tree needs at least one node")
    if node_count == 1:
        return Graph(1, (frozenset(),))
    if node_count == 2:
        return path_graph(2)
    rng = random.Random(seed)
    sequence = [rng.randrange(node_count) for _ in range(node_count - 2)]
    return Graph.from_networkx(nx.from_prufer_sequence(sequence))


def random_connected_graph(
    node_count: int, seed: int, extra_edges: Optional[int] = None
) -> Graph:
    """
    Seeded random connected graph: a random tree plus extra edges.

    Args:
        node_count: Number of nodes
        seed: PRNG seed
        extra_edges: Number of non-tree edges (random when omitted)

    Returns:
        Connected graph
    """
    tree = random_tree(node_count, seed)
    rng = random.Random(seed + 1)
    candidates = [
        (u, v)
        for u in range(node_count)
        for v in range(u + 1, node_count)
        if not tree.has_edge(u, v)
    ]
    if extra_edges is None:
        extra_edges = rng.randint(0, min(len(candidates), node_count))
    extra = rng.sample(candidates, min(extra_edges, len(candidates)))
    return Graph.from_edges(node_count, list(tree.edges) + sorted(extra))


def enumerate_trees(node_count: int) -> Iterator[Graph]:
    """All trees on ``node_count`` nodes up to isomorphism."""
    if node_count == 1:
        yield Graph(1, (frozenset(),))
        return
    for tree in nx.nonisomorphic_trees(node_count):
        yield Graph.from_networkx(tree)


# Text formats


def parse_graph(text: str) -> Graph:
    """
    Parse the ``n m`` header followed by ``m`` edge lines.

    Args:
        text: Graph text

    Returns:
        Parsed graph

    Raises:
        GraphError: If the text is malformed
    """
    lines = [line.split() for line in text.splitlines() if line.strip()]
    if not lines or len(lines[0]) != 2:
        raise GraphError("first line must be 'n m'")
    try:
        node_count, edge_count = (int(x) for x in lines[0])
        edges = [(int(u), int(v)) for u, v in lines[1:]]
    except ValueError as e:
        raise GraphError(f"malformed graph text: {e}")
    if len(edges) != edge_count:
        raise GraphError(f"header announces {edge_count} edges, found {len(edges)}")
    return Graph.from_edges(node_count, edges)


def format_graph(g: Graph) -> str:
    lines = [f"{g.node_count} {g.edge_count}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def format_node_values(values: Sequence[object]) -> str:
    """One ``id value`` line per node."""
    return "".join(f"{v} {value}\n" for v, value in enumerate(values))


def parse_node_values(text: str) -> Dict[int, str]:
    result: Dict[int, str] = {}
    for line in text.splitlines():
        if line.strip():
            node, value = line.split(maxsplit=1)
            result[int(node)] = value.strip()
    return result
