"""Automorphisms, coloured canonical forms and distinguishing colourings.

Trees are handled through AHU-style canonical forms rooted at the centre,
which every automorphism fixes (as a node or as an edge). Other graphs fall
back to exhaustive search guarded by a node-count limit.
"""

import itertools
import logging
from dataclasses import dataclass
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
from networkx.algorithms.isomorphism import GraphMatcher

from .errors import InvariantViolation, LimitExceededError, PreconditionError
from .graph_core import Coloring, Graph, Permutation, RootedTreeView, center

logger = logging.getLogger(__name__)

DEFAULT_BRUTE_FORCE_LIMIT = 10

NodeMap = Dict[int, int]


class _FormTable:
    """Interns canonical forms so equal subtrees share an integer id."""

    def __init__(self) -> None:
        self._ids: Dict[Tuple[int, Tuple[int, ...]], int] = {}

    def intern(self, colour: int, child_forms: Sequence[int]) -> int:
        key = (colour, tuple(sorted(child_forms)))
        return self._ids.setdefault(key, len(self._ids))


@dataclass
class _Half:
    """A tree half oriented away from its anchor node."""
    root: int
    order: List[int]
    children: Dict[int, List[int]]
    forms: Dict[int, int]


def _orient(tree: Graph, root: int, blocked: Optional[int]) -> Tuple[
    List[int], Dict[int, List[int]]
]:
    order = [root]
    children: Dict[int, List[int]] = {}
    parent = {root: blocked}
    for v in order:
        kids = sorted(u for u in tree.adjacency[v] if u != parent[v])
        children[v] = kids
        for u in kids:
            parent[u] = v
            order.append(u)
    return order, children


def _halves(
    tree: Graph, colors: Optional[Sequence[int]], table: _FormTable
) -> List[_Half]:
    anchors = sorted(center(tree))
    if len(anchors) == 1:
        pairs = [(anchors[0], None)]
    else:
        a, b = anchors
        pairs = [(a, b), (b, a)]
    halves = []
    for root, blocked in pairs:
        order, children = _orient(tree, root, blocked)
        forms: Dict[int, int] = {}
        for v in reversed(order):
            colour = colors[v] if colors is not None else 0
            forms[v] = table.intern(colour, [forms[c] for c in children[v]])
        halves.append(_Half(root, order, children, forms))
    return halves


def subtree_forms(
    view: RootedTreeView, colors: Optional[Sequence[int]]
) -> List[int]:
    """
    Canonical form id of every rooted subtree of ``view``.

    Two nodes share an id iff their subtrees are isomorphic by an
    isomorphism preserving ``colors`` (when given).
    """
    table = _FormTable()
    order = [view.root]
    for v in order:
        order.extend(view.children[v])
    forms = [0] * len(view.depth)
    for v in reversed(order):
        colour = colors[v] if colors is not None else 0
        forms[v] = table.intern(colour, [forms[c] for c in view.children[v]])
    return forms


def _group(children: Sequence[int], forms: Dict[int, int]) -> Dict[int, List[int]]:
    groups: Dict[int, List[int]] = {}
    for child in children:
        groups.setdefault(forms[child], []).append(child)
    return dict(sorted(groups.items()))


def _isomorphisms(
    u: int, v: int, forms: Dict[int, int], children: Dict[int, List[int]]
) -> Iterator[NodeMap]:
    """All isomorphisms between the rooted subtrees at ``u`` and ``v``."""
    options: List[List[NodeMap]] = []
    targets = _group(children[v], forms)
    for form, sources in _group(children[u], forms).items():
        choices: List[NodeMap] = []
        for perm in itertools.permutations(targets[form]):
            parts = [
                list(_isomorphisms(a, b, forms, children))
                for a, b in zip(sources, perm)
            ]
            for combo in itertools.product(*parts):
                merged: NodeMap = {}
                for part in combo:
                    merged.update(part)
                choices.append(merged)
        options.append(choices)
    for combo in itertools.product(*options):
        mapping = {u: v}
        for part in combo:
            mapping.update(part)
        yield mapping


def _tree_automorphisms(tree: Graph) -> Iterator[Permutation]:
    halves = _halves(tree, None, _FormTable())
    forms: Dict[int, int] = {}
    children: Dict[int, List[int]] = {}
    for half in halves:
        forms.update(half.forms)
        children.update(half.children)

    if len(halves) == 1:
        c = halves[0].root
        for mapping in _isomorphisms(c, c, forms, children):
            yield Permutation.from_dict(mapping)
        return

    a, b = halves[0].root, halves[1].root
    pairs = [((a, a), (b, b))]
    if forms[a] == forms[b]:
        pairs.append(((a, b), (b, a)))
    for (x, y), (w, z) in pairs:
        for left in _isomorphisms(x, y, forms, children):
            for right in _isomorphisms(w, z, forms, children):
                yield Permutation.from_dict({**left, **right})


def is_automorphism(g: Graph, p: Permutation) -> bool:
    """True iff ``p`` preserves adjacency in both directions."""
    if len(p) != g.node_count:
        raise PreconditionError("permutation size does not match the graph")
    return all(g.has_edge(p(u), p(v)) for u, v in g.edges)


def enumerate_automorphisms(
    g: Graph, limit: int = DEFAULT_BRUTE_FORCE_LIMIT
) -> List[Permutation]:
    """
    The automorphism group of ``g``, identity first.

    Permutations are ordered by the number of nodes they move.

    Args:
        g: Graph
        limit: Node-count bound for non-tree graphs

    Returns:
        Every automorphism exactly once

    Raises:
        LimitExceededError: For non-tree graphs above ``limit`` nodes
    """
    if g.is_tree:
        found = list(_tree_automorphisms(g))
    else:
        if g.node_count > limit:
            raise LimitExceededError(
                f"automorphism search limited to {limit} nodes, got {g.node_count}"
            )
        matcher = GraphMatcher(g.nx_graph, g.nx_graph)
        found = [Permutation.from_dict(m) for m in matcher.isomorphisms_iter()]
    return sorted(found, key=lambda p: (len(p.moved), p.mapping))


def preserves(p: Permutation, coloring: Coloring) -> bool:
    return all(coloring[p(v)] == coloring[v] for v in p.moved)


def is_distinguishing(
    g: Graph, coloring: Coloring, limit: int = DEFAULT_BRUTE_FORCE_LIMIT
) -> bool:
    """
    True iff no non-trivial automorphism preserves ``coloring``.

    Args:
        g: Graph
        coloring: Total colouring of the nodes
        limit: Node-count bound for non-tree graphs

    Returns:
        Whether the colouring is distinguishing

    Raises:
        LimitExceededError: For non-tree graphs above ``limit`` nodes
    """
    if len(coloring) != g.node_count:
        raise PreconditionError("colouring must cover every node")
    if not g.is_tree:
        return not any(
            preserves(p, coloring)
            for p in enumerate_automorphisms(g, limit)
            if not p.is_identity
        )

    halves = _halves(g, coloring.colors, _FormTable())
    for half in halves:
        for kids in half.children.values():
            kid_forms = [half.forms[c] for c in kids]
            if len(set(kid_forms)) != len(kid_forms):
                return False
    if len(halves) == 2:
        first, second = halves
        if first.forms[first.root] == second.forms[second.root]:
            return False
    return True


def _unrank_combination(rank: int, size: int, choose: int) -> List[int]:
    """The ``rank``-th ``choose``-subset of ``range(size)`` in lexicographic order."""
    picks = []
    x = 0
    for i in range(choose):
        while True:
            block = comb(size - x - 1, choose - i - 1)
            if rank < block:
                break
            rank -= block
            x += 1
        picks.append(x)
        x += 1
    return picks


def _rigid_counts(half: _Half, k: int, counts: Dict[int, int]) -> None:
    # number of pairwise non-isomorphic rigid k-colourings of each subtree
    for v in reversed(half.order):
        total = k
        for members in _group(half.children[v], half.forms).values():
            total *= comb(counts[members[0]], len(members))
        counts[v] = total


def _build_rigid(
    half: _Half, index: int, k: int, counts: Dict[int, int], colors: List[int]
) -> None:
    stack = [(half.root, index)]
    while stack:
        v, idx = stack.pop()
        colors[v] = idx % k + 1
        rest = idx // k
        for members in _group(half.children[v], half.forms).values():
            size = counts[members[0]]
            radix = comb(size, len(members))
            picks = _unrank_combination(rest % radix, size, len(members))
            rest //= radix
            stack.extend(zip(members, picks))


def _tree_distinguishing_number(tree: Graph) -> Tuple[int, Coloring]:
    halves = _halves(tree, None, _FormTable())
    for k in range(1, tree.node_count + 1):
        counts: Dict[int, int] = {}
        for half in halves:
            _rigid_counts(half, k, counts)
        roots = [half.root for half in halves]
        if len(halves) == 1:
            indices = [0] if counts[roots[0]] >= 1 else None
        elif halves[0].forms[roots[0]] == halves[1].forms[roots[1]]:
            indices = [0, 1] if counts[roots[0]] >= 2 else None
        else:
            indices = [0, 0] if min(counts[r] for r in roots) >= 1 else None
        if indices is None:
            continue
        colors = [0] * tree.node_count
        for half, index in zip(halves, indices):
            _build_rigid(half, index, k, counts, colors)
        witness = Coloring(tuple(colors))
        if not is_distinguishing(tree, witness):
            raise InvariantViolation("distinguishing witness", f"k={k} {colors}")
        return k, witness
    raise InvariantViolation("distinguishing number", "no colouring found")


def restricted_growth_strings(
    node_count: int, blocks: int
) -> Iterator[Tuple[int, ...]]:
    """Set partitions of ``node_count`` items into exactly ``blocks`` blocks."""
    rgs = [0] * node_count

    def extend(i: int, used: int) -> Iterator[Tuple[int, ...]]:
        if node_count - i < blocks - used:
            return
        if i == node_count:
            yield tuple(rgs)
            return
        for value in range(min(used + 1, blocks)):
            rgs[i] = value
            yield from extend(i + 1, max(used, value + 1))

    if node_count == 0 or blocks < 1:
        return
    yield from extend(1, 1)


def brute_force_distinguishing_number(
    g: Graph, limit: int = DEFAULT_BRUTE_FORCE_LIMIT
) -> Tuple[int, Coloring]:
    """
    Distinguishing number by exhaustive search over colour partitions.

    Args:
        g: Graph (any class, automorphisms enumerated up front)
        limit: Node-count bound for non-tree graphs

    Returns:
        ``(D(G), witness)`` with the witness using exactly ``D(G)`` colours
    """
    nontrivial = [p for p in enumerate_automorphisms(g, limit) if not p.is_identity]
    n = g.node_count
    for blocks in range(1, n + 1):
        for rgs in restricted_growth_strings(n, blocks):
            if not any(all(rgs[p(v)] == rgs[v] for v in p.moved) for p in nontrivial):
                return blocks, Coloring(tuple(c + 1 for c in rgs))
    raise InvariantViolation("distinguishing number", "no colouring found")


def distinguishing_number(
    g: Graph, limit: int = DEFAULT_BRUTE_FORCE_LIMIT
) -> Tuple[int, Coloring]:
    """
    Distinguishing number ``D(G)`` with a witness colouring.

    Trees use an exact count of pairwise non-isomorphic rigid colourings,
    computed bottom-up from the centre; the witness is rebuilt from those
    counts and checked with :func:`is_distinguishing`.

    Args:
        g: Graph
        limit: Node-count bound for non-tree graphs

    Returns:
        ``(D(G), witness)``

    Raises:
        LimitExceededError: For non-tree graphs above ``limit`` nodes
    """
    if g.is_tree:
        result = _tree_distinguishing_number(g)
    else:
        if g.node_count > limit:
            raise LimitExceededError(
                f"distinguishing number limited to {limit} nodes, got {g.node_count}"
            )
        result = brute_force_distinguishing_number(g, limit)
    logger.debug("D(G)=%d for a %d-node graph", result[0], g.node_count)
    return result


def tree_path(tree: Graph, x: int, y: int) -> List[int]:
    return list(nx.shortest_path(tree.nx_graph, x, y))


def check_path_symmetry(tree: Graph, p: Permutation, x: int) -> bool:
    """
    Whether ``p`` reverses the path from ``x`` to ``p(x)``.

    For the path ``v_1 .. v_{l+1}`` this checks ``v_{l+1-i} = p(v_{1+i})``
    for every ``i`` up to ``l // 2``.

    Raises:
        PreconditionError: If ``tree`` is not a tree, ``p`` is not a
            non-trivial automorphism, or ``x`` is a fixed point
    """
    if not tree.is_tree:
        raise PreconditionError("path symmetry is defined on trees")
    if not is_automorphism(tree, p) or p.is_identity:
        raise PreconditionError("expected a non-trivial automorphism")
    if p(x) == x:
        raise PreconditionError(f"node {x} is fixed by the automorphism")
    path = tree_path(tree, x, p(x))
    length = len(path) - 1
    return all(path[length - i] == p(path[i]) for i in range(length // 2 + 1))
