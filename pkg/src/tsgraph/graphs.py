"""Decomposable graphs on ``p`` labelled nodes.

Adjacency is kept as one integer bitmask per node, so neighbourhood
intersections and subset tests are single integer operations. Nodes are
0-indexed; an edge is always stored as ``(i, j)`` with ``i < j``.

The decomposability test is maximum cardinality search (MCS) followed by a
perfect-elimination check. Cliques and separators come out of the same MCS
pass (Blair & Peyton), already in a perfect ordering.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from scipy.special import betaln

from .errors import InputError, StructureError

Edge = tuple[int, int]

__all__ = [
    "CliqueDecomposition",
    "DecomposableGraph",
    "GraphPriorConfig",
    "can_add_edge",
    "can_remove_edge",
    "decompose",
    "is_decomposable",
    "legal_additions",
    "legal_deletions",
    "log_graph_prior",
    "num_pairs",
    "pair_index",
    "pairs",
    "triangulate",
    "try_toggle_edge",
]


def num_pairs(num_nodes: int) -> int:
    return num_nodes * (num_nodes - 1) // 2


def pairs(num_nodes: int) -> list[Edge]:
    """All unordered pairs in lexicographic order (the edge-bit order)."""
    return [(i, j) for i in range(num_nodes) for j in range(i + 1, num_nodes)]


def pair_index(i: int, j: int, num_nodes: int) -> int:
    if i > j:
        i, j = j, i
    return i * num_nodes - i * (i + 1) // 2 + (j - i - 1)


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _normalize_edges(num_nodes: int, edges: Iterable[Sequence[int]]) -> frozenset[Edge]:
    if num_nodes < 1:
        raise InputError(f"num_nodes must be positive, got {num_nodes}", module="graphs")
    out = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < num_nodes and 0 <= j < num_nodes):
            raise InputError(f"edge ({i}, {j}) has a node outside [0, {num_nodes})", module="graphs")
        if i == j:
            raise InputError(f"self-loop on node {i}", module="graphs")
        out.add((i, j) if i < j else (j, i))
    return frozenset(out)


def _adjacency(num_nodes: int, edges: Iterable[Edge]) -> list[int]:
    adj = [0] * num_nodes
    for i, j in edges:
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    return adj


def _mcs(num_nodes: int, adj: Sequence[int]) -> tuple[list[int], list[int]]:
    """Maximum cardinality search, lowest index first on ties.

    Returns the visiting order and, for each visited vertex, the bitmask of
    its neighbours visited before it.
    """
    weight = [0] * num_nodes
    unvisited = (1 << num_nodes) - 1
    visited = 0
    order: list[int] = []
    earlier: list[int] = []
    for _ in range(num_nodes):
        best, best_w = -1, -1
        for v in _bits(unvisited):
            if weight[v] > best_w:
                best, best_w = v, weight[v]
        order.append(best)
        earlier.append(adj[best] & visited)
        visited |= 1 << best
        unvisited &= ~(1 << best)
        for u in _bits(adj[best] & unvisited):
            weight[u] += 1
    return order, earlier


def _is_complete(mask: int, adj: Sequence[int]) -> bool:
    for w in _bits(mask):
        if (mask & ~(1 << w)) & ~adj[w]:
            return False
    return True


def _chordal(num_nodes: int, adj: Sequence[int]) -> bool:
    _, earlier = _mcs(num_nodes, adj)
    return all(_is_complete(m, adj) for m in earlier)


def is_decomposable(num_nodes: int, edge_set: Iterable[Sequence[int]]) -> bool:
    """True iff the undirected graph is chordal (decomposable)."""
    edges = _normalize_edges(num_nodes, edge_set)
    return _chordal(num_nodes, _adjacency(num_nodes, edges))


@dataclass(frozen=True)
class CliqueDecomposition:
    """Maximal cliques in a perfect ordering, plus their separators.

    ``separators[k]`` is the intersection of clique ``k + 1`` with the union
    of the cliques before it; empty intersections (new connected components)
    are left out. A separator set may appear more than once.
    """

    cliques: tuple[frozenset[int], ...]
    separators: tuple[frozenset[int], ...]


def _decompose_adj(num_nodes: int, adj: Sequence[int]) -> CliqueDecomposition:
    order, earlier = _mcs(num_nodes, adj)
    cliques: list[int] = []
    separators: list[int] = []
    prev_card = -1
    current = 0
    for v, lower in zip(order, earlier):
        if not _is_complete(lower, adj):
            raise StructureError("graph is not decomposable", module="graphs")
        card = lower.bit_count()
        if card <= prev_card:
            cliques.append(current)
            current = lower
            if lower:
                separators.append(lower)
        current |= 1 << v
        prev_card = card
    cliques.append(current)
    return CliqueDecomposition(
        cliques=tuple(frozenset(_bits(c)) for c in cliques),
        separators=tuple(frozenset(_bits(s)) for s in separators),
    )


class DecomposableGraph:
    """Immutable decomposable graph with a cached clique decomposition.

    Construction fails with :class:`StructureError` if the edge set is not
    chordal. Pass ``_checked=True`` only when decomposability is already known.
    """

    __slots__ = ("_p", "_edges", "_adj", "_decomp", "_key", "_digest")

    def __init__(self, num_nodes: int, edges: Iterable[Sequence[int]] = (), *, _checked: bool = False):
        self._p = int(num_nodes)
        self._edges = _normalize_edges(self._p, edges)
        self._adj = tuple(_adjacency(self._p, self._edges))
        self._decomp: CliqueDecomposition | None = None
        self._key: int | None = None
        self._digest: str | None = None
        if not _checked and not _chordal(self._p, self._adj):
            raise StructureError(f"edge set on {self._p} nodes is not decomposable", module="graphs")

    @classmethod
    def empty(cls, num_nodes: int) -> DecomposableGraph:
        return cls(num_nodes, (), _checked=True)

    @classmethod
    def complete(cls, num_nodes: int) -> DecomposableGraph:
        return cls(num_nodes, pairs(num_nodes), _checked=True)

    @property
    def num_nodes(self) -> int:
        return self._p

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def adjacency(self) -> tuple[int, ...]:
        return self._adj

    def sorted_edges(self) -> list[Edge]:
        return sorted(self._edges)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i] >> j & 1)

    def neighbors(self, i: int) -> list[int]:
        return list(_bits(self._adj[i]))

    @property
    def decomposition(self) -> CliqueDecomposition:
        if self._decomp is None:
            self._decomp = _decompose_adj(self._p, self._adj)
        return self._decomp

    @property
    def key(self) -> int:
        """Edge-indicator bitmask in :func:`pairs` order; canonical per node count."""
        if self._key is None:
            p = self._p
            self._key = sum(1 << pair_index(i, j, p) for i, j in self._edges)
        return self._key

    @property
    def digest(self) -> str:
        """Hex digest of the canonical sorted edge list, used as a ledger key."""
        if self._digest is None:
            payload = json.dumps([self._p, self.sorted_edges()], separators=(",", ":"))
            self._digest = hashlib.sha256(payload.encode()).hexdigest()
        return self._digest

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DecomposableGraph):
            return NotImplemented
        return self._p == other._p and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._p, self._edges))

    def __repr__(self) -> str:
        return f"DecomposableGraph(num_nodes={self._p}, edges={self.sorted_edges()})"

    def to_json(self) -> dict:
        return {"p": self._p, "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_json(cls, obj: dict) -> DecomposableGraph:
        try:
            return cls(int(obj["p"]), [tuple(e) for e in obj["edges"]])
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed graph JSON: {exc}", module="graphs") from exc

    def to_dot(self, labels: Sequence[str] | None = None) -> str:
        def name(i: int) -> str:
            return json.dumps(labels[i]) if labels is not None else str(i)

        lines = ["graph G {"]
        lines += [f"  {name(i)};" for i in range(self._p)]
        lines += [f"  {name(i)} -- {name(j)};" for i, j in self.sorted_edges()]
        lines.append("}")
        return "\n".join(lines) + "\n"


def decompose(graph: DecomposableGraph) -> CliqueDecomposition:
    return graph.decomposition


def _check_pair(graph: DecomposableGraph, i: int, j: int) -> None:
    p = graph.num_nodes
    if i == j or not (0 <= i < p and 0 <= j < p):
        raise InputError(f"invalid node pair ({i}, {j}) for p={p}", module="graphs")


def can_remove_edge(graph: DecomposableGraph, i: int, j: int) -> bool:
    """Deleting an edge keeps a chordal graph chordal iff the edge lies in exactly one maximal clique."""
    if not graph.has_edge(i, j):
        return False
    return sum(1 for c in graph.decomposition.cliques if i in c and j in c) == 1


def can_add_edge(graph: DecomposableGraph, i: int, j: int) -> bool:
    """Adding ``(i, j)`` keeps the graph chordal iff ``i`` and ``j`` are
    disconnected once their common neighbours are removed."""
    if i == j or graph.has_edge(i, j):
        return False
    adj = graph.adjacency
    allowed = ((1 << graph.num_nodes) - 1) & ~(adj[i] & adj[j])
    target = 1 << j
    reached = frontier = 1 << i
    while frontier:
        nxt = 0
        for v in _bits(frontier):
            nxt |= adj[v]
        nxt &= allowed & ~reached
        if nxt & target:
            return False
        reached |= nxt
        frontier = nxt
    return True


def legal_additions(graph: DecomposableGraph) -> list[Edge]:
    return [(i, j) for i, j in pairs(graph.num_nodes) if can_add_edge(graph, i, j)]


def legal_deletions(graph: DecomposableGraph) -> list[Edge]:
    return [e for e in graph.sorted_edges() if can_remove_edge(graph, *e)]


def try_toggle_edge(graph: DecomposableGraph, i: int, j: int) -> DecomposableGraph | None:
    """Flip edge ``(i, j)``; ``None`` if the result would not be decomposable."""
    _check_pair(graph, i, j)
    e = (min(i, j), max(i, j))
    if graph.has_edge(i, j):
        edges = graph.edges - {e}
    else:
        edges = graph.edges | {e}
    if not is_decomposable(graph.num_nodes, edges):
        return None
    return DecomposableGraph(graph.num_nodes, edges, _checked=True)


def triangulate(num_nodes: int, arbitrary_edge_set: Iterable[Sequence[int]]) -> DecomposableGraph:
    """Chordal supergraph by min-fill elimination, lowest vertex index on ties."""
    edges = set(_normalize_edges(num_nodes, arbitrary_edge_set))
    adj = _adjacency(num_nodes, edges)
    remaining = (1 << num_nodes) - 1
    for _ in range(num_nodes):
        best, best_fill = -1, -1
        for v in _bits(remaining):
            nbrs = adj[v] & remaining
            missing = 0
            for w in _bits(nbrs):
                missing += (nbrs & ~adj[w] & ~(1 << w)).bit_count()
            fill = missing // 2
            if best < 0 or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        nbrs = adj[best] & remaining & ~(1 << best)
        if best_fill:
            for w in _bits(nbrs):
                for u in _bits(nbrs & ~adj[w] & ~(1 << w)):
                    if u > w:
                        adj[w] |= 1 << u
                        adj[u] |= 1 << w
                        edges.add((w, u))
        remaining &= ~(1 << best)
    return DecomposableGraph(num_nodes, edges, _checked=True)


@dataclass(frozen=True)
class GraphPriorConfig:
    """Beta(a, b) hyperprior on the edge-inclusion rate."""

    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InputError(f"prior shapes must be positive, got a={self.a}, b={self.b}", module="graphs")


def log_graph_prior_counts(num_edges: int, num_nodes: int, config: GraphPriorConfig) -> float:
    m = num_pairs(num_nodes)
    return float(betaln(config.a + num_edges, config.b + m - num_edges) - betaln(config.a, config.b))


def log_graph_prior(graph: DecomposableGraph, config: GraphPriorConfig) -> float:
    """Unnormalized log prior of the Beta-Binomial (multiplicity correcting) edge-count prior."""
    return log_graph_prior_counts(graph.num_edges, graph.num_nodes, config)
