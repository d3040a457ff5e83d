"""Directed acyclic and undirected graphs on nodes 1..m.

Besides the basic containers this module builds the undirected graphs the
identifiability criteria are phrased in: the complement of a DAG's skeleton,
the concentration graph (moral graph) and the latent-conditional covariance
graph (pairs with a common ancestor).
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import BadIndex, CycleDetected, EmptyKeepSet, ParseError, SizeMismatch, TooLarge

MAX_CANONICAL_NODES = 8


def _pair(v: int, w: int) -> tuple[int, int]:
    return (v, w) if v < w else (w, v)


@dataclass(frozen=True)
class UGraph:
    m: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for v, w in self.edges:
            if v == w:
                raise BadIndex(f"self-loop at {v}")
            if not (1 <= v <= self.m and 1 <= w <= self.m):
                raise BadIndex(f"edge {v}-{w} outside 1..{self.m}")
            norm.add(_pair(v, w))
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def nodes(self) -> range:
        return range(1, self.m + 1)

    def adjacency(self) -> dict[int, set[int]]:
        adj = {v: set() for v in self.nodes}
        for v, w in self.edges:
            adj[v].add(w)
            adj[w].add(v)
        return adj

    def has_edge(self, v: int, w: int) -> bool:
        return _pair(v, w) in self.edges

    def complement(self) -> "UGraph":
        return UGraph(self.m, frozenset(p for p in itertools.combinations(self.nodes, 2)
                                        if p not in self.edges))

    def induced(self, keep: Iterable[int]) -> "UGraph":
        """Subgraph on ``keep`` with nodes relabeled 1..|keep| in ascending order."""
        keep = sorted(set(keep))
        relabel = {v: i + 1 for i, v in enumerate(keep)}
        return UGraph(len(keep), frozenset((relabel[v], relabel[w]) for v, w in self.edges
                                           if v in relabel and w in relabel))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class Dag:
    """A DAG on nodes 1..m.  Build through :func:`make_dag` to get validation."""

    m: int
    edges: frozenset
    order: tuple  # a topological order of 1..m

    @property
    def nodes(self) -> range:
        return range(1, self.m + 1)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def _check(self, v: int):
        if not 1 <= v <= self.m:
            raise BadIndex(f"node {v} outside 1..{self.m}")

    def parents(self, v: int) -> frozenset:
        self._check(v)
        return frozenset(a for a, b in self.edges if b == v)

    def children(self, v: int) -> frozenset:
        self._check(v)
        return frozenset(b for a, b in self.edges if a == v)

    def sinks(self) -> frozenset:
        tails = {a for a, _ in self.edges}
        return frozenset(v for v in self.nodes if v not in tails)

    def sources(self) -> frozenset:
        heads = {b for _, b in self.edges}
        return frozenset(v for v in self.nodes if v not in heads)

    def skeleton(self) -> UGraph:
        return UGraph(self.m, frozenset(_pair(a, b) for a, b in self.edges))

    def adjacent(self, v: int, w: int) -> bool:
        return (v, w) in self.edges or (w, v) in self.edges

    def ancestors(self, v: int) -> frozenset:
        """Self-inclusive ancestor set."""
        self._check(v)
        pa = {b: set() for b in self.nodes}
        for a, b in self.edges:
            pa[b].add(a)
        seen = {v}
        stack = [v]
        while stack:
            for a in pa[stack.pop()]:
                if a not in seen:
                    seen.add(a)
                    stack.append(a)
        return frozenset(seen)

    def is_topologically_labeled(self) -> bool:
        return all(a < b for a, b in self.edges)

    def relabel(self, perm: dict[int, int]) -> "Dag":
        """Image of the DAG under the node bijection ``perm``."""
        return make_dag(self.m, [(perm[a], perm[b]) for a, b in self.edges])

    def __str__(self) -> str:
        return f"Dag(m={self.m}, edges={self.sorted_edges()})"


def make_dag(m: int, edges: Iterable) -> Dag:
    if m < 0:
        raise BadIndex("negative node count")
    es = set()
    for e in edges:
        v, w = (int(x) for x in e)
        if not (1 <= v <= m and 1 <= w <= m):
            raise BadIndex(f"edge {v}->{w} outside 1..{m}")
        if v == w:
            raise CycleDetected(f"self-loop at {v}")
        es.add((v, w))
    # Kahn's algorithm, smallest available node first so the order is deterministic
    indeg = {v: 0 for v in range(1, m + 1)}
    out = {v: [] for v in range(1, m + 1)}
    for v, w in es:
        indeg[w] += 1
        out[v].append(w)
    ready = [v for v in indeg if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(order) < m:
        stuck = sorted(v for v in indeg if indeg[v] > 0)
        raise CycleDetected(f"cycle among nodes {stuck}")
    return Dag(m, frozenset(es), tuple(order))


def complement(G: Dag | UGraph) -> UGraph:
    skel = G.skeleton() if isinstance(G, Dag) else G
    return skel.complement()


def odd_cycle_components(H: UGraph) -> list[tuple[frozenset, bool]]:
    """Connected components of H, each flagged True iff it is not bipartite.

    Components are listed in order of their smallest node.
    """
    adj = H.adjacency()
    color: dict[int, int] = {}
    result = []
    for s in H.nodes:
        if s in color:
            continue
        color[s] = 0
        members = {s}
        odd = False
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in color:
                    color[w] = 1 - color[v]
                    members.add(w)
                    queue.append(w)
                elif color[w] == color[v]:
                    odd = True
        result.append((frozenset(members), odd))
    return result


def count_even_components(H: UGraph) -> int:
    """Number of components without an odd cycle (isolated nodes included)."""
    return sum(1 for _, odd in odd_cycle_components(H) if not odd)


def all_components_odd(H: UGraph) -> bool:
    return all(odd for _, odd in odd_cycle_components(H))


def concentration_graph(G: Dag) -> UGraph:
    """Moral graph: the skeleton plus edges between parents of a common child."""
    edges = set(G.skeleton().edges)
    for v in G.nodes:
        for a, b in itertools.combinations(sorted(G.parents(v)), 2):
            edges.add((a, b))
    return UGraph(G.m, frozenset(edges))


def latent_cov_graph(G: Dag) -> UGraph:
    """Pairs of nodes whose self-inclusive ancestor sets intersect."""
    anc = {v: G.ancestors(v) for v in G.nodes}
    return UGraph(G.m, frozenset((v, w) for v, w in itertools.combinations(G.nodes, 2)
                                 if anc[v] & anc[w]))


def v_structures(G: Dag) -> frozenset:
    out = set()
    for c in G.nodes:
        for a, b in itertools.combinations(sorted(G.parents(c)), 2):
            if not G.adjacent(a, b):
                out.add((a, c, b))
    return frozenset(out)


def markov_equivalent(G1: Dag, G2: Dag) -> bool:
    if G1.m != G2.m:
        raise SizeMismatch(f"{G1.m} nodes vs {G2.m} nodes")
    return G1.skeleton() == G2.skeleton() and v_structures(G1) == v_structures(G2)


def markov_class_key(G: Dag) -> tuple:
    return (G.m, tuple(G.skeleton().sorted_edges()), tuple(sorted(v_structures(G))))


def acyclic_orientations(H: UGraph):
    """Every DAG whose skeleton is H."""
    edges = H.sorted_edges()
    for flips in itertools.product((False, True), repeat=len(edges)):
        oriented = [(b, a) if f else (a, b) for (a, b), f in zip(edges, flips)]
        try:
            yield make_dag(H.m, oriented)
        except CycleDetected:
            continue


def markov_class_members(G: Dag) -> list[Dag]:
    """All labeled DAGs Markov equivalent to G (same skeleton and v-structures)."""
    vs = v_structures(G)
    return [H for H in acyclic_orientations(G.skeleton()) if v_structures(H) == vs]


def induced_subgraph(G: Dag, keep: Iterable[int]) -> Dag:
    keep = sorted(set(keep))
    if not keep:
        raise EmptyKeepSet("keep set is empty")
    for v in keep:
        G._check(v)
    relabel = {v: i + 1 for i, v in enumerate(keep)}
    return make_dag(len(keep), [(relabel[a], relabel[b]) for a, b in G.edges
                                if a in relabel and b in relabel])


# -- canonical keys ----------------------------------------------------------
#
# A DAG is encoded as a bitmask over the m*(m-1) ordered pairs.  Pairs (i, j)
# with i < j take the low bit positions and pairs with i > j the high ones, so
# the minimum over relabelings is always attained by a topological labeling.

@lru_cache(maxsize=None)
def _pair_positions(m: int) -> dict[tuple[int, int], int]:
    upper = [(i, j) for i in range(m) for j in range(i + 1, m)]
    lower = [(i, j) for i in range(m) for j in range(i)]
    return {p: k for k, p in enumerate(upper + lower)}


@lru_cache(maxsize=None)
def _perm_weights(m: int) -> np.ndarray:
    """weights[p, k] = 2**position of pair k (in _pair_positions order) after permutation p."""
    pos = _pair_positions(m)
    pairs = list(pos)
    perms = list(itertools.permutations(range(m)))
    W = np.zeros((len(perms), len(pairs)), dtype=np.int64)
    for p, perm in enumerate(perms):
        for k, (i, j) in enumerate(pairs):
            W[p, k] = 1 << pos[(perm[i], perm[j])]
    return W


def _key_bytes(m: int, mask: int) -> bytes:
    nbytes = max(1, (m * (m - 1) + 7) // 8)
    return bytes([m]) + int(mask).to_bytes(nbytes, "big")


def canonical_key(G: Dag) -> bytes:
    """Minimum bit encoding over all m! relabelings; equal iff isomorphic."""
    if G.m > MAX_CANONICAL_NODES:
        raise TooLarge(f"canonical_key supports m <= {MAX_CANONICAL_NODES}")
    if G.m <= 1:
        return _key_bytes(G.m, 0)
    pos = _pair_positions(G.m)
    cols = [pos[(a - 1, b - 1)] for a, b in G.edges]
    W = _perm_weights(G.m)
    if not cols:
        return _key_bytes(G.m, 0)
    return _key_bytes(G.m, int(W[:, cols].sum(axis=1).min()))


def dag_from_key(key: bytes) -> Dag:
    m = key[0]
    mask = int.from_bytes(key[1:], "big")
    pos = _pair_positions(m)
    return make_dag(m, [(i + 1, j + 1) for (i, j), k in pos.items() if mask >> k & 1])


def permute(G: Dag, perm) -> Dag:
    """Relabel node v as perm[v-1] (perm a permutation of 1..m)."""
    return G.relabel({v: perm[v - 1] for v in G.nodes})


# -- text format -------------------------------------------------------------

def parse_graph(text: str) -> Dag:
    """Line 1 holds m; each further line "u v" is an edge u -> v."""
    m = None
    edges = []
    for n, raw in enumerate(text.splitlines(), 1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"expected integers, got {ln!r}", n) from None
        if m is None:
            if len(nums) != 1 or nums[0] < 0:
                raise ParseError("first line must be the node count m", n)
            m = nums[0]
            continue
        if len(nums) != 2:
            raise ParseError("edge lines must be 'u v'", n)
        u, v = nums
        if not (1 <= u <= m and 1 <= v <= m):
            raise ParseError(f"edge {u} {v} outside 1..{m}", n)
        if (u, v) in edges:
            raise ParseError(f"duplicate edge {u} {v}", n)
        edges.append((u, v))
    if m is None:
        raise ParseError("empty graph file")
    return make_dag(m, edges)


def format_graph(G: Dag) -> str:
    return "\n".join([str(G.m)] + [f"{a} {b}" for a, b in G.sorted_edges()]) + "\n"
