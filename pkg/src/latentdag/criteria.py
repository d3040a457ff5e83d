"""Graphical criteria for generic finite identifiability and the subgraph-extension search.

``excluded`` is the set V' of observed nodes with no latent loading; the
odd-cycle analysis then runs on the subgraph induced by V \\ V'.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .graphs import (Dag, UGraph, all_components_odd, canonical_key, complement, concentration_graph,
                     count_even_components, induced_subgraph, latent_cov_graph)


def _restrict(H: UGraph, excluded: frozenset) -> UGraph:
    if not excluded:
        return H
    return H.induced(v for v in H.nodes if v not in excluded)


def sufficient_odd_cycle(G: Dag, excluded: Iterable[int] = ()) -> bool:
    """Every component of the complement (induced on V minus excluded) has an odd cycle."""
    return all_components_odd(_restrict(complement(G), frozenset(excluded)))


@dataclass(frozen=True)
class NecessaryReport:
    holds: bool
    e_con: int
    d_con: int
    cov_edges: int
    d_cov: int
    n_edges: int
    failed_clause: str | None  # None, "clause_i", "clause_ii" or "both"

    def to_json(self) -> dict:
        return {"holds": self.holds, "e_con": self.e_con, "d_con": self.d_con,
                "cov_edges": self.cov_edges, "d_cov": self.d_cov, "edges": self.n_edges,
                "failed_clause": self.failed_clause}


def necessary_condition(G: Dag, excluded: Iterable[int] = ()) -> NecessaryReport:
    excluded = frozenset(excluded)
    con = concentration_graph(G)
    cov = latent_cov_graph(G)
    d_con = count_even_components(_restrict(con.complement(), excluded))
    d_cov = count_even_components(_restrict(cov.complement(), excluded))
    n = len(G.edges)
    ok_i = len(con.edges) - n >= d_con
    ok_ii = len(cov.edges) - n >= d_cov
    failed = None if ok_i and ok_ii else "both" if not (ok_i or ok_ii) else \
        "clause_i" if not ok_i else "clause_ii"
    return NecessaryReport(ok_i and ok_ii, len(con.edges), d_con, len(cov.edges), d_cov, n, failed)


def wermuth_condition(G: Dag) -> bool:
    """Odd cycles in every component of the covariance-graph complement, or of the concentration-graph complement."""
    return (all_components_odd(latent_cov_graph(G).complement())
            or all_components_odd(concentration_graph(G).complement()))


# -- subgraph extension --------------------------------------------------------

CERTIFIED_PROVENANCE = frozenset({"criteria", "jacobian"})


@dataclass(frozen=True)
class CacheEntry:
    identifiable: bool
    provenance: str  # "criteria", "jacobian" or "probable"

    @property
    def certified(self) -> bool:
        return self.identifiable and self.provenance in CERTIFIED_PROVENANCE


def as_cache_entry(value) -> CacheEntry:
    if isinstance(value, CacheEntry):
        return value
    if isinstance(value, bool):
        # a bare boolean is taken as a certified positive / a negative
        return CacheEntry(value, "jacobian" if value else "probable")
    if isinstance(value, Mapping):
        status = value.get("status")
        ident = value.get("identifiable", status == "IdentifiableCertified")
        return CacheEntry(bool(ident), str(value.get("provenance", "probable")))
    raise TypeError(f"unsupported cache value {value!r}")


@dataclass(frozen=True)
class ExtensionCertificate:
    chain: tuple  # ((removed node in G's labels, "sink" | "source"), ...)
    base_graph_key: bytes
    base_reason: str = field(default="cache")  # "cache" or "odd_cycle"

    def to_json(self) -> dict:
        return {"chain": [{"node": v, "role": role} for v, role in self.chain],
                "base_graph_key": self.base_graph_key.hex(), "base_reason": self.base_reason}


def removal_candidates(G: Dag) -> list[tuple[int, str]]:
    """Sinks whose parents are not all other nodes, and sources whose children are not all other nodes."""
    out = []
    sinks, sources = G.sinks(), G.sources()
    for s in G.nodes:
        others = frozenset(G.nodes) - {s}
        if s in sinks and G.parents(s) != others:
            out.append((s, "sink"))
        if s in sources and G.children(s) != others:
            out.append((s, "source"))
    return out


def subgraph_extension(G: Dag, cache: Mapping, max_depth: int | None = None,
                       use_odd_cycle: bool = True) -> ExtensionCertificate | None:
    """Search for a sink/source removal chain ending at a certified graph.

    Only cache entries that are certified positives count; probable
    negatives are never used.  With ``use_odd_cycle`` a subgraph passing
    :func:`sufficient_odd_cycle` also ends the chain.
    """
    if max_depth is None:
        max_depth = max(G.m - 3, 0)
    entries = {k: as_cache_entry(v) for k, v in cache.items()}
    labels = tuple(G.nodes)
    seen: set[bytes] = set()

    def search(H: Dag, names: tuple, depth: int):
        for s, role in removal_candidates(H):
            keep = [v for v in H.nodes if v != s]
            sub = induced_subgraph(H, keep)
            sub_names = tuple(names[v - 1] for v in keep)
            key = canonical_key(sub)
            step = ((names[s - 1], role),)
            e = entries.get(key)
            if e is not None and e.certified:
                return step, key, "cache"
            if use_odd_cycle and sufficient_odd_cycle(sub):
                return step, key, "odd_cycle"
            if depth > 1 and key not in seen:
                seen.add(key)
                found = search(sub, sub_names, depth - 1)
                if found is not None:
                    return step + found[0], found[1], found[2]
        return None

    # iterative deepening, so the shortest chain wins
    for depth in range(1, max_depth + 1):
        seen.clear()
        found = search(G, labels, depth)
        if found is not None:
            return ExtensionCertificate(found[0], found[1], found[2])
    return None


def replay_certificate(G: Dag, cert: ExtensionCertificate, cache: Mapping) -> bool:
    """Re-execute the removal chain on G and check every side condition."""
    entries = {k: as_cache_entry(v) for k, v in cache.items()}
    H = G
    names = list(G.nodes)
    for node, role in cert.chain:
        if node not in names:
            return False
        s = names.index(node) + 1
        if (s, role) not in removal_candidates(H):
            return False
        keep = [v for v in H.nodes if v != s]
        H = induced_subgraph(H, keep)
        names = [names[v - 1] for v in keep]
    if canonical_key(H) != cert.base_graph_key:
        return False
    if cert.base_reason == "odd_cycle":
        return sufficient_odd_cycle(H)
    e = entries.get(cert.base_graph_key)
    return e is not None and e.certified
