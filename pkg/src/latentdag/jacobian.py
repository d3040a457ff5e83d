"""Jacobian of the concentration map varphi_tilde and the generic-rank decision.

Rows are the upper-triangular entries of a symmetric matrix, grouped as
diagonal pairs D, edges E and non-adjacent pairs N.  Columns are the free
parameters grouped as Psi, Lambda, gamma.  Within each group the order is
lexicographic, so dumps are reproducible.

Full column rank at one exact rational point is a certificate (some maximal
minor is a nonzero polynomial), so ``decide_generic_finite`` can prove
identifiability.  Rank deficiency at random points is only evidence.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable

from .exact_linalg import RatMatrix, format_matrix, rank
from .graphs import MAX_CANONICAL_NODES, Dag, UGraph, canonical_key
from .models import DEFAULT_BOUND, ParamPoint, check_point, make_rng, random_param_point

DEFAULT_TRIALS = 8
DEFAULT_SEED = 42


class Status(str, enum.Enum):
    IDENTIFIABLE = "IdentifiableCertified"
    NOT_IDENTIFIABLE_PROBABLE = "NotIdentifiableProbable"
    EDGE_BOUND_VIOLATED = "EdgeBoundViolated"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class JacobianMatrix:
    matrix: RatMatrix
    row_index: tuple  # ("D", (v, v)) / ("E", (v, w)) / ("N", (v, w))
    col_index: tuple  # ("psi", v) / ("lambda", (v, w)) / ("gamma", v)

    def row_labels(self) -> list[str]:
        return [f"({a},{b})" for _, (a, b) in self.row_index]

    def col_labels(self) -> list[str]:
        out = []
        for name, idx in self.col_index:
            out.append(f"lambda_{idx[0]}_{idx[1]}" if name == "lambda" else f"{name}_{idx}")
        return out

    def rows_of(self, block: str) -> list[int]:
        return [i for i, (b, _) in enumerate(self.row_index) if b == block]

    def cols_of(self, block: str) -> list[int]:
        return [j for j, (b, _) in enumerate(self.col_index) if b == block]

    def to_text(self) -> str:
        return format_matrix(self.matrix, self.row_labels(), self.col_labels())


@dataclass(frozen=True)
class Verdict:
    status: Status
    witness: ParamPoint | None
    rank_observed: int
    trials: int
    seed: int
    columns: int

    @property
    def identifiable(self) -> bool:
        return self.status is Status.IDENTIFIABLE

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "rank_observed": self.rank_observed,
            "columns": self.columns,
            "trials": self.trials,
            "seed": self.seed,
            "witness": None if self.witness is None else self.witness.to_json(),
        }


def jacobian_shape(G: Dag, excluded: Iterable[int] = ()) -> tuple[int, int]:
    return comb(G.m + 1, 2), 2 * G.m + len(G.edges) - len(set(excluded))


def edge_bound_ok(G: Dag, excluded: Iterable[int] = ()) -> bool:
    """Jacobian is not wider than tall: C(m+1, 2) - 2m + |excluded| >= |E|."""
    rows, cols = jacobian_shape(G, excluded)
    return rows >= cols


def row_index(G: Dag) -> tuple:
    D = [("D", (v, v)) for v in G.nodes]
    E = [("E", e) for e in G.sorted_edges()]
    N = [("N", (v, w)) for v, w in itertools.combinations(G.nodes, 2) if not G.adjacent(v, w)]
    return tuple(D + E + N)


def col_index(G: Dag, excluded: Iterable[int] = ()) -> tuple:
    excluded = set(excluded)
    return tuple([("psi", v) for v in G.nodes]
                 + [("lambda", e) for e in G.sorted_edges()]
                 + [("gamma", v) for v in G.nodes if v not in excluded])


def build_jacobian(G: Dag, p: ParamPoint) -> JacobianMatrix:
    """J(varphi_tilde) at p, filled entry by entry from the closed forms.

    Gamma columns are restricted to nodes outside ``p.excluded``.
    """
    check_point(G, p, "concentration")
    lam = p.lam
    psi = {v: p.diag[v - 1] for v in G.nodes}
    gam = {v: p.loading[v - 1] for v in G.nodes}
    ch = {v: G.children(v) for v in G.nodes}
    rows = row_index(G)
    cols = col_index(G, p.excluded)
    zero = Fraction(0)

    out = []
    for block, (v, w) in rows:
        r = []
        if block == "D":
            for name, idx in cols:
                if name == "psi":
                    u = idx
                    r.append(Fraction(1) if u == v else lam[(v, u)] ** 2 if u in ch[v] else zero)
                elif name == "lambda":
                    a, b = idx
                    r.append(2 * lam[(a, b)] * psi[b] if a == v else zero)
                else:
                    r.append(-2 * gam[v] if idx == v else zero)
        else:
            common = ch[v] & ch[w]
            is_edge = block == "E"
            for name, idx in cols:
                if name == "psi":
                    u = idx
                    if is_edge and u == w:
                        r.append(-lam[(v, w)])
                    elif u in common:
                        r.append(lam[(v, u)] * lam[(w, u)])
                    else:
                        r.append(zero)
                elif name == "lambda":
                    a, x = idx
                    if is_edge and (a, x) == (v, w):
                        r.append(-psi[w])
                    elif a == v and x in common:
                        r.append(lam[(w, x)] * psi[x])
                    elif a == w and x in common:
                        r.append(lam[(v, x)] * psi[x])
                    else:
                        r.append(zero)
                else:
                    u = idx
                    r.append(-gam[w] if u == v else -gam[v] if u == w else zero)
        out.append(r)
    return JacobianMatrix(RatMatrix.from_rows(out, len(cols)), rows, cols)


def _stream_salt(G: Dag, excluded: frozenset) -> bytes:
    if G.m <= MAX_CANONICAL_NODES and not excluded:
        return canonical_key(G)
    body = ";".join(f"{a},{b}" for a, b in G.sorted_edges())
    return f"{G.m}|{body}|{sorted(excluded)}".encode()


def decide_generic_finite(G: Dag, excluded: Iterable[int] = (), seed: int = DEFAULT_SEED,
                          bound: int = DEFAULT_BOUND, trials: int = DEFAULT_TRIALS) -> Verdict:
    """Random-point rank test on J(varphi_tilde) restricted to Theta(excluded).

    The random stream is keyed by (seed, canonical key), so the verdict does
    not depend on scheduling and isomorphic inputs see the same draws.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    excluded = frozenset(excluded)
    for v in excluded:
        G._check(v)
    ncols = jacobian_shape(G, excluded)[1]
    if not edge_bound_ok(G, excluded):
        return Verdict(Status.EDGE_BOUND_VIOLATED, None, 0, 0, seed, ncols)
    rng = make_rng(seed, _stream_salt(G, excluded))
    best = 0
    for t in range(1, trials + 1):
        p = random_param_point(G, "concentration", bound=bound, excluded=excluded, rng=rng)
        r = rank(build_jacobian(G, p).matrix)
        if r == ncols:
            return Verdict(Status.IDENTIFIABLE, p, r, t, seed, ncols)
        best = max(best, r)
    return Verdict(Status.NOT_IDENTIFIABLE_PROBABLE, None, best, trials, seed, ncols)


def product_map_jacobian(H: UGraph, x) -> RatMatrix:
    """Jacobian of x -> (x_v x_w) over the edges of H, rows in sorted edge order."""
    rows = []
    for v, w in H.sorted_edges():
        r = [Fraction(0)] * H.m
        r[v - 1] = Fraction(x[w - 1])
        r[w - 1] = Fraction(x[v - 1])
        rows.append(r)
    return RatMatrix.from_rows(rows, H.m)


def product_map_rank(H: UGraph, seed: int = DEFAULT_SEED, bound: int = DEFAULT_BOUND) -> int:
    rng = make_rng(seed, b"product-map", H.m)
    x = [int(rng.integers(1, bound, endpoint=True)) * (1 if rng.integers(2) else -1) for _ in H.nodes]
    return rank(product_map_jacobian(H, x))
