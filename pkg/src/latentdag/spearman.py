"""Tetrads and diagonal-plus-rank-one (Spearman / coSpearman) matrices.

A Spearman matrix is Omega + delta delta^T and a coSpearman matrix is
Psi - gamma gamma^T, with a positive diagonal part and a loading vector with
no zero entries.  For size >= 4 membership is decided by sign normalization,
vanishing tetrads and a strict inequality on each ordered triple; size 3 is
decided by solving for the decomposition directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Literal

from .errors import NotCoSpearman, NotSpearman, ShapeMismatch, TooSmall
from .exact_linalg import RatMatrix
from .graphs import Dag
from .models import neumann_inverse


def quadruples(m: int):
    return itertools.combinations(range(m), 4)


def _tetrad_pair(M: RatMatrix, i: int, j: int, k: int, l: int) -> tuple[Fraction, Fraction]:
    ik_jl = M[i, k] * M[j, l]
    return M[i, j] * M[k, l] - ik_jl, M[i, l] * M[j, k] - ik_jl


def tetrads(M: RatMatrix) -> list[Fraction]:
    """The 2*C(m,4) basis tetrads, quadruples i<j<k<l in lexicographic order.

    Each quadruple contributes (u_ij u_kl - u_ik u_jl, u_il u_jk - u_ik u_jl);
    the third tetrad is their difference.
    """
    if M.rows != M.cols:
        raise ShapeMismatch("tetrads need a square matrix")
    if M.rows < 4:
        raise TooSmall("tetrads need m >= 4")
    out = []
    for q in quadruples(M.rows):
        out.extend(_tetrad_pair(M, *q))
    return out


def _sign_pattern(M: RatMatrix, want_positive: bool) -> list[int] | None:
    """Signs s with s_i s_j M_ij > 0 (or < 0) for all i != j, by BFS from node 0.

    None if an off-diagonal zero or an inconsistent flip demand is found.
    """
    m = M.rows
    target = 1 if want_positive else -1
    s = [0] * m
    s[0] = 1
    queue = [0]
    while queue:
        i = queue.pop()
        for j in range(m):
            if j == i:
                continue
            x = M[i, j]
            if x == 0:
                return None
            need = target * s[i] * (1 if x > 0 else -1)
            if s[j] == 0:
                s[j] = need
                queue.append(j)
            elif s[j] != need:
                return None
    return s


def _normalize(M: RatMatrix, s: list[int]) -> RatMatrix:
    m = M.rows
    return RatMatrix(m, m, (M[i, j] * s[i] * s[j] for i in range(m) for j in range(m)))


def _check_membership(M: RatMatrix, co: bool) -> list[int] | None:
    """Sign pattern if M is (co)Spearman, else None.

    Membership follows the definition (positive diagonal part, loadings
    without zeros); positive definiteness is not required.  A Spearman matrix
    is positive definite anyway, a coSpearman matrix need not be.  For m >= 4
    the strict triple inequality is exactly positivity of the diagonal part.
    """
    if M.rows != M.cols or not M.is_symmetric() or M.rows < 3:
        return None
    m = M.rows
    s = _sign_pattern(M, want_positive=not co)
    if s is None:
        return None
    if m == 3:
        sq = _loading_squares(M, co)
        if any(x <= 0 for x in sq):
            return None
        diag = [M[i, i] + sq[i] if co else M[i, i] - sq[i] for i in range(m)]
        return s if all(d > 0 for d in diag) else None
    if any(t != 0 for t in tetrads(M)):
        return None
    N = _normalize(M, s)
    for i, j, k in itertools.permutations(range(m), 3):
        val = N[i, i] * N[j, k] - N[i, k] * N[j, i]
        if (val >= 0) if co else (val <= 0):
            return None
    return s


def is_spearman(M: RatMatrix) -> bool:
    return _check_membership(M, co=False) is not None


def is_cospearman(M: RatMatrix) -> bool:
    return _check_membership(M, co=True) is not None


@dataclass(frozen=True)
class SpearmanDecomposition:
    diag_part: tuple
    loading_sq: tuple
    loading_signs: tuple
    kind: Literal["spearman", "cospearman"] = "spearman"

    @property
    def loading(self) -> tuple | None:
        """Signed loadings when every square is a perfect rational square."""
        roots = [_rational_sqrt(x) for x in self.loading_sq]
        if any(r is None for r in roots):
            return None
        return tuple(s * r for s, r in zip(self.loading_signs, roots))

    def reconstruct(self) -> RatMatrix | None:
        d = self.loading
        if d is None:
            return None
        rank_one = RatMatrix.outer(d)
        D = RatMatrix.diag(self.diag_part)
        return D + rank_one if self.kind == "spearman" else D - rank_one

    def matches(self, M: RatMatrix) -> bool:
        """Exact check of M against the decomposition, via squares when roots are irrational."""
        m = M.rows
        sign = 1 if self.kind == "spearman" else -1
        for i in range(m):
            if M[i, i] != self.diag_part[i] + sign * self.loading_sq[i]:
                return False
            for j in range(m):
                if i != j:
                    if M[i, j] ** 2 != self.loading_sq[i] * self.loading_sq[j]:
                        return False
                    if sign * M[i, j] * self.loading_signs[i] * self.loading_signs[j] <= 0:
                        return False
        return True

    def to_json(self) -> dict:
        d = self.loading
        return {"kind": self.kind,
                "diag_part": [str(x) for x in self.diag_part],
                "loading_sq": [str(x) for x in self.loading_sq],
                "loading_signs": list(self.loading_signs),
                "loading": None if d is None else [str(x) for x in d]}


def _rational_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = isqrt(x.numerator), isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


def _loading_squares(M: RatMatrix, co: bool) -> list[Fraction]:
    m = M.rows
    out = []
    for i in range(m):
        j, k = [x for x in range(m) if x != i][:2]
        val = M[i, j] * M[i, k] / M[j, k]
        out.append(-val if co else val)
    return out


def spearman_decompose(M: RatMatrix) -> SpearmanDecomposition:
    s = _check_membership(M, co=False)
    if s is None:
        raise NotSpearman("matrix is not a Spearman matrix")
    sq = _loading_squares(M, co=False)
    diag = tuple(M[i, i] - sq[i] for i in range(M.rows))
    return SpearmanDecomposition(diag, tuple(sq), tuple(s), "spearman")


def cospearman_decompose(M: RatMatrix) -> SpearmanDecomposition:
    s = _check_membership(M, co=True)
    if s is None:
        raise NotCoSpearman("matrix is not a coSpearman matrix")
    sq = _loading_squares(M, co=True)
    diag = tuple(M[i, i] + sq[i] for i in range(M.rows))
    return SpearmanDecomposition(diag, tuple(sq), tuple(s), "cospearman")


# -- linear tetrad systems for star-shaped graphs -------------------------------

def _star_edges(G: Dag, mode: str) -> list[tuple[int, int]]:
    m = G.m
    if mode == "sink":
        if any(b != m for _, b in G.edges):
            raise ShapeMismatch(f"sink mode needs every edge to point into node {m}")
    elif mode == "source":
        if any(a != 1 for a, _ in G.edges):
            raise ShapeMismatch("source mode needs every edge to leave node 1")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return G.sorted_edges()


def _transformed(G: Dag, mode: str, base: RatMatrix, lam: dict) -> RatMatrix:
    m = G.m
    L = [[Fraction(0)] * m for _ in range(m)]
    for (v, w), x in lam.items():
        L[v - 1][w - 1] = Fraction(x)
    L = RatMatrix.from_rows(L, m)
    if mode == "sink":
        B = RatMatrix.identity(m) - L
        return B.T @ base @ B
    A = neumann_inverse(L)
    return A @ base @ A.T


def tetrad_linear_system(G: Dag, mode: str, base: RatMatrix) -> tuple[RatMatrix, list[Fraction]]:
    """Linear system C lambda = c equivalent to vanishing tetrads after transforming base.

    sink: tetrads of (I - L^T) base (I - L) on quadruples containing node m.
    source: tetrads of (I - L)^-1 base (I - L^T)^-1 on quadruples containing node 1.
    Both are affine in lambda; C and c are read off by evaluating at 0 and at
    unit vectors.
    """
    if base.shape != (G.m, G.m):
        raise ShapeMismatch("base matrix does not match the graph")
    if G.m < 4:
        raise TooSmall("tetrad systems need m >= 4")
    edges = _star_edges(G, mode)
    pin = G.m - 1 if mode == "sink" else 0
    quads = [q for q in quadruples(G.m) if pin in q]

    def values(lam):
        S = _transformed(G, mode, base, lam)
        out = []
        for q in quads:
            out.extend(_tetrad_pair(S, *q))
        return out

    t0 = values({})
    cols = []
    for e in edges:
        te = values({e: 1})
        cols.append([a - b for a, b in zip(te, t0)])
    # t(lambda) = t0 + sum_e lambda_e * col_e, so t = 0 iff (-cols) lambda = t0
    C = RatMatrix(len(t0), len(edges), (-cols[j][i] for i in range(len(t0)) for j in range(len(edges))))
    return C, t0
