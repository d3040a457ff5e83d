"""Parametrization maps of the one-latent-source model, in exact arithmetic.

Covariance side, with Lambda supported on the DAG's edges::

    phi(L, Omega, delta)       = (I - L^T)^-1 (Omega + delta delta^T) (I - L)^-1
    phi_tilde(L, Omega, delta) = (I - L^T)^-1 Omega (I - L)^-1 + delta delta^T

Concentration side::

    varphi(L, Psi, gamma)       = (I - L) (Psi - gamma gamma^T) (I - L^T)
    varphi_tilde(L, Psi, gamma) = (I - L) Psi (I - L^T) - gamma gamma^T
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Literal, Mapping

import numpy as np

from .errors import EdgeMismatch, SingularMatrix, SingularSubmatrix
from .exact_linalg import RatMatrix, as_rat, leading_minors_positive, solve
from .graphs import Dag

Kind = Literal["covariance", "concentration"]

DEFAULT_BOUND = 10**6


@dataclass(frozen=True)
class ParamPoint:
    """A point (Lambda, Omega|Psi, delta|gamma) of the parameter domain.

    ``lam`` maps each edge (v, w) to its coefficient, ``diag`` holds Omega or
    Psi, ``loading`` holds delta or gamma.  Loadings of nodes in ``excluded``
    are pinned to zero.
    """

    kind: Kind
    lam: Mapping[tuple[int, int], Fraction]
    diag: tuple
    loading: tuple
    excluded: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in ("covariance", "concentration"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "lam", {tuple(e): as_rat(x) for e, x in dict(self.lam).items()})
        object.__setattr__(self, "diag", tuple(as_rat(x) for x in self.diag))
        object.__setattr__(self, "loading", tuple(as_rat(x) for x in self.loading))
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        if len(self.diag) != len(self.loading):
            raise EdgeMismatch("diag and loading lengths differ")
        if any(x <= 0 for x in self.diag):
            raise ValueError("diagonal entries must be strictly positive")
        for v in self.excluded:
            if not 1 <= v <= self.m:
                raise EdgeMismatch(f"excluded node {v} outside 1..{self.m}")
            if self.loading[v - 1] != 0:
                raise ValueError(f"loading of excluded node {v} must be 0")

    @property
    def m(self) -> int:
        return len(self.diag)

    def lambda_matrix(self) -> RatMatrix:
        m = self.m
        L = [[Fraction(0)] * m for _ in range(m)]
        for (v, w), x in self.lam.items():
            L[v - 1][w - 1] = x
        return RatMatrix.from_rows(L, m)

    def replace(self, **kw) -> "ParamPoint":
        d = dict(kind=self.kind, lam=self.lam, diag=self.diag, loading=self.loading,
                 excluded=self.excluded)
        d.update(kw)
        return ParamPoint(**d)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": [{"edge": [v, w], "value": str(x)} for (v, w), x in sorted(self.lam.items())],
            "diag": [str(x) for x in self.diag],
            "loading": [str(x) for x in self.loading],
            "excluded": sorted(self.excluded),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ParamPoint":
        return cls(kind=d["kind"],
                   lam={tuple(e["edge"]): Fraction(e["value"]) for e in d["lambda"]},
                   diag=[Fraction(x) for x in d["diag"]],
                   loading=[Fraction(x) for x in d["loading"]],
                   excluded=frozenset(d.get("excluded", ())))


def check_point(G: Dag, p: ParamPoint, kind: Kind | None = None):
    if kind is not None and p.kind != kind:
        raise EdgeMismatch(f"expected a {kind} point, got {p.kind}")
    if p.m != G.m:
        raise EdgeMismatch(f"point has {p.m} nodes, graph has {G.m}")
    if set(p.lam) != set(G.edges):
        raise EdgeMismatch("lambda keys differ from the edge set")


def neumann_inverse(L: RatMatrix) -> RatMatrix:
    """(I - L)^-1 = I + L + ... + L^(m-1) for nilpotent L."""
    m = L.rows
    acc = RatMatrix.identity(m)
    term = RatMatrix.identity(m)
    for _ in range(1, m):
        term = term @ L
        if all(x == 0 for x in term.entries):
            break
        acc = acc + term
    return acc


def phi(G: Dag, p: ParamPoint) -> RatMatrix:
    check_point(G, p, "covariance")
    A = neumann_inverse(p.lambda_matrix())
    core = RatMatrix.diag(p.diag) + RatMatrix.outer(p.loading)
    return A.T @ core @ A


def phi_tilde(G: Dag, p: ParamPoint) -> RatMatrix:
    check_point(G, p, "covariance")
    A = neumann_inverse(p.lambda_matrix())
    return A.T @ RatMatrix.diag(p.diag) @ A + RatMatrix.outer(p.loading)


def varphi(G: Dag, p: ParamPoint) -> RatMatrix:
    check_point(G, p, "concentration")
    B = RatMatrix.identity(G.m) - p.lambda_matrix()
    return B @ (RatMatrix.diag(p.diag) - RatMatrix.outer(p.loading)) @ B.T


def varphi_tilde(G: Dag, p: ParamPoint) -> RatMatrix:
    check_point(G, p, "concentration")
    B = RatMatrix.identity(G.m) - p.lambda_matrix()
    return B @ RatMatrix.diag(p.diag) @ B.T - RatMatrix.outer(p.loading)


def sigma_given_latent(G: Dag, lam: Mapping, diag) -> RatMatrix:
    """(I - L^T)^-1 Omega (I - L)^-1, the covariance given the latent source."""
    p = ParamPoint("covariance", lam, diag, [0] * len(diag))
    return phi_tilde(G, p)


def is_positive_definite(S: RatMatrix) -> bool:
    return S.is_symmetric() and leading_minors_positive(S)


def recover_lambda_omega(G: Dag, sigmaL: RatMatrix) -> tuple[dict, tuple]:
    """Invert (Lambda, Omega) -> (I - L^T)^-1 Omega (I - L)^-1 by per-node regressions."""
    if sigmaL.shape != (G.m, G.m):
        raise EdgeMismatch("matrix size does not match the graph")
    lam = {}
    omega = []
    for v in G.nodes:
        pa = sorted(G.parents(v))
        if not pa:
            omega.append(sigmaL[v - 1, v - 1])
            continue
        idx = [u - 1 for u in pa]
        S_pp = sigmaL.submatrix(idx, idx)
        s_pv = [sigmaL[u, v - 1] for u in idx]
        try:
            coef = solve(S_pp, s_pv)
        except SingularMatrix:
            raise SingularSubmatrix(f"Sigma[pa({v}), pa({v})] is singular") from None
        for u, c in zip(pa, coef):
            lam[(u, v)] = c
        omega.append(sigmaL[v - 1, v - 1] - sum((a * b for a, b in zip(s_pv, coef)), Fraction(0)))
    return lam, tuple(omega)


# -- reparametrizations relating the four maps --------------------------------

def g_map(G: Dag, p: ParamPoint) -> ParamPoint:
    """(L, Omega, delta) -> (L, Omega, (I - L^T)^-1 delta); phi = phi_tilde o g."""
    A = neumann_inverse(p.lambda_matrix())
    return p.replace(loading=A.T.matvec(p.loading), excluded=frozenset())


def h_map(G: Dag, p: ParamPoint) -> ParamPoint:
    """(L, Psi, gamma) -> (L, Psi, (I - L) gamma); varphi = varphi_tilde o h."""
    B = RatMatrix.identity(G.m) - p.lambda_matrix()
    return p.replace(loading=B.matvec(p.loading), excluded=frozenset())


# -- random points ------------------------------------------------------------

def _seed_words(*parts) -> list[int]:
    """Turn ints / bytes / strings into 32-bit words for a SeedSequence."""
    words = []
    for part in parts:
        if isinstance(part, (bytes, bytearray)):
            digest = hashlib.sha256(part).digest()
            words.extend(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
        elif isinstance(part, str):
            words.extend(_seed_words(part.encode()))
        else:
            part = int(part)
            if part < 0:
                raise ValueError("seed components must be non-negative")
            words.append(part & 0xFFFFFFFF)
            part >>= 32
            while part:
                words.append(part & 0xFFFFFFFF)
                part >>= 32
    return words


def make_rng(*seed_parts) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by the given seed components."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_seed_words(*seed_parts))))


def _nonzero_int(rng: np.random.Generator, bound: int) -> int:
    x = int(rng.integers(1, bound, endpoint=True))
    return x if rng.integers(2) else -x


def random_param_point(G: Dag, kind: Kind = "concentration", seed=0, bound: int = DEFAULT_BOUND,
                       excluded: Iterable[int] = (), rng: np.random.Generator | None = None) -> ParamPoint:
    """Integer point: lambda and loadings uniform on [-B, B] minus 0, diagonal on [1, B]."""
    if bound < 2:
        raise ValueError("bound must be at least 2")
    excluded = frozenset(excluded)
    if rng is None:
        rng = make_rng(seed)
    lam = {e: Fraction(_nonzero_int(rng, bound)) for e in G.sorted_edges()}
    diag = [Fraction(int(rng.integers(1, bound, endpoint=True))) for _ in G.nodes]
    loading = [Fraction(0) if v in excluded else Fraction(_nonzero_int(rng, bound)) for v in G.nodes]
    return ParamPoint(kind, lam, diag, loading, excluded)
