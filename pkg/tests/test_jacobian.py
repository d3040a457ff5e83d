from __future__ import annotations

import itertools
import random
from fractions import Fraction

import networkx as nx
from hypothesis import given, settings
from hypothesis import strategies as st

from latentdag.exact_linalg import RatMatrix, inverse, rank
from latentdag.graphs import UGraph, count_even_components, make_dag
from latentdag.jacobian import (Status, build_jacobian, col_index, decide_generic_finite, edge_bound_ok,
                                jacobian_shape, product_map_jacobian, product_map_rank, row_index)
from latentdag.models import ParamPoint, phi, phi_tilde, random_param_point, varphi, varphi_tilde

from conftest import DIAMOND_TAIL, NEC_FAIL
from oracles import divided_difference_jacobian, frac_rank, stencil_jacobian


def bounded_dags(m, rng):
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    k = rng.randint(0, max(0, (m + 1) * m // 2 - 2 * m))
    return make_dag(m, rng.sample(pairs, min(k, len(pairs))))


@st.composite
def dags(draw, max_m=5):
    m = draw(st.integers(1, max_m))
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    perm = draw(st.permutations(range(1, m + 1)))
    return make_dag(m, [(perm[a - 1], perm[b - 1]) for a, b in chosen])


def test_edge_bound_examples():
    assert edge_bound_ok(make_dag(4, [(1, 2), (3, 4)]))
    assert not edge_bound_ok(make_dag(3, [(1, 2), (1, 3), (2, 3)]))
    assert edge_bound_ok(make_dag(*NEC_FAIL))
    assert len(NEC_FAIL[1]) == 9
    # excluding nodes removes gamma columns and relaxes the bound
    assert not edge_bound_ok(make_dag(3, [(1, 2)]))
    assert edge_bound_ok(make_dag(3, [(1, 2)]), excluded={3})


def test_shape_and_order():
    G = make_dag(*DIAMOND_TAIL)
    assert jacobian_shape(G) == (15, 15)
    rows = row_index(G)
    assert [b for b, _ in rows] == ["D"] * 5 + ["E"] * 5 + ["N"] * 5
    assert [x for b, x in rows if b == "N"] == [(1, 4), (1, 5), (2, 3), (2, 5), (3, 5)]
    cols = col_index(G, excluded={2})
    assert [b for b, _ in cols] == ["psi"] * 5 + ["lambda"] * 5 + ["gamma"] * 4
    assert ("gamma", 2) not in cols


def test_empty_graph_blocks():
    G = make_dag(3, [])
    J = build_jacobian(G, ParamPoint("concentration", {}, [1, 1, 1], [1, 1, 1]))
    D, N = J.rows_of("D"), J.rows_of("N")
    psi, gam = J.cols_of("psi"), J.cols_of("gamma")
    assert J.matrix.submatrix(D, psi) == RatMatrix.identity(3)
    assert all(J.matrix[D[v], gam[v]] == -2 for v in range(3))
    for r in N:
        v, w = J.row_index[r][1]
        assert J.matrix[r, gam[v - 1]] == -1 and J.matrix[r, gam[w - 1]] == -1


def test_single_edge_entry():
    G = make_dag(2, [(1, 2)])
    J = build_jacobian(G, ParamPoint("concentration", {(1, 2): 3}, [5, 7], [1, 2]))
    r = J.row_index.index(("E", (1, 2)))
    c = J.col_index.index(("lambda", (1, 2)))
    assert J.matrix[r, c] == -7


def test_rank_deficient_matching_graph():
    G = make_dag(4, [(1, 2), (3, 4)])
    p = ParamPoint("concentration", {(1, 2): 1, (3, 4): 1}, [1, 2, 3, 4], [1, 1, 1, 1])
    J = build_jacobian(G, p).matrix
    assert J.shape == (10, 10)
    assert rank(J) < 10
    assert frac_rank(J.tolist()) == rank(J)


def test_decide_examples():
    v = decide_generic_finite(make_dag(3, []))
    assert v.status is Status.IDENTIFIABLE and v.rank_observed == 6 and v.witness is not None
    v = decide_generic_finite(make_dag(4, [(1, 2), (3, 4)]))
    assert v.status is Status.NOT_IDENTIFIABLE_PROBABLE and v.trials == 8 and v.rank_observed < 10
    v = decide_generic_finite(make_dag(*DIAMOND_TAIL))
    assert v.status is Status.IDENTIFIABLE
    assert rank(build_jacobian(make_dag(*DIAMOND_TAIL), v.witness).matrix) == 15
    assert decide_generic_finite(make_dag(3, [(1, 2)])).status is Status.EDGE_BOUND_VIOLATED


def test_decide_is_deterministic_and_isomorphism_invariant():
    G = make_dag(*NEC_FAIL)
    a = decide_generic_finite(G, seed=7)
    b = decide_generic_finite(G.relabel({1: 6, 2: 5, 3: 4, 4: 3, 5: 2, 6: 1}), seed=7)
    assert a.status == b.status and a.rank_observed == b.rank_observed and a.trials == b.trials


def test_decide_with_excluded_nodes():
    G = make_dag(3, [(1, 2)])
    v = decide_generic_finite(G, excluded={3})
    assert v.columns == 6
    assert v.witness is None or v.witness.loading[2] == 0


def test_product_map_rank_examples():
    tri = UGraph(3, frozenset({(1, 2), (2, 3), (1, 3)}))
    sq = UGraph(4, frozenset({(1, 2), (2, 3), (3, 4), (1, 4)}))
    edge = UGraph(2, frozenset({(1, 2)}))
    assert product_map_rank(tri) == 3
    assert product_map_rank(sq) == 3
    assert product_map_rank(edge) == 1
    assert product_map_jacobian(edge, [2, 3]).tolist() == [[3, 2]]


def test_product_map_rank_law_on_small_graphs():
    for n in range(1, 6):
        for k in range(0, n * (n - 1) // 2 + 1):
            for es in itertools.combinations(itertools.combinations(range(1, n + 1), 2), k):
                H = UGraph(n, frozenset(es))
                assert product_map_rank(H) == n - count_even_components(H)


@settings(max_examples=60, deadline=None)
@given(dags(), st.integers(0, 10**6))
def test_closed_form_matches_divided_differences(G, seed):
    p = random_param_point(G, seed=seed, bound=30)
    J = build_jacobian(G, p).matrix
    oracle = divided_difference_jacobian(G.m, G.edges, p.lam, p.diag, p.loading)
    assert J.tolist() == oracle


@settings(max_examples=40, deadline=None)
@given(dags(max_m=4), st.integers(0, 10**6), st.data())
def test_closed_form_matches_with_excluded_nodes(G, seed, data):
    excluded = data.draw(st.sets(st.sampled_from(list(G.nodes))))
    p = random_param_point(G, seed=seed, bound=30, excluded=excluded)
    J = build_jacobian(G, p).matrix
    keep = [v for v in G.nodes if v not in excluded]
    assert J.tolist() == divided_difference_jacobian(G.m, G.edges, p.lam, p.diag, p.loading, keep)


def _upper(S):
    m = S.rows
    return [S[i, j] for i in range(m) for j in range(i, m)]


def _jac(mapping, kind, G, lam, diag, loading):
    def f(l2, d2, g2):
        return _upper(mapping(G, ParamPoint(kind, l2, d2, g2)))
    return RatMatrix.from_rows(stencil_jacobian(f, G.m, G.edges, lam, diag, loading))


def _rational_rho_point(G, rng):
    """(Lambda, Omega, delta) with 1 + delta^T Omega^-1 delta a rational square, plus rho of it."""
    m = G.m
    lam = {e: Fraction(rng.randint(-9, 9) or 1) for e in G.sorted_edges()}
    omega = [Fraction(rng.randint(1, 9)) for _ in range(m)]
    u = [Fraction(rng.choice([-1, 1]) * rng.randint(1, 5)) for _ in range(m)]
    q = sum(x * x / w for x, w in zip(u, omega))
    t = Fraction(rng.randint(1, 7), rng.randint(1, 7))
    while t * t == q:
        t += 1
    c = 2 * t / (q - t * t)
    s = abs(1 + t * c)
    delta = [c * x for x in u]
    assert 1 + sum(d * d / w for d, w in zip(delta, omega)) == s * s
    psi = [1 / w for w in omega]
    gamma = [d / (w * s) for d, w in zip(delta, omega)]
    return lam, omega, delta, psi, gamma


def test_reparametrizations_preserve_jacobian_rank():
    rng = random.Random(2024)
    checked = 0
    for _ in range(25):
        m = rng.randint(2, 5)
        G = bounded_dags(m, rng)
        lam, omega, delta, psi, gamma = _rational_rho_point(G, rng)
        S = phi(G, ParamPoint("covariance", lam, omega, delta))
        assert inverse(S) == varphi(G, ParamPoint("concentration", lam, psi, gamma))

        A = RatMatrix.identity(m) - ParamPoint("covariance", lam, omega, delta).lambda_matrix()
        g_delta = inverse(A.T).matvec(delta)
        h_gamma = A.matvec(gamma)
        r_phi = rank(_jac(phi, "covariance", G, lam, omega, delta))
        r_phi_t = rank(_jac(phi_tilde, "covariance", G, lam, omega, g_delta))
        r_vphi = rank(_jac(varphi, "concentration", G, lam, psi, gamma))
        r_vphi_t = rank(_jac(varphi_tilde, "concentration", G, lam, psi, h_gamma))
        r_closed = rank(build_jacobian(G, ParamPoint("concentration", lam, psi, h_gamma)).matrix)
        assert r_phi == r_phi_t == r_vphi == r_vphi_t == r_closed
        checked += 1
    assert checked == 25


def test_full_gamma_block_implies_full_rank():
    rng = random.Random(99)
    hits = 0
    for trial in range(150):
        m = rng.randint(3, 6)
        G = bounded_dags(m, rng)
        p = random_param_point(G, seed=trial, bound=10**4)
        J = build_jacobian(G, p)
        sub = J.matrix.submatrix(J.rows_of("N"), J.cols_of("gamma"))
        if rank(sub) == m:
            hits += 1
            assert rank(J.matrix) == J.matrix.cols
    assert hits > 20


def test_rank_matches_networkx_atlas_sample():
    for H in nx.graph_atlas_g()[1:60]:
        n = H.number_of_nodes()
        U = UGraph(n, frozenset((a + 1, b + 1) for a, b in H.edges))
        assert product_map_rank(U) == n - count_even_components(U)


def test_dump_format_roundtrips():
    from latentdag.exact_linalg import parse_matrix
    G = make_dag(*DIAMOND_TAIL)
    J = build_jacobian(G, random_param_point(G, seed=1, bound=100))
    text = J.to_text()
    assert "# row (1,1)" in text and "# row (3,5)" in text
    assert text.splitlines()[0].startswith("# cols psi_1")
    assert parse_matrix(text) == J.matrix
    assert J.to_text() == text
