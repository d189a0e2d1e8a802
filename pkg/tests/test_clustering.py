import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapminer.clustering import (
    Cover,
    UndirectedView,
    build_intention_map,
    eagle_cluster,
    extended_modularity,
    maximal_cliques,
)
from mapminer.mapbuilder import MapError, build_pseudo_map

from oracles import best_cover_eq, brute_maximal_cliques, eq_oracle, random_graph


def complete(n, offset=0):
    return [(offset + u, offset + v) for u, v in itertools.combinations(range(n), 2)]


def two_k4_bridge():
    edges = complete(4) + complete(4, 4) + [(3, 4)]
    return UndirectedView(range(8), edges), edges


# -- maximal cliques ------------------------------------------------------------


def test_k4_single_clique():
    assert maximal_cliques(UndirectedView(range(4), complete(4))) == [(0, 1, 2, 3)]


def test_bowtie():
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]
    got = maximal_cliques(UndirectedView(range(5), edges))
    assert got == [(0, 1, 2), (2, 3, 4)] == brute_maximal_cliques(range(5), edges)


def test_edgeless_singletons():
    assert maximal_cliques(UndirectedView(range(5))) == [(0,), (1,), (2,), (3,), (4,)]


@given(st.integers(0, 100_000), st.integers(1, 10), st.floats(0.1, 0.9))
@settings(max_examples=150, deadline=None)
def test_cliques_match_exhaustive_enumeration(seed, n, p):
    edges = random_graph(np.random.default_rng(seed), n, p)
    assert maximal_cliques(UndirectedView(range(n), edges)) == brute_maximal_cliques(range(n), edges)


# -- extended modularity -----------------------------------------------------------


def test_eq_two_disjoint_triangles():
    edges = complete(3) + complete(3, 3)
    g = UndirectedView(range(6), edges)
    assert extended_modularity([(0, 1, 2), (3, 4, 5)], g) == pytest.approx(0.5, abs=1e-12)


def test_eq_whole_graph_is_trivial_partition():
    rng = np.random.default_rng(2)
    edges = random_graph(rng, 9, 0.4)
    g = UndirectedView(range(9), edges)
    a = np.zeros((9, 9))
    for u, v in edges:
        a[u, v] = a[v, u] = 1
    k, m2 = a.sum(1), a.sum()
    direct = sum(a[v, w] - k[v] * k[w] / m2 for v in range(9) for w in range(9)) / m2
    assert extended_modularity([tuple(range(9))], g) == pytest.approx(direct, abs=1e-12)


def test_eq_empty_cover_and_edgeless():
    assert extended_modularity([], UndirectedView(range(3), [(0, 1)])) == 0.0
    assert extended_modularity([(0, 1)], UndirectedView(range(3))) == 0.0


def test_eq_equals_networkx_modularity_for_partitions():
    import networkx as nx

    rng = np.random.default_rng(4)
    for _ in range(20):
        edges = random_graph(rng, 10, 0.35)
        if not edges:
            continue
        labels = rng.integers(0, 3, size=10)
        parts = [tuple(np.flatnonzero(labels == c)) for c in range(3) if np.any(labels == c)]
        g = nx.Graph()
        g.add_nodes_from(range(10))
        g.add_edges_from(edges)
        expected = nx.community.modularity(g, [set(p) for p in parts])
        assert extended_modularity(parts, UndirectedView(range(10), edges)) == pytest.approx(expected, abs=1e-12)


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_eq_matches_matrix_oracle_with_overlap(seed):
    rng = np.random.default_rng(seed)
    edges = random_graph(rng, 8, 0.4)
    cover = [tuple(sorted(set(rng.choice(8, size=int(rng.integers(2, 6)), replace=False).tolist())))
             for _ in range(3)]
    got = extended_modularity(cover, UndirectedView(range(8), edges))
    assert got == pytest.approx(eq_oracle(cover, 8, edges), abs=1e-12)


# -- EAGLE --------------------------------------------------------------------------


def test_eagle_two_k4_bridge():
    g, edges = two_k4_bridge()
    cover = eagle_cluster(g, 3, 2)
    assert cover.communities == ((0, 1, 2, 3), (4, 5, 6, 7))
    assert cover.outliers == ()
    assert cover.eq_score == pytest.approx(best_cover_eq(8, edges), abs=1e-12)


def test_eagle_triangle():
    edges = complete(3)
    cover = eagle_cluster(UndirectedView(range(3), edges))
    assert cover.communities == ((0, 1, 2),)
    assert cover.eq_score == pytest.approx(best_cover_eq(3, edges), abs=1e-12)


def test_eagle_k5():
    assert eagle_cluster(UndirectedView(range(5), complete(5))).communities == ((0, 1, 2, 3, 4),)


def test_eagle_edgeless():
    cover = eagle_cluster(UndirectedView(range(4)))
    assert cover.communities == () and cover.outliers == (0, 1, 2, 3) and cover.eq_score == 0.0


def test_eagle_two_disjoint_triangles():
    cover = eagle_cluster(UndirectedView(range(6), complete(3) + complete(3, 3)))
    assert cover.communities == ((0, 1, 2), (3, 4, 5))
    assert cover.eq_score == pytest.approx(0.5, abs=1e-12)


def test_eagle_overlapping_cliques_can_share_nodes():
    # two K4s sharing nodes 3 and 4, plus pendant structure
    edges = complete(5)[:0] + [(u, v) for u, v in complete(5) if not {u, v} <= {0, 5}]
    edges = sorted(set(complete(4) + [(2, 3), (2, 4), (3, 4), (2, 5), (3, 5), (4, 5)]))
    g = UndirectedView(range(6), edges)
    cover = eagle_cluster(g, 3, 2)
    union = set().union(*cover.communities)
    assert union == set(range(6))


def test_eagle_small_complexes_become_outliers():
    edges = complete(4) + [(3, 4), (5, 6)]
    cover = eagle_cluster(UndirectedView(range(8), edges), 3, 3)
    assert 7 in cover.outliers  # isolated
    for c in cover.communities:
        assert len(c) >= 3


def _connected(nodes, g):
    nodes = set(nodes)
    start = min(nodes)
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for w in g.adj[u]:
            if w in nodes and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == nodes


@given(st.integers(0, 100_000), st.integers(2, 12), st.floats(0.1, 0.7))
@settings(max_examples=80, deadline=None)
def test_eagle_invariants(seed, n, p):
    edges = random_graph(np.random.default_rng(seed), n, p)
    g = UndirectedView(range(n), edges)
    cover = eagle_cluster(g, 3, 2)
    again = eagle_cluster(UndirectedView(range(n), list(reversed(edges))), 3, 2)
    assert cover == again
    members = set()
    for c in cover.communities:
        assert len(c) >= 2
        assert _connected(c, g)
        members |= set(c)
    assert members | set(cover.outliers) == set(range(n))
    assert not members & set(cover.outliers)
    counts = cover.membership_count
    for v in members:
        assert counts[v] == sum(v in c for c in cover.communities)
    if edges:
        assert cover.eq_score == pytest.approx(eq_oracle(cover.communities, n, edges), abs=1e-12)


def test_cluster_names_by_size():
    edges = complete(3) + complete(5, 3) + [(2, 3)]
    cover = eagle_cluster(UndirectedView(range(8), edges))
    assert cover.names == ["C1", "C2"]
    assert cover.communities[0] == (3, 4, 5, 6, 7)
    assert cover.clusters_of(0) == ["C2"]


def test_cover_json_round_trip():
    g, _ = two_k4_bridge()
    cover = eagle_cluster(g)
    back = Cover.from_dict(cover.to_dict())
    assert back.communities == cover.communities and back.eq_score == cover.eq_score


# -- intention map --------------------------------------------------------------------


def test_intention_map_single_community():
    pmap = build_pseudo_map([(0, 1, 0.6), (1, 2, 0.7), (2, 0, 0.5)], 3)
    imap = build_intention_map(pmap, Cover(((0, 1, 2),), (), 0.0), start=0, stop=2)
    assert [n for n, _ in imap.intentions] == ["C1"]
    (edge,) = imap.edges
    assert edge.internal and edge.count == 3
    assert edge.strategies == ("S1", "S2", "S3")
    assert imap.start_attached == ("C1",) and imap.stop_attached == ("C1",)


def test_intention_map_disconnected_communities():
    pmap = build_pseudo_map([(0, 1, 0.5), (2, 3, 0.5)], 4)
    imap = build_intention_map(pmap, Cover(((0, 1), (2, 3)), (), 0.0))
    assert all(e.internal for e in imap.edges)
    assert len(imap.edges) == 2


def test_intention_map_rejects_foreign_nodes():
    pmap = build_pseudo_map([(0, 1, 0.5)], 2)
    with pytest.raises(MapError):
        build_intention_map(pmap, Cover(((0, 5),), (), 0.0))


def test_intention_map_projection_oracle():
    rng = np.random.default_rng(8)
    edges = [(i, j, float(w)) for i in range(12) for j in range(12)
             if (w := rng.random()) > 0.75]
    pmap = build_pseudo_map(edges, 12)
    cover = Cover(((0, 1, 2, 3, 4), (2, 5, 6, 7), (8, 9, 10, 2)), (11,), 0.0)
    imap = build_intention_map(pmap, cover, 6, 11)
    # replay every edge independently
    names = {k: f"C{k + 1}" for k in range(3)}
    expected = {}
    skipped = 0
    for i, j, w in edges:
        src = [k for k, c in enumerate(cover.communities) if i in c]
        dst = [k for k, c in enumerate(cover.communities) if j in c]
        if not src or not dst:
            skipped += 1
        for a in src:
            for b in dst:
                slot = expected.setdefault((names[a], names[b]), [set(), 0.0, 0])
                slot[0].add(f"S{j + 1}")
                slot[1] += w
                slot[2] += 1
    got = {(e.source, e.target): [set(e.strategies), e.weight, e.count] for e in imap.edges}
    assert got.keys() == expected.keys()
    for key in got:
        assert got[key][0] == expected[key][0] and got[key][2] == expected[key][2]
        assert got[key][1] == pytest.approx(expected[key][1], abs=1e-12)
    assert imap.unprojected_edges == skipped
    assert imap.stop_attached == ()


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_partition_cover_preserves_total_weight(seed):
    rng = np.random.default_rng(seed)
    edges = [(i, j, float(rng.random())) for i in range(8) for j in range(8) if rng.random() < 0.3]
    pmap = build_pseudo_map(edges, 8)
    labels = rng.integers(0, 3, size=8)
    parts = tuple(tuple(np.flatnonzero(labels == c).tolist()) for c in range(3) if np.any(labels == c))
    imap = build_intention_map(pmap, Cover(parts, (), 0.0))
    assert sum(e.weight for e in imap.edges) == pytest.approx(sum(w for *_, w in edges), abs=1e-12)
