"""Brute-force reference computations, independent of the package code paths."""

from __future__ import annotations

import itertools
import math

import numpy as np


def random_stochastic(rng: np.random.Generator, shape) -> np.ndarray:
    a = rng.random(shape) + 1e-3
    return a / a.sum(axis=-1, keepdims=True)


def path_probability(pi, trans, emit, path, seq) -> float:
    p = pi[path[0]] * emit[path[0], seq[0]]
    for t in range(1, len(seq)):
        p *= trans[path[t - 1], path[t]] * emit[path[t], seq[t]]
    return float(p)


def brute_likelihood(pi, trans, emit, seq) -> float:
    n = len(pi)
    return sum(
        path_probability(pi, trans, emit, path, seq)
        for path in itertools.product(range(n), repeat=len(seq))
    )


def brute_viterbi(pi, trans, emit, seq, rel_tie=1e-12):
    """Argmax path by enumeration.

    Paths within ``rel_tie`` of the best count as tied; among those the one
    a lowest-index backtrack would produce wins, i.e. the smallest path when
    compared from the last state backwards.
    """
    scored = [
        (path_probability(pi, trans, emit, path, seq), path)
        for path in itertools.product(range(len(pi)), repeat=len(seq))
    ]
    best_p = max(p for p, _ in scored)
    tied = [path for p, path in scored if p >= best_p * (1 - rel_tie)]
    best = min(tied, key=lambda path: path[::-1])
    return list(best), math.log(best_p) if best_p > 0 else -math.inf


def brute_maximal_cliques(nodes, edges) -> list[tuple[int, ...]]:
    nodes = sorted(nodes)
    es = {frozenset(e) for e in edges if e[0] != e[1]}
    cliques = []
    for r in range(1, len(nodes) + 1):
        for sub in itertools.combinations(nodes, r):
            if all(frozenset(p) in es for p in itertools.combinations(sub, 2)):
                cliques.append(frozenset(sub))
    maximal = [c for c in cliques if not any(c < d for d in cliques)]
    return sorted(tuple(sorted(c)) for c in maximal)


def random_graph(rng: np.random.Generator, n: int, p: float):
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]


def floyd_warshall(n: int, edges) -> np.ndarray:
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in edges:
        if u != v:
            d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def metrics_oracle(n: int, edges) -> dict:
    """Node and network metrics from an adjacency matrix and all-pairs distances."""
    a = np.zeros((n, n), dtype=int)
    for u, v in edges:
        if u != v:
            a[u, v] = a[v, u] = 1
    deg = a.sum(axis=1)
    d = floyd_warshall(n, edges)
    nodes = []
    for v in range(n):
        tri = sum(
            a[v, x] * a[v, y] * a[x, y] for x in range(n) for y in range(x + 1, n)
        )
        cc = 2 * tri / (deg[v] * (deg[v] - 1)) if deg[v] >= 2 else 0.0
        finite = [d[v, w] for w in range(n) if w != v and np.isfinite(d[v, w])]
        cl = len(finite) / sum(finite) if finite else 0.0
        ec = int(max(finite)) if finite else 0
        nc = sum(deg[w] for w in range(n) if a[v, w]) / deg[v] if deg[v] else 0.0
        nodes.append((cc, cl, ec, nc))
    m = a.sum() // 2
    finite_all = [d[u, w] for u in range(n) for w in range(n) if u != w and np.isfinite(d[u, w])]
    net = {
        "diameter": int(max(finite_all)) if finite_all else 0,
        "density": 2 * m / (n * (n - 1)),
        "centralization": (
            sum(deg.max() - deg) / ((n - 1) * (n - 2)) if n > 2 else 0.0
        ),
        "cpl": sum(finite_all) / len(finite_all) if finite_all else 0.0,
    }
    return {"nodes": nodes, "network": net}


def eq_oracle(communities, n: int, edges) -> float:
    """Extended modularity straight from the adjacency matrix."""
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] = a[v, u] = 1
    k = a.sum(axis=1)
    m2 = a.sum()
    if m2 == 0:
        return 0.0
    o = np.zeros(n)
    for c in communities:
        for v in c:
            o[v] += 1
    q = 0.0
    for c in communities:
        for v in c:
            for w in c:
                q += (a[v, w] - k[v] * k[w] / m2) / (o[v] * o[w])
    return q / m2


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def best_cover_eq(n: int, edges) -> float:
    """Maximum EQ over every partition of the nodes and every two-community
    overlapping cover (pairs of subsets whose union is all nodes)."""
    best = -math.inf
    nodes = list(range(n))
    for part in set_partitions(nodes):
        best = max(best, eq_oracle(part, n, edges))
    subsets = [
        frozenset(s) for r in range(1, n + 1) for s in itertools.combinations(nodes, r)
    ]
    full = frozenset(nodes)
    for i, s in enumerate(subsets):
        for t in subsets[i + 1:]:
            if s | t == full and s & t:
                best = max(best, eq_oracle([s, t], n, edges))
    return best


# planted 3-state / 6-symbol model; emission rows overlap by 0.15 in total
PLANTED_PI = [0.5, 0.3, 0.2]
PLANTED_TRANS = [[0.7, 0.2, 0.1], [0.15, 0.7, 0.15], [0.1, 0.2, 0.7]]
PLANTED_EMIT = [
    [0.5, 0.4, 0.04, 0.03, 0.02, 0.01],
    [0.02, 0.03, 0.45, 0.45, 0.03, 0.02],
    [0.01, 0.03, 0.02, 0.04, 0.4, 0.5],
]
