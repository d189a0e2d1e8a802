"""Overlapping clustering of sub-intentions into intentions (EAGLE).

Maximal cliques above a size threshold seed the communities, uncovered
vertices start as singletons, communities are merged agglomeratively and the
resulting dendrogram is cut where the extended modularity (EQ) peaks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .mapbuilder import MapError, PseudoMap


class UndirectedView:
    """Simple undirected graph over integer nodes (no self-edges)."""

    def __init__(self, nodes, edges=()):
        self.nodes: tuple[int, ...] = tuple(sorted(set(nodes)))
        adj: dict[int, set[int]] = {v: set() for v in self.nodes}
        for u, v in edges:
            if u == v:
                continue
            if u not in adj or v not in adj:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            adj[u].add(v)
            adj[v].add(u)
        self.adj: dict[int, frozenset[int]] = {v: frozenset(n) for v, n in adj.items()}

    @classmethod
    def from_pseudo_map(cls, pmap: PseudoMap) -> "UndirectedView":
        return cls(pmap.nodes, ((e.source, e.target) for e in pmap.edges))

    def __len__(self) -> int:
        return len(self.nodes)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in self.nodes for v in self.adj[u] if u < v)

    @property
    def n_edges(self) -> int:
        return sum(len(n) for n in self.adj.values()) // 2

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj.get(u, ())

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges()]}


def maximal_cliques(g: UndirectedView) -> list[tuple[int, ...]]:
    """All maximal cliques (Bron-Kerbosch with Tomita pivoting), each sorted,
    listed in lexicographic order. Isolated vertices are singleton cliques."""
    adj = g.adj
    found: list[tuple[int, ...]] = []

    def expand(r: list[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            found.append(tuple(sorted(r)))
            return
        pivot = max(sorted(p | x), key=lambda u: len(p & adj[u]))
        for v in sorted(p - adj[pivot]):
            expand(r + [v], p & adj[v], x & adj[v])
            p.discard(v)
            x.add(v)

    expand([], set(g.nodes), set())
    return sorted(found)


def _memberships(communities) -> dict[int, int]:
    counts: dict[int, int] = {}
    for c in communities:
        for v in c:
            counts[v] = counts.get(v, 0) + 1
    return counts


def extended_modularity(communities, g: UndirectedView) -> float:
    """Overlap-aware modularity; reduces to Newman's Q for a partition.

    Every ordered node pair (v, w) inside a community, including v == w,
    contributes (A_vw - k_v k_w / 2m) / (O_v O_w), where O_v counts the
    communities containing v.
    """
    m = g.n_edges
    if m == 0:
        return 0.0
    two_m = 2.0 * m
    occ = _memberships(communities)
    total = 0.0
    for c in communities:
        members = sorted(c)
        for v in members:
            kv = len(g.adj[v])
            for w in members:
                a = 1.0 if w in g.adj[v] else 0.0
                total += (a - kv * len(g.adj[w]) / two_m) / (occ[v] * occ[w])
    return total / two_m


@dataclass(frozen=True)
class Cover:
    communities: tuple[tuple[int, ...], ...]
    outliers: tuple[int, ...]
    eq_score: float
    # EQ at each dendrogram level (level 0 = seed communities) and the chosen cut
    eq_by_level: tuple[float, ...] = field(default=(), compare=False)
    cut_level: int = field(default=0, compare=False)

    @property
    def names(self) -> list[str]:
        return [f"C{k + 1}" for k in range(len(self.communities))]

    @property
    def membership_count(self) -> dict[int, int]:
        return _memberships(self.communities)

    def clusters_of(self, v: int) -> list[str]:
        return [n for n, c in zip(self.names, self.communities) if v in c]

    def to_dict(self) -> dict:
        return {
            "communities": [list(c) for c in self.communities],
            "names": self.names,
            "outliers": list(self.outliers),
            "eq": self.eq_score,
            "eq_by_level": list(self.eq_by_level),
            "cut_level": self.cut_level,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Cover":
        return cls(
            tuple(_canonical(frozenset(c) for c in doc["communities"])),
            tuple(doc.get("outliers", ())),
            float(doc.get("eq", 0.0)),
        )


def _canonical(communities) -> list[tuple[int, ...]]:
    """Order communities by descending size, then smallest node id."""
    return sorted((tuple(sorted(c)) for c in communities), key=lambda c: (-len(c), c))


def _density(nodes: frozenset[int], g: UndirectedView) -> Fraction:
    n = len(nodes)
    if n < 2:
        return Fraction(0)
    inside = sum(1 for u in nodes for v in g.adj[u] if u < v and v in nodes)
    return Fraction(inside, n * (n - 1) // 2)


def _touching(a: frozenset[int], b: frozenset[int], g: UndirectedView) -> bool:
    return bool(a & b) or any(g.adj[u] & b for u in a)


def eagle_cluster(
    g: UndirectedView, clique_size_threshold: int = 3, complex_size_threshold: int = 2
) -> Cover:
    """Agglomerative overlapping clustering seeded by maximal cliques.

    Merges always join two communities that overlap or share an edge, picking
    the pair whose union is densest (ties: lexicographically smallest pair).
    Merging stops when no such pair is left, so every community stays
    connected. The dendrogram level with maximal EQ is kept (earliest level
    on ties) and communities below ``complex_size_threshold`` are dropped.
    """
    if g.n_edges == 0:
        return Cover((), tuple(g.nodes), 0.0, (0.0,), 0)

    seeds = [frozenset(c) for c in maximal_cliques(g) if len(c) >= clique_size_threshold]
    covered = set().union(*seeds) if seeds else set()
    seeds += [frozenset([v]) for v in g.nodes if v not in covered]
    current = [frozenset(c) for c in _canonical(seeds)]

    levels = [list(current)]
    while len(current) > 1:
        best = None
        for a, b in combinations(current, 2):
            if not _touching(a, b, g):
                continue
            ka, kb = sorted((tuple(sorted(a)), tuple(sorted(b))))
            key = (-_density(a | b, g), ka, kb)
            if best is None or key < best[0]:
                best = (key, a, b)
        if best is None:
            break
        _, a, b = best
        current = [c for c in current if c is not a and c is not b] + [a | b]
        current = [frozenset(c) for c in _canonical(current)]
        levels.append(list(current))

    eqs = [extended_modularity(level, g) for level in levels]
    cut = 0
    for k, q in enumerate(eqs):
        if q > eqs[cut] + 1e-12:
            cut = k
    kept = [c for c in levels[cut] if len(c) >= complex_size_threshold]
    communities = tuple(_canonical(kept))
    in_any = set().union(*communities) if communities else set()
    outliers = tuple(v for v in g.nodes if v not in in_any)
    return Cover(
        communities, outliers, extended_modularity(communities, g), tuple(eqs), cut
    )


@dataclass(frozen=True)
class IntentionEdge:
    source: str
    target: str
    strategies: tuple[str, ...]
    weight: float
    count: int

    @property
    def internal(self) -> bool:
        return self.source == self.target

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "strategies": list(self.strategies),
            "weight": self.weight,
            "count": self.count,
            "internal": self.internal,
        }


@dataclass(frozen=True)
class IntentionMap:
    intentions: tuple[tuple[str, tuple[int, ...]], ...]
    edges: tuple[IntentionEdge, ...]
    start: int | None
    stop: int | None
    start_attached: tuple[str, ...]
    stop_attached: tuple[str, ...]
    unprojected_edges: int

    def to_dict(self) -> dict:
        return {
            "intentions": [{"name": n, "members": list(m)} for n, m in self.intentions],
            "start": {"node": self.start, "attached_to": list(self.start_attached)},
            "stop": {"node": self.stop, "attached_to": list(self.stop_attached)},
            "edges": [e.to_dict() for e in self.edges],
            "unprojected_edges": self.unprojected_edges,
        }


def _strategy_key(label: str) -> int:
    return int(label[1:])


def build_intention_map(
    pmap: PseudoMap, cover: Cover, start: int | None = None, stop: int | None = None
) -> IntentionMap:
    """Coarse map: one node per community plus Start/Stop attachments.

    Each pseudo-map edge is projected onto every (community of source,
    community of target) pair; strategy labels are unioned and weights summed.
    Edges touching an outlier are counted in ``unprojected_edges``.
    """
    for c in cover.communities:
        for v in c:
            if not 0 <= v < pmap.n_states:
                raise MapError(f"cover node {v} is not in the pseudo-map")
    for name, node in (("start", start), ("stop", stop)):
        if node is not None and not 0 <= node < pmap.n_states:
            raise MapError(f"{name} node {node} outside [0, {pmap.n_states})")

    names = cover.names
    homes: dict[int, list[int]] = {v: [] for v in pmap.nodes}
    for k, c in enumerate(cover.communities):
        for v in c:
            homes[v].append(k)

    agg: dict[tuple[int, int], list] = {}
    unprojected = 0
    for e in pmap.edges:
        if not homes[e.source] or not homes[e.target]:
            unprojected += 1
            continue
        for a in homes[e.source]:
            for b in homes[e.target]:
                slot = agg.setdefault((a, b), [set(), 0.0, 0])
                slot[0].add(e.label)
                slot[1] += e.weight
                slot[2] += 1
    edges = tuple(
        IntentionEdge(names[a], names[b], tuple(sorted(s[0], key=_strategy_key)), s[1], s[2])
        for (a, b), s in sorted(agg.items())
    )
    return IntentionMap(
        intentions=tuple(zip(names, cover.communities)),
        edges=edges,
        start=start,
        stop=stop,
        start_attached=tuple(names[k] for k in homes[start]) if start is not None else (),
        stop_attached=tuple(names[k] for k in homes[stop]) if stop is not None else (),
        unprojected_edges=unprojected,
    )
