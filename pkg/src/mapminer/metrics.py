"""Node- and network-level statistics on the undirected, unweighted view.

Disconnected graphs follow the usual tooling conventions: closeness and
eccentricity are taken over the reachable set, characteristic path length
over finite pairs, and the diameter is the largest finite eccentricity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

from .clustering import UndirectedView


@dataclass(frozen=True)
class NodeMetrics:
    node: int
    clustering_coefficient: float
    closeness_centrality: float
    eccentricity: int
    neighborhood_connectivity: float


@dataclass(frozen=True)
class NetworkMetrics:
    diameter: int
    density: float
    degree_centralization: float
    characteristic_path_length: float


def bfs_distances(g: UndirectedView, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in sorted(g.adj[u]):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def node_metrics(g: UndirectedView) -> list[NodeMetrics]:
    out = []
    for v in g.nodes:
        nbrs = g.adj[v]
        deg = len(nbrs)
        if deg < 2:
            cc = 0.0
        else:
            links = sum(1 for a in nbrs for b in g.adj[a] if a < b and b in nbrs)
            cc = 2.0 * links / (deg * (deg - 1))
        dist = bfs_distances(g, v)
        reach = len(dist) - 1
        total = sum(dist.values())
        closeness = reach / total if total else 0.0
        ecc = max(dist.values())
        nc = sum(len(g.adj[w]) for w in nbrs) / deg if deg else 0.0
        out.append(NodeMetrics(v, cc, closeness, ecc, nc))
    return out


def network_metrics(g: UndirectedView) -> NetworkMetrics:
    n = len(g)
    if n < 2:
        raise ValueError("network metrics need at least two nodes")
    degrees = [g.degree(v) for v in g.nodes]
    density = 2.0 * g.n_edges / (n * (n - 1))
    if n > 2:
        dmax = max(degrees)
        centralization = sum(dmax - d for d in degrees) / ((n - 1) * (n - 2))
    else:
        centralization = 0.0
    diameter = 0
    path_sum = 0
    pairs = 0
    for v in g.nodes:
        dist = bfs_distances(g, v)
        diameter = max(diameter, max(dist.values()))
        path_sum += sum(dist.values())
        pairs += len(dist) - 1
    cpl = path_sum / pairs if pairs else 0.0
    return NetworkMetrics(diameter, density, centralization, cpl)


def metrics_report(g: UndirectedView) -> dict:
    doc = {"nodes": [asdict(m) for m in node_metrics(g)]}
    doc["network"] = asdict(network_metrics(g)) if len(g) >= 2 else None
    return doc


def render_node_table(rows: list[NodeMetrics], clusters: dict[int, list[str]] | None = None) -> str:
    header = ["Node"] + (["Cluster"] if clusters is not None else []) + ["CC", "CL", "EC", "NC"]
    table = [header]
    for m in rows:
        row = [str(m.node)]
        if clusters is not None:
            row.append(", ".join(clusters.get(m.node, [])) or "-")
        row += [
            f"{m.clustering_coefficient:.2f}",
            f"{m.closeness_centrality:.2f}",
            str(m.eccentricity),
            f"{m.neighborhood_connectivity:.2f}",
        ]
        table.append(row)
    widths = [max(len(r[k]) for r in table) for k in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table)
