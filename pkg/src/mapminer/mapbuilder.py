"""Pseudo-map construction from a learned transition matrix.

Transitions below ``epsilon`` are dropped. Every hidden state i is a
sub-intention I_i; a retained transition i -> j becomes an edge I_i -> I_j
labelled with strategy S_j, the strategy whose enactment reaches I_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

import numpy as np


class MapError(ValueError):
    pass


@dataclass(frozen=True)
class MapEdge:
    source: int
    target: int
    weight: float

    @property
    def label(self) -> str:
        return f"S{self.target + 1}"


@dataclass(frozen=True)
class PseudoMap:
    n_states: int
    edges: tuple[MapEdge, ...]
    epsilon: float

    @property
    def nodes(self) -> range:
        return range(self.n_states)

    def in_degree(self, ignore_self_loops: bool = True) -> list[int]:
        deg = [0] * self.n_states
        for e in self.edges:
            if not (ignore_self_loops and e.source == e.target):
                deg[e.target] += 1
        return deg

    def out_degree(self, ignore_self_loops: bool = True) -> list[int]:
        deg = [0] * self.n_states
        for e in self.edges:
            if not (ignore_self_loops and e.source == e.target):
                deg[e.source] += 1
        return deg

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "epsilon": self.epsilon,
            "nodes": [f"I{i}" for i in self.nodes],
            "edges": [
                {"source": e.source, "target": e.target, "weight": e.weight, "label": e.label}
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PseudoMap":
        try:
            edges = [(int(e["source"]), int(e["target"]), float(e["weight"])) for e in doc["edges"]]
            return build_pseudo_map(edges, int(doc["n_states"]), float(doc.get("epsilon", 0.0)))
        except (KeyError, TypeError) as exc:
            raise MapError(f"malformed pseudo-map document: {exc!r}") from None


@dataclass(frozen=True)
class StartStopReport:
    start_candidates: tuple[int, ...]
    stop_candidates: tuple[int, ...]
    selected_start: int | None
    selected_stop: int | None
    start_overridden: bool = False
    stop_overridden: bool = False
    # strongest non-self outgoing weight per node; a weak sink shows a small value
    max_out_weight: tuple[float, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "start_candidates": list(self.start_candidates),
            "stop_candidates": list(self.stop_candidates),
            "selected_start": self.selected_start,
            "selected_stop": self.selected_stop,
            "start_overridden": self.start_overridden,
            "stop_overridden": self.stop_overridden,
            "max_out_weight": list(self.max_out_weight),
        }


def prune_transitions(trans, epsilon: float = 0.15) -> list[tuple[int, int, float]]:
    """Entries ``trans[i][j] >= epsilon`` (and > 0) as row-major (i, j, weight) triples."""
    if not 0 <= epsilon < 1:
        raise MapError(f"epsilon must lie in [0, 1), got {epsilon}")
    t = np.asarray(trans, dtype=np.float64)
    edges = []
    for i in range(t.shape[0]):
        for j in range(t.shape[1]):
            w = float(t[i, j])
            if w >= epsilon and w > 0:
                edges.append((i, j, w))
    return edges


def build_pseudo_map(edges, n_states: int, epsilon: float = 0.0) -> PseudoMap:
    out = []
    for i, j, w in edges:
        if not (0 <= i < n_states and 0 <= j < n_states):
            raise MapError(f"edge ({i}, {j}) outside {n_states} nodes")
        out.append(MapEdge(int(i), int(j), float(w)))
    return PseudoMap(n_states, tuple(out), epsilon)


def find_start_stop(
    pmap: PseudoMap, start: int | None = None, stop: int | None = None
) -> StartStopReport:
    """Start candidates have no incoming edge, stop candidates no outgoing one.

    Self-loops are ignored for both. Without overrides the lowest-index
    candidate is selected; an empty candidate set leaves the selection unset.
    """
    for name, node in (("start", start), ("stop", stop)):
        if node is not None and not 0 <= node < pmap.n_states:
            raise MapError(f"{name} override {node} outside [0, {pmap.n_states})")
    indeg = pmap.in_degree()
    outdeg = pmap.out_degree()
    starts = tuple(v for v in pmap.nodes if indeg[v] == 0)
    stops = tuple(v for v in pmap.nodes if outdeg[v] == 0)
    max_out = [0.0] * pmap.n_states
    for e in pmap.edges:
        if e.source != e.target:
            max_out[e.source] = max(max_out[e.source], e.weight)
    return StartStopReport(
        start_candidates=starts,
        stop_candidates=stops,
        selected_start=start if start is not None else (starts[0] if starts else None),
        selected_stop=stop if stop is not None else (stops[0] if stops else None),
        start_overridden=start is not None,
        stop_overridden=stop is not None,
        max_out_weight=tuple(max_out),
    )


def to_dot(pmap: PseudoMap, report: StartStopReport | None = None, header: str | None = None) -> str:
    """Graphviz rendering: node size grows with in-degree, pen width with weight."""
    indeg = pmap.in_degree(ignore_self_loops=False)
    lines = []
    if header:
        lines.append(f"// {header}")
    lines.append("digraph pseudo_map {")
    lines.append("  rankdir=LR;")
    lines.append('  node [shape=circle, fixedsize=true, fontname="Helvetica"];')
    for v in pmap.nodes:
        size = 0.4 + 0.2 * indeg[v]
        marks = []
        if report is not None:
            if v == report.selected_start:
                marks.append("Start")
            if v == report.selected_stop:
                marks.append("Stop")
        extra = f', peripheries=2, xlabel="{"/".join(marks)}"' if marks else ""
        lines.append(f'  I{v} [label="I{v}", width={size:.2f}, height={size:.2f}{extra}];')
    for e in pmap.edges:
        lines.append(
            f'  I{e.source} -> I{e.target} [label="{e.label} ({e.weight:.2f})", '
            f"weight={e.weight!r}, penwidth={0.5 + 5 * e.weight:.2f}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_graphml(pmap: PseudoMap) -> str:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        '  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>',
        '  <key id="label" for="edge" attr.name="label" attr.type="string"/>',
        '  <graph id="pseudo_map" edgedefault="directed">',
    ]
    for v in pmap.nodes:
        lines.append(f'    <node id="I{v}"/>')
    for k, e in enumerate(pmap.edges):
        lines.append(f'    <edge id="e{k}" source="I{e.source}" target="I{e.target}">')
        lines.append(f'      <data key="weight">{e.weight!r}</data>')
        lines.append(f"      <data key=\"label\">{quoteattr(e.label)[1:-1]}</data>")
        lines.append("    </edge>")
    lines += ["  </graph>", "</graphml>"]
    return "\n".join(lines) + "\n"
