"""End-to-end run: log -> HMM -> strategies -> pseudo-map -> intentions -> metrics.

Every artifact is a flat file in one output directory. JSON artifacts carry
the hash of the configuration that produced them and are written with sorted
keys so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import clustering, hmm, mapbuilder, metrics, strategy, synthgen
from .eventlog import ColumnSchema, EventLog, encode_cases

log = logging.getLogger(__name__)

RECOVERY_BOUND = 0.05


class ManifestConflict(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    n_states: int | None = None  # None: round(M / 3)
    epsilon: float = 0.15
    bw_iterations: int = 50
    bw_tolerance: float = 1e-6
    clique_size_threshold: int = 3
    complex_size_threshold: int = 2
    display_threshold: float = 0.005
    seed: int = 42
    schema: ColumnSchema = field(default_factory=ColumnSchema)
    start: int | None = None
    stop: int | None = None

    def __post_init__(self):
        if self.n_states is not None and self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.bw_iterations < 1:
            raise ValueError("bw_iterations must be >= 1")
        if self.bw_tolerance < 0:
            raise ValueError("bw_tolerance must be >= 0")
        if self.clique_size_threshold < 1 or self.complex_size_threshold < 1:
            raise ValueError("clique/complex size thresholds must be >= 1")
        if not 0 <= self.display_threshold < 1:
            raise ValueError("display_threshold must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = self.schema.to_dict()
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def resolve_states(self, n_symbols: int) -> int:
        return self.n_states if self.n_states is not None else max(1, round(n_symbols / 3))


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, doc) -> None:
    path.write_text(dump_json(doc), encoding="utf-8")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def check_manifest(out_dir: Path, config_hash: str, force: bool) -> None:
    manifest = out_dir / "manifest.json"
    if force or not manifest.exists():
        return
    try:
        old = json.loads(manifest.read_text(encoding="utf-8")).get("config_hash")
    except (OSError, json.JSONDecodeError):
        old = None
    if old != config_hash:
        raise ManifestConflict(
            f"{manifest} was produced with config {old}, not {config_hash}; use --force to overwrite"
        )


def train_model(event_log: EventLog, config: PipelineConfig):
    seqs = encode_cases(event_log)
    n_states = config.resolve_states(len(event_log.vocabulary))
    init = hmm.kmeans_init(seqs, n_states, config.seed, n_symbols=len(event_log.vocabulary))
    return hmm.baum_welch(init, seqs, config.bw_iterations, config.bw_tolerance)


def run_pipeline(
    event_log: EventLog,
    config: PipelineConfig,
    out_dir,
    *,
    input_path=None,
    truth: synthgen.GroundTruthSpec | None = None,
    force: bool = False,
) -> dict:
    """Run all stages and write artifacts into ``out_dir``; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    check_manifest(out_dir, chash, force)

    vocab = event_log.vocabulary
    log.info("training HMM on %d cases / %d events", event_log.n_cases, event_log.n_events)
    model, report = train_model(event_log, config)

    table = strategy.extract_strategies(model, vocab, config.display_threshold)
    edges = mapbuilder.prune_transitions(model.trans, config.epsilon)
    pmap = mapbuilder.build_pseudo_map(edges, model.n_states, config.epsilon)
    ends = mapbuilder.find_start_stop(pmap, config.start, config.stop)
    view = clustering.UndirectedView.from_pseudo_map(pmap)
    cover = clustering.eagle_cluster(
        view, config.clique_size_threshold, config.complex_size_threshold
    )
    imap = clustering.build_intention_map(pmap, cover, ends.selected_start, ends.selected_stop)
    node_rows = metrics.node_metrics(view)
    net = metrics.network_metrics(view) if len(view) >= 2 else None

    artifacts = {
        "config": "config.json",
        "model": "model.json",
        "strategies": "strategies.json",
        "strategies_table": "strategies.txt",
        "pseudo_map": "pseudo_map.json",
        "pseudo_map_dot": "pseudo_map.dot",
        "pseudo_map_graphml": "pseudo_map.graphml",
        "cover": "cover.json",
        "intention_map": "intention_map.json",
        "metrics": "metrics.json",
    }
    write_json(out_dir / artifacts["config"], {"config": config.to_dict(), "config_hash": chash})
    model_doc = hmm.model_to_dict(model, vocab)
    model_doc["config_hash"] = chash
    write_json(out_dir / artifacts["model"], model_doc)
    write_json(out_dir / artifacts["strategies"], {**table.to_dict(), "config_hash": chash})
    (out_dir / artifacts["strategies_table"]).write_text(table.render() + "\n", encoding="utf-8")
    write_json(
        out_dir / artifacts["pseudo_map"],
        {**pmap.to_dict(), "start_stop": ends.to_dict(), "config_hash": chash},
    )
    (out_dir / artifacts["pseudo_map_dot"]).write_text(
        mapbuilder.to_dot(pmap, ends, header=f"config_hash: {chash}"), encoding="utf-8"
    )
    (out_dir / artifacts["pseudo_map_graphml"]).write_text(mapbuilder.to_graphml(pmap), encoding="utf-8")
    write_json(out_dir / artifacts["cover"], {**cover.to_dict(), "config_hash": chash})
    write_json(out_dir / artifacts["intention_map"], {**imap.to_dict(), "config_hash": chash})
    write_json(
        out_dir / artifacts["metrics"],
        {
            "nodes": [asdict(r) for r in node_rows],
            "network": asdict(net) if net else None,
            "clusters": {str(v): cover.clusters_of(v) for v in view.nodes},
            "config_hash": chash,
        },
    )

    manifest = {
        "config": config.to_dict(),
        "config_hash": chash,
        "input": {
            "path": str(input_path) if input_path is not None else None,
            "sha256": file_digest(input_path) if input_path is not None else None,
            **event_log.summary(),
        },
        "n_states": model.n_states,
        "artifacts": artifacts,
        "training": report.to_dict(),
        "log_likelihood_curve": list(report.log_likelihood_per_iteration),
        "summary": {
            "edges": len(pmap.edges),
            "start_candidates": list(ends.start_candidates),
            "stop_candidates": list(ends.stop_candidates),
            "intentions": len(cover.communities),
            "outliers": list(cover.outliers),
            "eq": cover.eq_score,
        },
    }
    if truth is not None and truth.model.n_states != model.n_states:
        manifest["recovery"] = {
            "error": f"ground truth has {truth.model.n_states} states, model has {model.n_states}"
        }
    elif truth is not None:
        aligned = synthgen.align_emissions(model, vocab, truth.labels)
        rec = synthgen.recovery_errors(truth.model, model, aligned)
        rec["bound"] = RECOVERY_BOUND
        rec["within_bound"] = bool(
            rec["max_trans_row_l1"] <= RECOVERY_BOUND and rec["max_emit_row_l1"] <= RECOVERY_BOUND
        )
        manifest["recovery"] = rec
    write_json(out_dir / "manifest.json", manifest)
    return manifest
