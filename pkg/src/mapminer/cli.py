"""Command-line entry point: ``mapminer <subcommand> ...``.

Exit codes: 0 success, 1 data/validation/I-O error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import clustering, hmm, mapbuilder, metrics, strategy, synthgen
from .eventlog import ColumnSchema, EventLogError, activity_histogram, read_log, write_log
from .pipeline import (
    ManifestConflict,
    PipelineConfig,
    run_pipeline,
    train_model,
    write_json,
)

OUT_DIR_ENV = "MAPMINER_OUT_DIR"


def _default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, "mapminer-out")


def _schema_args(p: argparse.ArgumentParser) -> None:
    d = ColumnSchema()
    g = p.add_argument_group("input schema")
    g.add_argument("--delimiter", default=d.delimiter)
    g.add_argument("--case-column", default=d.case_id)
    g.add_argument("--timestamp-column", default=d.timestamp)
    g.add_argument("--activity-column", default=d.activity)
    g.add_argument("--group-column", default=d.group)
    g.add_argument("--timestamp-format", default=d.timestamp_format,
                   help="strptime pattern (default: %(default)s)")


def _schema(args) -> ColumnSchema:
    return ColumnSchema(
        case_id=args.case_column,
        timestamp=args.timestamp_column,
        activity=args.activity_column,
        group=args.group_column,
        delimiter=args.delimiter,
        timestamp_format=args.timestamp_format,
    )


def _training_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--states", type=int, default=None, help="hidden states (default: round(M/3))")
    p.add_argument("--iterations", type=int, default=50, help="Baum-Welch iteration budget")
    p.add_argument("--tolerance", type=float, default=1e-6, help="early-stop log-likelihood gain")
    p.add_argument("--seed", type=int, default=42)


def _config(args, **overrides) -> PipelineConfig:
    kw = dict(
        n_states=getattr(args, "states", None),
        bw_iterations=getattr(args, "iterations", 50),
        bw_tolerance=getattr(args, "tolerance", 1e-6),
        seed=getattr(args, "seed", 42),
        epsilon=getattr(args, "epsilon", 0.15),
        clique_size_threshold=getattr(args, "clique", 3),
        complex_size_threshold=getattr(args, "complex", 2),
        display_threshold=getattr(args, "threshold", 0.005),
        start=getattr(args, "start", None),
        stop=getattr(args, "stop", None),
    )
    if hasattr(args, "delimiter"):
        kw["schema"] = _schema(args)
    kw.update(overrides)
    return PipelineConfig(**kw)


def _load_model(path):
    text = Path(path).read_text(encoding="utf-8")
    model, vocab = hmm.deserialize_model(text)
    return model, vocab


def _load_map(path) -> mapbuilder.PseudoMap:
    return mapbuilder.PseudoMap.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cmd_ingest(args) -> int:
    log = read_log(args.input, _schema(args))
    summary = log.summary()
    print(f"{summary['cases']} cases, {summary['events']} events, {summary['activities']} activities")
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            write_log(log, fh, _schema(args))
    if args.json:
        write_json(Path(args.json), summary)
    return 0


def cmd_stats(args) -> int:
    log = read_log(args.input, _schema(args))
    rows = activity_histogram(log)
    width = max(len(a) for a, _, _ in rows)
    print(f"{'Activity'.ljust(width)}  {'Count':>8}  Cumulative")
    for activity, count, cum in rows[: args.top] if args.top else rows:
        print(f"{activity.ljust(width)}  {count:>8}  {cum:.4f}")
    if args.json:
        write_json(Path(args.json), [{"activity": a, "count": c, "cumulative": f} for a, c, f in rows])
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    log = read_log(args.input, config.schema)
    model, report = train_model(log, config)
    Path(args.output).write_text(
        hmm.serialize_model(model, log.vocabulary, config_hash=config.config_hash()), encoding="utf-8"
    )
    curve = report.log_likelihood_per_iteration
    print(f"{model.n_states} states, {report.iterations_run} iterations, "
          f"final log-likelihood {curve[-1]:.6f}")
    if args.report:
        write_json(Path(args.report), report.to_dict())
    return 0


def cmd_strategies(args) -> int:
    model, vocab = _load_model(args.model)
    if vocab is None:
        raise ValueError(f"{args.model} carries no vocabulary; activity names are unknown")
    table = strategy.extract_strategies(model, vocab, args.threshold)
    print(table.render())
    if args.json:
        write_json(Path(args.json), table.to_dict())
    return 0


def cmd_map(args) -> int:
    model, _ = _load_model(args.model)
    edges = mapbuilder.prune_transitions(model.trans, args.epsilon)
    pmap = mapbuilder.build_pseudo_map(edges, model.n_states, args.epsilon)
    ends = mapbuilder.find_start_stop(pmap, args.start, args.stop)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = _config(args).config_hash()
    write_json(out / "pseudo_map.json", {**pmap.to_dict(), "start_stop": ends.to_dict(), "config_hash": chash})
    (out / "pseudo_map.dot").write_text(
        mapbuilder.to_dot(pmap, ends, header=f"config_hash: {chash}"), encoding="utf-8"
    )
    (out / "pseudo_map.graphml").write_text(mapbuilder.to_graphml(pmap), encoding="utf-8")
    print(f"{len(pmap.edges)} edges kept at epsilon={args.epsilon}")
    print(f"start candidates: {list(ends.start_candidates)}  selected: {ends.selected_start}")
    print(f"stop candidates: {list(ends.stop_candidates)}  selected: {ends.selected_stop}")
    return 0


def cmd_cluster(args) -> int:
    pmap = _load_map(args.map)
    view = clustering.UndirectedView.from_pseudo_map(pmap)
    cover = clustering.eagle_cluster(view, args.clique, args.complex)
    print(f"{'Node':<6}Cluster")
    for v in view.nodes:
        print(f"{v:<6}{', '.join(cover.clusters_of(v)) or '-'}")
    print(f"EQ = {cover.eq_score:.6f}, outliers: {list(cover.outliers)}")
    if args.json:
        write_json(Path(args.json), {**cover.to_dict(), "config_hash": _config(args).config_hash()})
    return 0


def cmd_metrics(args) -> int:
    pmap = _load_map(args.map)
    view = clustering.UndirectedView.from_pseudo_map(pmap)
    rows = metrics.node_metrics(view)
    clusters = None
    if args.cover:
        cover = clustering.Cover.from_dict(json.loads(Path(args.cover).read_text(encoding="utf-8")))
        clusters = {v: cover.clusters_of(v) for v in view.nodes}
    print(metrics.render_node_table(rows, clusters))
    net = metrics.network_metrics(view)
    print(
        f"diameter {net.diameter}, density {net.density:.3f}, "
        f"centralization {net.degree_centralization:.3f}, "
        f"characteristic path length {net.characteristic_path_length:.3f}"
    )
    if args.json:
        write_json(Path(args.json), {"nodes": [asdict(r) for r in rows], "network": asdict(net),
                                     "config_hash": _config(args).config_hash()})
    return 0


def cmd_pipeline(args) -> int:
    config = _config(args)
    log = read_log(args.input, config.schema)
    truth = synthgen.GroundTruthSpec.load(args.truth) if args.truth else None
    manifest = run_pipeline(log, config, args.out_dir, input_path=args.input, truth=truth,
                            force=args.force)
    s = manifest["summary"]
    print(f"model: {manifest['n_states']} states, "
          f"{manifest['training']['iterations_run']} Baum-Welch iterations")
    print(f"pseudo-map: {s['edges']} edges; start candidates {s['start_candidates']}, "
          f"stop candidates {s['stop_candidates']}")
    print(f"intentions: {s['intentions']} (EQ {s['eq']:.4f}), outliers {s['outliers']}")
    if "recovery" in manifest:
        print("recovery: " + json.dumps({k: v for k, v in manifest["recovery"].items()
                                         if k.startswith("max") or k == "within_bound"}))
    print(f"artifacts written to {args.out_dir}")
    return 0


def cmd_synth(args) -> int:
    spec = synthgen.GroundTruthSpec.load(args.spec)
    log = synthgen.generate_log(spec)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        write_log(log, fh)
    print(f"wrote {log.n_cases} cases / {log.n_events} events to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapminer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a log and report counts")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="write the normalised, case-sorted log here")
    p.add_argument("--json", help="write counts as JSON")
    _schema_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="activity frequency (Pareto) table")
    p.add_argument("--input", required=True)
    p.add_argument("--top", type=int, default=0, help="only print the first N rows")
    p.add_argument("--json")
    _schema_args(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="K-Means init + Baum-Welch")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="model.json")
    p.add_argument("--report", help="write the training report as JSON")
    _training_args(p)
    _schema_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("strategies", help="strategy table from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.005)
    p.add_argument("--json")
    p.set_defaults(func=cmd_strategies)

    p = sub.add_parser("map", help="prune transitions and build the pseudo-map")
    p.add_argument("--model", required=True)
    p.add_argument("--epsilon", type=float, default=0.15)
    p.add_argument("--start", type=int)
    p.add_argument("--stop", type=int)
    p.add_argument("--out-dir", default=_default_out_dir())
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("cluster", help="EAGLE clustering of a pseudo-map")
    p.add_argument("--map", required=True, help="pseudo_map.json")
    p.add_argument("--clique", type=int, default=3, help="clique-size threshold")
    p.add_argument("--complex", type=int, default=2, help="complex-size threshold")
    p.add_argument("--json")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("metrics", help="node and network statistics of a pseudo-map")
    p.add_argument("--map", required=True, help="pseudo_map.json")
    p.add_argument("--cover", help="cover.json, adds the cluster column")
    p.add_argument("--json")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("pipeline", help="run every stage")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", default=_default_out_dir())
    _training_args(p)
    p.add_argument("--epsilon", type=float, default=0.15)
    p.add_argument("--clique", type=int, default=3)
    p.add_argument("--complex", type=int, default=2)
    p.add_argument("--threshold", type=float, default=0.005, help="strategy display threshold")
    p.add_argument("--start", type=int, help="override the Start sub-intention")
    p.add_argument("--stop", type=int, help="override the Stop sub-intention")
    p.add_argument("--truth", help="ground-truth spec JSON; adds recovery errors to the manifest")
    p.add_argument("--force", action="store_true", help="overwrite a manifest from another config")
    _schema_args(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", help="generate a log from a ground-truth spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--output", default="synth.csv")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        name = exc.filename or ""
        print(f"error: {name}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except (EventLogError, hmm.HmmError, mapbuilder.MapError, ManifestConflict,
            ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
