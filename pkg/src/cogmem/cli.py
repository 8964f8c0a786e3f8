"""Command-line entry point.

Thin wrappers over the library: every behavior reachable here is testable
through module operations directly. Distinct exit codes separate usage
errors (2), data/validation errors (3), transport errors (4), and missed
eval thresholds (5).

Conversation files: one turn per line,

    [timestamp] speaker: text | speaker: text

where the ``[timestamp]`` prefix and the second (reply) utterance are
optional; blank lines and ``#`` comments are ignored. Without explicit
timestamps the turn index is used.

Serve protocol: newline-delimited JSON, one request per line, one response
per line. ``{"query": "..."}`` answers a query; ``{"command": "reload"}``
re-reads the snapshot; ``{"command": "shutdown"}`` (or EOF) ends the
session.
"""

from __future__ import annotations

import argparse
import json
import socketserver
import sys

from .engine import MemoryEngine
from .errors import CogmemError, TransportError, ValidationError
from .evaluation import (Category, load_benchmark_native, load_dataset,
                         run_eval)
from .params import HyperParams
from .retrieval import evidence_entries

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRANSPORT = 4
EXIT_THRESHOLD = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cogmem",
        description="Conversational memory engine: ingest dialogue, "
                    "query it, and maintain the graph.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, store_required: bool = True):
        p.add_argument("--store", required=store_required,
                       help="snapshot path")
        p.add_argument("--config", help="JSON file overriding parameters")
        p.add_argument("--seed", type=int, default=None,
                       help="token-hash seed for the deterministic embedder")
        p.add_argument("--format", choices=("table", "records"),
                       default="table")

    p_ingest = sub.add_parser("ingest", help="append turns from a file")
    common(p_ingest)
    p_ingest.add_argument("conversation", help="conversation file")

    p_query = sub.add_parser("query", help="retrieve context for a query")
    common(p_query)
    p_query.add_argument("text", help="query text")
    p_query.add_argument("--k", type=int, default=None,
                         help="override retrieval size")
    p_query.add_argument("--tau-gate", type=float, default=None,
                         help="override the rejection threshold")

    p_cons = sub.add_parser("consolidate", help="force one consolidation")
    common(p_cons)

    p_compact = sub.add_parser("compact",
                               help="prune edges and archive dormant nodes")
    common(p_compact)

    p_stats = sub.add_parser("stats", help="print store statistics")
    common(p_stats)

    p_eval = sub.add_parser("eval", help="run the QA evaluation harness")
    common(p_eval, store_required=False)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--native", action="store_true",
                        help="dataset uses the benchmark's native layout")
    p_eval.add_argument("--min-weighted-f1", type=float, default=None)
    p_eval.add_argument("--min-weighted-bleu1", type=float, default=None)
    p_eval.add_argument("--max-frr", type=float, default=None)

    p_serve = sub.add_parser("serve", help="answer queries over a stream")
    common(p_serve)
    p_serve.add_argument("--port", type=int, default=None,
                         help="listen on a TCP port instead of stdio")
    p_serve.add_argument("--host", default="127.0.0.1")

    p_save = sub.add_parser("snapshot-save",
                            help="rewrite a snapshot canonically")
    common(p_save)
    p_save.add_argument("--out", required=True)

    p_load = sub.add_parser("snapshot-load",
                            help="verify a snapshot loads cleanly")
    common(p_load)
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _load_params(args) -> HyperParams:
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        return HyperParams.from_dict(data)
    return HyperParams()


def _make_embedder(params: HyperParams, args):
    from .embedding import DEFAULT_HASH_SEED, EmbedderConfig, HashingEmbedder
    seed = args.seed if getattr(args, "seed", None) is not None \
        else DEFAULT_HASH_SEED
    return HashingEmbedder(EmbedderConfig(dimension=params.embed_dim),
                           seed=seed)


def _open_engine(args, must_exist: bool = True) -> MemoryEngine:
    import os
    params = _load_params(args)
    embedder = _make_embedder(params, args)
    if args.store and os.path.exists(args.store):
        engine = MemoryEngine.load(args.store, embedder=embedder)
        engine = _apply_param_overrides(engine, args)
        return engine
    if must_exist:
        raise TransportError(f"store {args.store} does not exist")
    return MemoryEngine(params=params, embedder=embedder)


def _apply_param_overrides(engine: MemoryEngine, args) -> MemoryEngine:
    changes = {}
    if getattr(args, "k", None) is not None:
        changes["top_k"] = args.k
    if getattr(args, "tau_gate", None) is not None:
        changes["tau_gate"] = args.tau_gate
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as handle:
            changes = {**HyperParams.from_dict(json.load(handle)).to_dict(),
                       **changes}
    if changes:
        params = engine.params.replace(**changes)
        engine.params = params
        engine.graph.params = params
    return engine


def parse_conversation_line(line: str) -> tuple[float | None, str, str]:
    """Parse one `[ts] utterance | utterance` line into (ts, user, reply)."""
    text = line.strip()
    timestamp = None
    if text.startswith("["):
        close = text.find("]")
        if close < 0:
            raise ValidationError(f"unterminated timestamp prefix: {line!r}")
        stamp = text[1:close].strip()
        try:
            timestamp = float(stamp)
        except ValueError as exc:
            raise ValidationError(f"bad timestamp {stamp!r}") from exc
        text = text[close + 1:].strip()
    user, sep, reply = text.partition(" | ")
    return timestamp, user.strip(), reply.strip() if sep else ""


def _emit(args, payload: dict, table_lines: list[str]) -> None:
    if args.format == "records":
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in table_lines:
            print(line)


def _result_payload(engine: MemoryEngine, result) -> dict:
    entries = {entry.node_id: entry
               for entry in evidence_entries(engine.graph,
                                             result.candidates)}
    return {
        "verdict": result.verdict.value,
        "confidence": result.confidence,
        "rejection_message": result.rejection_message,
        "candidates": [
            {"id": c.id, "score": c.score, "sim": c.sim,
             "activation": c.activation, "prior": c.prior,
             "timestamp": entries[c.id].timestamp,
             "text": entries[c.id].text}
            for c in result.candidates
        ],
    }


def _result_table(payload: dict) -> list[str]:
    lines = [f"verdict: {payload['verdict']}   "
             f"confidence: {payload['confidence']:.4f}"]
    if payload["rejection_message"]:
        lines.append(f"note: {payload['rejection_message']}")
    if payload["candidates"]:
        lines.append(f"{'id':>6}  {'score':>7}  {'sim':>7}  {'act':>7}  "
                     f"{'prior':>7}  text")
    for c in payload["candidates"]:
        snippet = c["text"].replace("\n", " ")
        if len(snippet) > 60:
            snippet = snippet[:57] + "..."
        lines.append(f"{c['id']:>6}  {c['score']:7.4f}  {c['sim']:7.4f}  "
                     f"{c['activation']:7.4f}  {c['prior']:7.4f}  {snippet}")
    return lines


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    engine = _open_engine(args, must_exist=False)
    appended = 0
    with open(args.conversation, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            timestamp, user, reply = parse_conversation_line(line)
            engine.append(user, reply, timestamp)
            appended += 1
    engine.save(args.store)
    stats = engine.stats()
    _emit(args, {"appended": appended, **stats}, [
        f"appended {appended} turns "
        f"({stats['consolidations']} consolidations); "
        f"store now holds {stats['episodic_nodes']} episodes, "
        f"{stats['semantic_nodes']} concepts, {stats['edges']} edges",
    ])
    return EXIT_OK


def cmd_query(args) -> int:
    engine = _open_engine(args, must_exist=False)
    result = engine.query(args.text)
    payload = _result_payload(engine, result)
    _emit(args, payload, _result_table(payload))
    return EXIT_OK


def cmd_consolidate(args) -> int:
    engine = _open_engine(args)
    report = engine.consolidate()
    engine.save(args.store)
    payload = {
        "ok": report.ok,
        "failure": report.failure,
        "created": report.created,
        "merged": report.merged,
        "edges_created": len(report.edges_created),
        "unresolved_hints": len(report.unresolved_hints),
    }
    _emit(args, payload, [
        f"consolidation {'succeeded' if report.ok else 'failed'}: "
        f"{len(report.created)} concepts created, "
        f"{len(report.merged)} merged, "
        f"{len(report.edges_created)} edges",
    ])
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_compact(args) -> int:
    engine = _open_engine(args)
    outcome = engine.compact()
    engine.save(args.store)
    _emit(args, outcome, [
        f"pruned {outcome['pruned_edges']} edges; archived "
        f"{len(outcome['archived_nodes'])} dormant nodes",
    ])
    return EXIT_OK


def cmd_stats(args) -> int:
    engine = _open_engine(args)
    stats = engine.stats()
    table = [f"{key}: {value}" for key, value in stats.items()
             if key != "in_degree_histogram"]
    histogram = stats["in_degree_histogram"]
    table.append("in-degree histogram: " + ", ".join(
        f"{degree}:{count}" for degree, count in histogram.items()))
    _emit(args, stats, table)
    return EXIT_OK


def cmd_eval(args) -> int:
    loader = load_benchmark_native if args.native else load_dataset
    dataset, skipped = loader(args.dataset)
    params = _load_params(args)
    embedder = _make_embedder(params, args)
    report = run_eval(dataset, params=params, embedder=embedder,
                      diagnostics=skipped)
    payload = {
        "weighted_f1": report.weighted_f1,
        "weighted_bleu1": report.bleu1_weighted,
        "instances": report.instances,
        "per_category": {
            category.value: {"f1": stats.f1, "bleu1": stats.bleu1,
                             "count": stats.count}
            for category, stats in sorted(report.per_category.items(),
                                          key=lambda kv: kv[0].value)
        },
        "rejections": {
            "true": report.rejection_stats.true_rejections,
            "false_refusals": report.rejection_stats.false_refusals,
            "false_refusal_rate":
                report.rejection_stats.false_refusal_rate,
        },
        "skipped_records": report.diagnostics,
    }
    table = [f"instances: {report.instances}   "
             f"weighted F1: {report.weighted_f1:.4f}   "
             f"weighted BLEU-1: {report.bleu1_weighted:.4f}"]
    for category in Category:
        stats = report.per_category.get(category)
        if stats:
            table.append(f"  {category.value}: F1 {stats.f1:.4f}  "
                         f"BLEU-1 {stats.bleu1:.4f}  (n={stats.count})")
    rej = report.rejection_stats
    table.append(f"rejections: {rej.true_rejections} true, "
                 f"{rej.false_refusals} false "
                 f"(FRR {rej.false_refusal_rate:.4f})")
    if skipped:
        table.append(f"skipped {len(skipped)} malformed records")
    _emit(args, payload, table)

    missed = []
    if args.min_weighted_f1 is not None \
            and report.weighted_f1 < args.min_weighted_f1:
        missed.append("weighted F1")
    if args.min_weighted_bleu1 is not None \
            and report.bleu1_weighted < args.min_weighted_bleu1:
        missed.append("weighted BLEU-1")
    if args.max_frr is not None \
            and rej.false_refusal_rate > args.max_frr:
        missed.append("false refusal rate")
    if missed:
        print(f"threshold(s) missed: {', '.join(missed)}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _serve_one(engine_box: dict, args, line: str) -> str:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return json.dumps({"error": f"bad request: {exc.msg}"},
                          sort_keys=True)
    if not isinstance(request, dict):
        return json.dumps({"error": "request must be a JSON object"},
                          sort_keys=True)
    command = request.get("command")
    if command == "shutdown":
        return ""
    if command == "reload":
        try:
            engine_box["engine"] = _open_engine(args)
            return json.dumps({"ok": True}, sort_keys=True)
        except CogmemError as exc:
            return json.dumps({"error": str(exc)}, sort_keys=True)
    query = request.get("query")
    if not isinstance(query, str) or not query.strip():
        return json.dumps({"error": "request needs a 'query' string"},
                          sort_keys=True)
    result = engine_box["engine"].query(query)
    return json.dumps(_result_payload(engine_box["engine"], result),
                      sort_keys=True)


def cmd_serve(args) -> int:
    engine_box = {"engine": _open_engine(args, must_exist=False)}
    if args.port is None:
        for line in sys.stdin:
            if not line.strip():
                continue
            response = _serve_one(engine_box, args, line)
            if response == "":
                break
            print(response, flush=True)
        return EXIT_OK

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8").strip()
                if not line:
                    continue
                response = _serve_one(engine_box, args, line)
                if response == "":
                    raise SystemExit(EXIT_OK)
                self.wfile.write((response + "\n").encode("utf-8"))
                self.wfile.flush()

    with socketserver.TCPServer((args.host, args.port), Handler) as server:
        try:
            server.serve_forever()
        except SystemExit:
            pass
    return EXIT_OK


def cmd_snapshot_save(args) -> int:
    engine = _open_engine(args)
    written = engine.save(args.out)
    _emit(args, {"bytes": written, "path": args.out},
          [f"wrote {written} bytes to {args.out}"])
    return EXIT_OK


def cmd_snapshot_load(args) -> int:
    engine = _open_engine(args)
    stats = engine.stats()
    _emit(args, stats, [
        f"snapshot {args.store} loads cleanly: "
        f"{stats['episodic_nodes']} episodes, "
        f"{stats['semantic_nodes']} concepts, {stats['edges']} edges, "
        f"{stats['archived_nodes']} archived",
    ])
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "query": cmd_query,
    "consolidate": cmd_consolidate,
    "compact": cmd_compact,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "snapshot-save": cmd_snapshot_save,
    "snapshot-load": cmd_snapshot_load,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ValidationError, CogmemError, ValueError,
            json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
