"""Bit-exact snapshot save/load for the full engine state.

File layout (all integers little-endian):

    magic      8 bytes   b"CGMEMSNP"
    version    u32       format version (currently 1)
    meta_len   u64       length of the metadata JSON
    meta       bytes     canonical JSON (sorted keys, compact separators)
    blob_len   u64       length of the embedding blob
    blob       bytes     float64 LE embeddings, one row per node, in
                         canonical node order (live episodic ids ascending,
                         live semantic ids ascending, archived ids ascending)
    checksum   32 bytes  SHA-256 over everything before the trailer

The metadata holds params, nodes (sans embeddings), edges, the archive,
counters, and the structural prior's raw scores. The lexical index is not
serialized: node contents are the source of truth and the rebuild is
deterministic. Saves are atomic (temp file + rename), so an interrupted
save never corrupts an existing snapshot.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile

import numpy as np

from .errors import (SnapshotIntegrityError, SnapshotIOError,
                     SnapshotVersionError)
from .graph import (ArchiveRecord, Edge, EdgeKind, EpisodicNode, MemoryGraph,
                    SemanticNode)
from .lexical import LexicalIndex
from .params import HyperParams
from .structural import StructuralPrior

MAGIC = b"CGMEMSNP"
FORMAT_VERSION = 1
_CHECKSUM_BYTES = 32


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def _require_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise SnapshotIntegrityError(f"{what} is not finite: {value!r}")
    return value


def _edge_row(edge: Edge) -> list:
    return [edge.src, edge.dst,
            _require_finite(edge.weight, f"edge ({edge.src}->{edge.dst}) "
                                         f"weight"),
            edge.kind.value, edge.created_at]


def _node_row(node: EpisodicNode | SemanticNode) -> dict:
    if isinstance(node, EpisodicNode):
        return {"kind": "episodic", "id": node.id, "content": node.content,
                "timestamp": _require_finite(node.timestamp,
                                             f"node {node.id} timestamp"),
                "dormancy_streak": node.dormancy_streak}
    return {"kind": "semantic", "id": node.id, "name": node.name,
            "category": node.category, "attributes": list(node.attributes),
            "dormancy_streak": node.dormancy_streak}


def _graph_meta(graph: MemoryGraph) -> dict:
    return {
        "episodic": [_node_row(graph.episodic[i])
                     for i in graph.episodic_ids()],
        "semantic": [_node_row(graph.semantic[i])
                     for i in graph.semantic_ids()],
        "edges": [_edge_row(edge) for edge in graph.all_edges()],
        "archive": [
            {"node": _node_row(record.node),
             "edges": [_edge_row(edge) for edge in record.edges]}
            for _, record in sorted(graph.archive.items())
        ],
        "counters": {"turn": graph.turn_counter,
                     "consolidation": graph.consolidation_counter,
                     "next_id": graph._next_id},
    }


def _embedding_order(graph: MemoryGraph) -> list[np.ndarray]:
    rows = [graph.episodic[i].embedding for i in graph.episodic_ids()]
    rows += [graph.semantic[i].embedding for i in graph.semantic_ids()]
    rows += [graph.archive[i].node.embedding
             for i in sorted(graph.archive)]
    return rows


def _embedding_blob(graph: MemoryGraph, dim: int) -> bytes:
    rows = _embedding_order(graph)
    if not rows:
        return b""
    matrix = np.stack(rows).astype("<f8", copy=False)
    if matrix.shape[1] != dim:
        raise SnapshotIntegrityError(
            f"embedding width {matrix.shape[1]} does not match "
            f"configured dimension {dim}")
    if not np.all(np.isfinite(matrix)):
        raise SnapshotIntegrityError("embedding contains non-finite values")
    return matrix.tobytes(order="C")


def graph_fingerprint(graph: MemoryGraph) -> str:
    """Content hash over the canonical graph encoding (nodes, edges,
    archive, counters, embeddings)."""
    digest = hashlib.sha256()
    digest.update(_canonical_json(_graph_meta(graph)))
    digest.update(_embedding_blob(graph, graph.params.embed_dim))
    return digest.hexdigest()


def canonical_bytes(engine) -> bytes:
    """Full snapshot file content for the engine, trailer included."""
    graph = engine.graph
    prior = engine.prior
    meta = _graph_meta(graph)
    meta["params"] = engine.params.to_dict()
    meta["prior"] = {
        "computed_at": prior.computed_at,
        "damping": prior.damping,
        "iterations": prior.iterations,
        "tolerance": prior.tolerance,
        "scores": [[node_id, _require_finite(score,
                                             f"prior score of {node_id}")]
                   for node_id, score in sorted(prior.scores.items())],
    }
    meta_bytes = _canonical_json(meta)
    blob = _embedding_blob(graph, engine.params.embed_dim)
    payload = b"".join([
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<Q", len(meta_bytes)),
        meta_bytes,
        struct.pack("<Q", len(blob)),
        blob,
    ])
    return payload + hashlib.sha256(payload).digest()


def save_snapshot(engine, path: str | os.PathLike) -> int:
    """Atomically write the engine snapshot; returns the byte count.

    Raises:
        SnapshotIOError: destination unwritable (no partial file remains).
        SnapshotIntegrityError: state contains non-finite reals.
    """
    data = canonical_bytes(engine)
    directory = os.path.dirname(os.fspath(path)) or "."
    fd = None
    tmp_path = None
    try:
        fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
        os.write(fd, data)
        os.fsync(fd)
        os.close(fd)
        fd = None
        os.replace(tmp_path, path)
        tmp_path = None
    except OSError as exc:
        raise SnapshotIOError(f"cannot write snapshot to {path}: {exc}") \
            from exc
    finally:
        if fd is not None:
            os.close(fd)
        if tmp_path is not None and os.path.exists(tmp_path):
            os.unlink(tmp_path)
    return len(data)


def load_snapshot(path: str | os.PathLike, embedder=None, extractor=None):
    """Load a snapshot into a fresh engine.

    The lexical index is rebuilt from node contents (identical statistics by
    the incremental-equals-batch property). Distinct errors signal version
    mismatch, truncation/corruption, and unreadable sources.
    """
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read snapshot {path}: {exc}") from exc

    header = len(MAGIC) + 4
    if len(data) < header + _CHECKSUM_BYTES:
        raise SnapshotIntegrityError("snapshot is truncated")
    payload, trailer = data[:-_CHECKSUM_BYTES], data[-_CHECKSUM_BYTES:]
    if hashlib.sha256(payload).digest() != trailer:
        raise SnapshotIntegrityError("snapshot checksum mismatch")
    if payload[:len(MAGIC)] != MAGIC:
        raise SnapshotIntegrityError("not a cogmem snapshot file")
    (version,) = struct.unpack_from("<I", payload, len(MAGIC))
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(found=version, supported=FORMAT_VERSION)

    offset = header
    meta_bytes, offset = _read_section(payload, offset, "metadata")
    blob, offset = _read_section(payload, offset, "embedding blob")
    if offset != len(payload):
        raise SnapshotIntegrityError("snapshot has trailing garbage")
    try:
        meta = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotIntegrityError(
            f"snapshot metadata is corrupt: {exc}") from exc

    params = HyperParams.from_dict(meta["params"])
    dim = params.embed_dim
    expected_rows = (len(meta["episodic"]) + len(meta["semantic"])
                     + len(meta["archive"]))
    if len(blob) != expected_rows * dim * 8:
        raise SnapshotIntegrityError(
            f"embedding blob holds {len(blob)} bytes; expected "
            f"{expected_rows} rows of {dim} float64")
    matrix = np.frombuffer(blob, dtype="<f8").reshape(expected_rows, dim) \
        if expected_rows else np.zeros((0, dim))

    graph = MemoryGraph(params)
    row = 0
    for record in meta["episodic"]:
        graph.episodic[record["id"]] = EpisodicNode(
            id=record["id"], content=record["content"],
            embedding=matrix[row].copy(), timestamp=record["timestamp"],
            dormancy_streak=record["dormancy_streak"])
        row += 1
    for record in meta["semantic"]:
        graph.semantic[record["id"]] = SemanticNode(
            id=record["id"], name=record["name"],
            category=record["category"], embedding=matrix[row].copy(),
            attributes=list(record["attributes"]),
            dormancy_streak=record["dormancy_streak"])
        row += 1
    for src, dst, weight, kind, created_at in meta["edges"]:
        graph._add_edge(Edge(src, dst, weight, EdgeKind(kind), created_at))
    for entry in meta["archive"]:
        node_meta = entry["node"]
        node = _restore_node(node_meta, matrix[row])
        row += 1
        edges = [Edge(src, dst, weight, EdgeKind(kind), created_at)
                 for src, dst, weight, kind, created_at in entry["edges"]]
        graph.archive[node.id] = ArchiveRecord(node=node, edges=edges)
    counters = meta["counters"]
    graph.turn_counter = counters["turn"]
    graph.consolidation_counter = counters["consolidation"]
    graph._next_id = counters["next_id"]

    prior_meta = meta["prior"]
    scores = {node_id: score for node_id, score in prior_meta["scores"]}
    peak = max(scores.values()) if scores else 1.0
    prior = StructuralPrior(
        scores=scores,
        normalized={nid: val / peak for nid, val in scores.items()},
        computed_at=prior_meta["computed_at"],
        damping=prior_meta["damping"],
        iterations=prior_meta["iterations"],
        tolerance=prior_meta["tolerance"])

    lexical = LexicalIndex()
    for node_id in graph.node_ids():
        lexical.index_node(node_id, graph.index_text(node_id))

    from .engine import MemoryEngine
    return MemoryEngine.from_state(params=params, graph=graph,
                                   lexical=lexical, prior=prior,
                                   embedder=embedder, extractor=extractor)


def _read_section(payload: bytes, offset: int, what: str
                  ) -> tuple[bytes, int]:
    if offset + 8 > len(payload):
        raise SnapshotIntegrityError(f"snapshot {what} length is truncated")
    (length,) = struct.unpack_from("<Q", payload, offset)
    offset += 8
    if offset + length > len(payload):
        raise SnapshotIntegrityError(f"snapshot {what} is truncated")
    return payload[offset:offset + length], offset + length


def _restore_node(record: dict, embedding: np.ndarray):
    if record["kind"] == "episodic":
        return EpisodicNode(id=record["id"], content=record["content"],
                            embedding=embedding.copy(),
                            timestamp=record["timestamp"],
                            dormancy_streak=record["dormancy_streak"])
    return SemanticNode(id=record["id"], name=record["name"],
                        category=record["category"],
                        embedding=embedding.copy(),
                        attributes=list(record["attributes"]),
                        dormancy_streak=record["dormancy_streak"])
