"""Unified episodic-semantic memory graph.

Episodic nodes store raw interaction turns (content, embedding, timestamp);
semantic nodes store concepts synthesized from consolidation windows. Three
edge kinds connect them:

* Temporal — previous episode -> next episode, weighted by time decay;
* Abstraction — episode <-> concept, both directions, fixed weight 0.8;
* Association — concept -> concept, weighted by embedding similarity.

Maintenance keeps the graph sparse: incoming edges are pruned to the top-K
by weight, and nodes whose peak activation stays under the dormancy floor for
W consecutive consolidation windows are archived (losslessly restorable).

Concurrency: single writer, multiple readers. All mutating methods must run
under the owner's write lock; reads against a quiescent graph are safe.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .embedding import cosine_sim, ensure_unit
from .errors import MonotonicityError, UnknownNodeError, ValidationError
from .extraction import CATEGORIES, ExtractedEdgeHint
from .params import HyperParams

logger = logging.getLogger(__name__)

# Alg-style neighbor cap for similarity-derived association edges.
ASSOCIATION_TOP_N = 15

ABSTRACTION_WEIGHT = 0.8

EMA_KEEP = 0.9   # weight on the established concept embedding when merging
EMA_NEW = 0.1    # weight on the incoming candidate embedding


class EdgeKind(str, Enum):
    TEMPORAL = "temporal"
    ABSTRACTION = "abstraction"
    ASSOCIATION = "association"


@dataclass
class EpisodicNode:
    id: int
    content: str
    embedding: np.ndarray
    timestamp: float
    dormancy_streak: int = 0


@dataclass
class SemanticNode:
    id: int
    name: str
    category: str
    embedding: np.ndarray
    attributes: list[str] = field(default_factory=list)
    dormancy_streak: int = 0


@dataclass
class Edge:
    src: int
    dst: int
    weight: float
    kind: EdgeKind
    created_at: int = 0


@dataclass
class ArchiveRecord:
    """A garbage-collected node together with its incident edges."""
    node: EpisodicNode | SemanticNode
    edges: list[Edge]


@dataclass
class ConsolidationReport:
    window: list[int] = field(default_factory=list)
    created: list[tuple[str, int]] = field(default_factory=list)
    merged: list[tuple[str, int]] = field(default_factory=list)
    edges_created: list[tuple[int, int, EdgeKind]] = field(
        default_factory=list)
    unresolved_hints: list[ExtractedEdgeHint] = field(default_factory=list)
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def temporal_edge_weight(tau_i: float, tau_j: float,
                         params: HyperParams) -> float:
    """Time-decayed edge weight exp(-rho * |tau_i - tau_j|), in (0, 1]."""
    return math.exp(-params.rho * abs(tau_i - tau_j))


class MemoryGraph:
    """Mutable vertex/edge store with episodic and semantic partitions."""

    def __init__(self, params: HyperParams | None = None):
        self.params = params or HyperParams()
        self.episodic: dict[int, EpisodicNode] = {}
        self.semantic: dict[int, SemanticNode] = {}
        self._out: dict[int, dict[tuple[int, EdgeKind], Edge]] = {}
        self._in: dict[int, dict[tuple[int, EdgeKind], Edge]] = {}
        self.archive: dict[int, ArchiveRecord] = {}
        self.turn_counter = 0
        self.consolidation_counter = 0
        self._next_id = 0

    # ------------------------------------------------------------------
    # Node / edge accessors
    # ------------------------------------------------------------------

    def node(self, node_id: int) -> EpisodicNode | SemanticNode:
        found = self.episodic.get(node_id) or self.semantic.get(node_id)
        if found is None:
            raise UnknownNodeError(f"node {node_id} is not live")
        return found

    def has_node(self, node_id: int) -> bool:
        return node_id in self.episodic or node_id in self.semantic

    def is_episodic(self, node_id: int) -> bool:
        return node_id in self.episodic

    def node_ids(self) -> list[int]:
        return sorted([*self.episodic, *self.semantic])

    def episodic_ids(self) -> list[int]:
        return sorted(self.episodic)

    def semantic_ids(self) -> list[int]:
        return sorted(self.semantic)

    @property
    def live_count(self) -> int:
        return len(self.episodic) + len(self.semantic)

    def out_degree(self, node_id: int) -> int:
        return len(self._out.get(node_id, ()))

    def out_edges(self, node_id: int) -> list[Edge]:
        edges = self._out.get(node_id, {})
        return [edges[key] for key in sorted(edges)]

    def in_edges(self, node_id: int) -> list[Edge]:
        edges = self._in.get(node_id, {})
        return [edges[key] for key in sorted(edges)]

    def all_edges(self) -> list[Edge]:
        result = []
        for src in sorted(self._out):
            edges = self._out[src]
            result.extend(edges[key] for key in sorted(edges))
        return result

    @property
    def edge_count(self) -> int:
        return sum(len(edges) for edges in self._out.values())

    def index_text(self, node_id: int) -> str:
        """Text under which a node is lexically indexed."""
        found = self.node(node_id)
        return found.content if isinstance(found, EpisodicNode) \
            else found.name

    def propagation_weight(self, edge: Edge,
                           params: HyperParams | None = None) -> float:
        """Edge weight as seen by activation propagation.

        Temporal weights are recomputed from the endpoint timestamps (cheap
        and exact); abstraction/association weights are read as stored.
        """
        if edge.kind is EdgeKind.TEMPORAL:
            p = params or self.params
            return temporal_edge_weight(self.episodic[edge.src].timestamp,
                                        self.episodic[edge.dst].timestamp, p)
        return edge.weight

    # ------------------------------------------------------------------
    # Mutation: ingestion
    # ------------------------------------------------------------------

    def append_turn(self, user_text: str, reply_text: str, timestamp: float,
                    embedder) -> int:
        """Store one interaction turn as a new episodic node.

        Creates a temporal edge from the previous episode when one exists.
        Returns the new node id.

        Raises:
            MonotonicityError: if the timestamp precedes the latest episode.
            ValidationError: if both texts are empty.
        """
        content = _join_turn(user_text, reply_text)
        if not content:
            raise ValidationError("turn has no content")
        prev_id = max(self.episodic) if self.episodic else None
        if prev_id is not None:
            latest = self.episodic[prev_id].timestamp
            if timestamp < latest:
                raise MonotonicityError(
                    f"timestamp {timestamp} precedes latest episodic "
                    f"timestamp {latest}")
        embedding = ensure_unit(embedder.embed(content),
                                self.params.embed_dim)
        node_id = self._allocate_id()
        self.episodic[node_id] = EpisodicNode(
            id=node_id, content=content, embedding=embedding,
            timestamp=float(timestamp))
        if prev_id is not None:
            weight = temporal_edge_weight(
                self.episodic[prev_id].timestamp, timestamp, self.params)
            self._add_edge(Edge(prev_id, node_id, weight, EdgeKind.TEMPORAL,
                                created_at=self.consolidation_counter))
        self.turn_counter += 1
        self._check_soft_bound()
        return node_id

    # ------------------------------------------------------------------
    # Mutation: consolidation
    # ------------------------------------------------------------------

    def consolidate(self, extractor, embedder,
                    params: HyperParams | None = None) -> ConsolidationReport:
        """Extract concepts from the trailing window and wire them in.

        Runs the extractor over the last N episodes, dedups items against the
        live semantic set (merge via EMA above tau_dup, create otherwise),
        links every window episode to every item's node with bidirectional
        abstraction edges, and refreshes similarity-derived association
        edges over all concept pairs.

        Consolidation is atomic: the extraction and embedding phases run
        before any mutation, so a failing provider leaves the graph
        untouched and is reported, not raised.
        """
        p = params or self.params
        window_ids = self.episodic_ids()[-p.consolidation_n:]
        report = ConsolidationReport(window=window_ids)
        window_texts = [self.episodic[i].content for i in window_ids]

        try:
            items, hints = extractor.extract(window_texts)
            item_embeddings = [
                ensure_unit(embedder.embed(item.name), p.embed_dim)
                for item in items
            ]
        except Exception as exc:  # provider failure: report, do not mutate
            report.failure = f"{type(exc).__name__}: {exc}"
            return report

        # Mutation phase (cannot fail on provider behavior from here on).
        self.consolidation_counter += 1
        stamp = self.consolidation_counter

        item_nodes: list[int] = []
        for item, candidate in zip(items, item_embeddings):
            target = self._best_semantic_match(candidate)
            if target is not None and target[1] > p.tau_dup:
                node = self.semantic[target[0]]
                merged = EMA_KEEP * node.embedding + EMA_NEW * candidate
                node.embedding = merged / float(np.linalg.norm(merged))
                _extend_attributes(node, item)
                report.merged.append((item.name, node.id))
                item_nodes.append(node.id)
            else:
                node_id = self._allocate_id()
                node = SemanticNode(
                    id=node_id, name=item.name.strip(),
                    category=item.category, embedding=candidate)
                if not node.name:
                    # Extractor contract already forbids this; keep the
                    # invariant locally enforceable.
                    raise ValidationError("semantic node name is empty")
                if node.category not in CATEGORIES:
                    raise ValidationError(
                        f"unknown category {node.category!r}")
                _extend_attributes(node, item)
                self.semantic[node_id] = node
                report.created.append((item.name, node_id))
                item_nodes.append(node_id)

        for node_id in item_nodes:
            for episode_id in window_ids:
                for src, dst in ((episode_id, node_id),
                                 (node_id, episode_id)):
                    if self._add_edge(Edge(src, dst, ABSTRACTION_WEIGHT,
                                           EdgeKind.ABSTRACTION,
                                           created_at=stamp),
                                      exist_ok=True):
                        report.edges_created.append(
                            (src, dst, EdgeKind.ABSTRACTION))

        self._refresh_associations(p, stamp, report)
        self._apply_edge_hints(hints, stamp, report)
        self._check_soft_bound()
        return report

    def _best_semantic_match(self, candidate: np.ndarray
                             ) -> tuple[int, float] | None:
        best: tuple[int, float] | None = None
        for node_id in self.semantic_ids():
            sim = cosine_sim(candidate, self.semantic[node_id].embedding)
            if best is None or sim > best[1]:
                best = (node_id, sim)
        return best

    def _refresh_associations(self, p: HyperParams, stamp: int,
                              report: ConsolidationReport) -> None:
        """Exact full-pairwise association pass over the semantic partition."""
        ids = self.semantic_ids()
        if len(ids) < 2:
            return
        vectors = np.stack([self.semantic[i].embedding for i in ids])
        sims = vectors @ vectors.T
        for row, src in enumerate(ids):
            order = sorted((j for j in range(len(ids)) if j != row),
                           key=lambda j: (-sims[row, j], ids[j]))
            for col in order[:ASSOCIATION_TOP_N]:
                sim = float(min(1.0, max(-1.0, sims[row, col])))
                if sim <= p.tau_dup:
                    break  # order is descending; nothing further qualifies
                dst = ids[col]
                if self._add_edge(Edge(src, dst, sim, EdgeKind.ASSOCIATION,
                                       created_at=stamp),
                                  exist_ok=True, update_existing=True):
                    report.edges_created.append(
                        (src, dst, EdgeKind.ASSOCIATION))

    def _apply_edge_hints(self, hints: list[ExtractedEdgeHint], stamp: int,
                          report: ConsolidationReport) -> None:
        """Map extractor edge hints onto association edges.

        A hint applies only when both endpoints resolve (by case-insensitive
        name) to distinct live semantic nodes; anything else is reported as
        unresolved rather than guessed.
        """
        by_name = {self.semantic[i].name.lower(): i
                   for i in self.semantic_ids()}
        for hint in hints:
            src = by_name.get(hint.src_name.strip().lower())
            dst = by_name.get(hint.tgt_name.strip().lower())
            if src is None or dst is None or src == dst:
                report.unresolved_hints.append(hint)
                continue
            if self._add_edge(Edge(src, dst, hint.weight,
                                   EdgeKind.ASSOCIATION, created_at=stamp),
                              exist_ok=True):
                report.edges_created.append((src, dst, EdgeKind.ASSOCIATION))

    # ------------------------------------------------------------------
    # Mutation: maintenance
    # ------------------------------------------------------------------

    def prune_edges(self, params: HyperParams | None = None) -> int:
        """Keep only the top-K incoming edges per node; return count removed.

        Survivors are the K highest-weight edges; ties keep the newer edge
        (larger created_at), then the smaller source id.
        """
        p = params or self.params
        removed = 0
        for node_id in self.node_ids():
            incoming = self._in.get(node_id)
            if not incoming or len(incoming) <= p.prune_k:
                continue
            ranked = sorted(incoming.values(),
                            key=lambda e: (-e.weight, -e.created_at, e.src))
            for edge in ranked[p.prune_k:]:
                self._remove_edge(edge)
                removed += 1
        return removed

    def update_dormancy(self, window_peaks: dict[int, float],
                        params: HyperParams | None = None) -> None:
        """Fold one consolidation window's peak activations into streaks."""
        p = params or self.params
        for node_id in self.node_ids():
            node = self.node(node_id)
            if window_peaks.get(node_id, 0.0) < p.epsilon_dormant:
                node.dormancy_streak += 1
            else:
                node.dormancy_streak = 0

    def collect_dormant(self, params: HyperParams | None = None) -> list[int]:
        """Archive every node dormant for at least W windows.

        The node moves to the archive together with its incident edges; the
        live graph retains no reference to it. Returns the archived ids.
        """
        p = params or self.params
        dormant = [node_id for node_id in self.node_ids()
                   if self.node(node_id).dormancy_streak >= p.dormancy_w]
        for node_id in dormant:
            incident = self.out_edges(node_id) + [
                edge for edge in self.in_edges(node_id)
                if edge.src != node_id
            ]
            for edge in incident:
                self._remove_edge(edge)
            node = self.episodic.pop(node_id, None) \
                or self.semantic.pop(node_id)
            self.archive[node_id] = ArchiveRecord(node=node, edges=incident)
        return dormant

    def restore_archived(self, node_ids: list[int]) -> None:
        """Return archived nodes (and their restorable edges) to the graph."""
        records: list[ArchiveRecord] = []
        for node_id in sorted(set(node_ids)):
            record = self.archive.get(node_id)
            if record is None:
                raise UnknownNodeError(f"node {node_id} is not archived")
            records.append(record)
        for record in records:
            node = record.node
            if isinstance(node, EpisodicNode):
                self.episodic[node.id] = node
            else:
                self.semantic[node.id] = node
            del self.archive[node.id]
        # Edges re-attach once both endpoints are live again; edges whose
        # partner stays archived are re-parked on that partner's record so
        # a later restore can still recover them.
        for record in records:
            for edge in record.edges:
                if self.has_node(edge.src) and self.has_node(edge.dst):
                    self._add_edge(edge, exist_ok=True)
                else:
                    partner = edge.dst if edge.src == record.node.id \
                        else edge.src
                    parked = self.archive.get(partner)
                    if parked is not None and not any(
                            (e.src, e.dst, e.kind) ==
                            (edge.src, edge.dst, edge.kind)
                            for e in parked.edges):
                        parked.edges.append(edge)

    # ------------------------------------------------------------------
    # Internals
    # ------------------------------------------------------------------

    def _allocate_id(self) -> int:
        node_id = self._next_id
        self._next_id += 1
        return node_id

    def _check_soft_bound(self) -> None:
        if self.live_count > self.params.max_active_nodes:
            logger.warning(
                "live graph holds %d nodes, above the configured bound %d; "
                "run compaction", self.live_count,
                self.params.max_active_nodes)

    def _validate_edge(self, edge: Edge) -> None:
        if edge.src == edge.dst:
            raise ValidationError("self-loop edges are not allowed")
        if not 0.0 <= edge.weight <= 1.0:
            raise ValidationError(
                f"edge weight must lie in [0, 1] (got {edge.weight!r})")
        if not self.has_node(edge.src) or not self.has_node(edge.dst):
            raise UnknownNodeError(
                f"edge ({edge.src} -> {edge.dst}) references a non-live node")
        src_ep = self.is_episodic(edge.src)
        dst_ep = self.is_episodic(edge.dst)
        if edge.kind is EdgeKind.TEMPORAL and not (src_ep and dst_ep):
            raise ValidationError("temporal edges connect episodes only")
        if edge.kind is EdgeKind.ABSTRACTION and src_ep == dst_ep:
            raise ValidationError(
                "abstraction edges connect an episode and a concept")
        if edge.kind is EdgeKind.ASSOCIATION and (src_ep or dst_ep):
            raise ValidationError("association edges connect concepts only")

    def _add_edge(self, edge: Edge, exist_ok: bool = False,
                  update_existing: bool = False) -> bool:
        """Insert an edge; returns True when a new edge was stored."""
        self._validate_edge(edge)
        key = (edge.dst, edge.kind)
        existing = self._out.get(edge.src, {}).get(key)
        if existing is not None:
            if update_existing:
                existing.weight = edge.weight
                existing.created_at = edge.created_at
                return False
            if exist_ok:
                return False
            raise ValidationError(
                f"edge ({edge.src} -> {edge.dst}, {edge.kind.value}) "
                f"already exists")
        self._out.setdefault(edge.src, {})[key] = edge
        self._in.setdefault(edge.dst, {})[(edge.src, edge.kind)] = edge
        return True

    def _remove_edge(self, edge: Edge) -> None:
        out_bucket = self._out.get(edge.src)
        if out_bucket:
            out_bucket.pop((edge.dst, edge.kind), None)
            if not out_bucket:
                del self._out[edge.src]
        in_bucket = self._in.get(edge.dst)
        if in_bucket:
            in_bucket.pop((edge.src, edge.kind), None)
            if not in_bucket:
                del self._in[edge.dst]

    def fingerprint(self) -> str:
        """Content hash of the canonical graph encoding (for tests/tools)."""
        from .persistence import graph_fingerprint
        return graph_fingerprint(self)


def _join_turn(user_text: str, reply_text: str) -> str:
    parts = [part.strip() for part in (user_text, reply_text)
             if part and part.strip()]
    return "\n".join(parts)


def _extend_attributes(node: SemanticNode, item) -> None:
    new = []
    if item.attribute:
        new.append(item.attribute)
    if item.time_hint:
        new.append(f"time={item.time_hint}")
    if item.confidence is not None:
        new.append(f"confidence={item.confidence}")
    for attr in new:
        if attr not in node.attributes:
            node.attributes.append(attr)
