"""Engine facade: one object wiring graph, index, prior, and providers.

Writes (append, consolidate, compact, restore) serialize on an internal
lock; queries read the quiescent state and may run concurrently between
writes. Consolidation is where the moving parts meet: concepts are
extracted and wired in, dormancy streaks are folded from the window's peak
activations, and the structural prior refreshes — retrieval between
consolidations sees stable cached values.
"""

from __future__ import annotations

import threading

from .embedding import EmbedderConfig, HashingEmbedder
from .extraction import RuleBasedExtractor
from .graph import ConsolidationReport, MemoryGraph
from .lexical import LexicalIndex
from .params import HyperParams
from .retrieval import RetrievalResult, retrieve
from .structural import StructuralPrior, compute_pagerank


class MemoryEngine:
    """Stateful conversational memory store."""

    def __init__(self, params: HyperParams | None = None, embedder=None,
                 extractor=None, auto_consolidate: bool = True):
        self.params = params or HyperParams()
        self.embedder = embedder or HashingEmbedder(
            EmbedderConfig(dimension=self.params.embed_dim))
        if self.embedder.dimension != self.params.embed_dim:
            raise ValueError(
                f"embedder dimension {self.embedder.dimension} does not "
                f"match configured embed_dim {self.params.embed_dim}")
        self.extractor = extractor or RuleBasedExtractor()
        self.auto_consolidate = auto_consolidate
        self.graph = MemoryGraph(self.params)
        self.lexical = LexicalIndex()
        self.prior = StructuralPrior()
        self.window_peaks: dict[int, float] = {}
        self._write_lock = threading.RLock()

    @classmethod
    def from_state(cls, params: HyperParams, graph: MemoryGraph,
                   lexical: LexicalIndex, prior: StructuralPrior,
                   embedder=None, extractor=None) -> "MemoryEngine":
        engine = cls(params=params, embedder=embedder, extractor=extractor)
        engine.graph = graph
        engine.lexical = lexical
        engine.prior = prior
        return engine

    # ------------------------------------------------------------------
    # Writes
    # ------------------------------------------------------------------

    def append(self, user_text: str, reply_text: str = "",
               timestamp: float | None = None) -> int:
        """Ingest one turn; consolidates automatically on the N-cadence.

        Without an explicit timestamp the turn index (0-based) is used, so
        the default clock is "one unit per turn".
        """
        with self._write_lock:
            if timestamp is None:
                timestamp = float(self.graph.turn_counter)
            node_id = self.graph.append_turn(user_text, reply_text,
                                             timestamp, self.embedder)
            self.lexical.index_node(node_id, self.graph.index_text(node_id))
            if self.auto_consolidate and \
                    self.graph.turn_counter % self.params.consolidation_n == 0:
                self.consolidate()
            return node_id

    def consolidate(self) -> ConsolidationReport:
        """Run one consolidation: extraction, dedup, edges, bookkeeping.

        On success this also folds the window's peak activations into the
        dormancy streaks and refreshes the cached structural prior. A
        provider failure leaves graph and engine state untouched (the report
        carries the failure).
        """
        with self._write_lock:
            report = self.graph.consolidate(self.extractor, self.embedder,
                                            self.params)
            if not report.ok:
                return report
            for _, node_id in report.created:
                self.lexical.index_node(node_id,
                                        self.graph.index_text(node_id))
            self.graph.update_dormancy(self.window_peaks, self.params)
            self.window_peaks = {}
            self.prior = compute_pagerank(
                self.graph, computed_at=self.graph.consolidation_counter)
            return report

    def compact(self) -> dict:
        """Prune incoming edges to the top-K and archive dormant nodes."""
        with self._write_lock:
            pruned = self.graph.prune_edges(self.params)
            archived = self.graph.collect_dormant(self.params)
            for node_id in archived:
                self.lexical.remove_node(node_id)
            return {"pruned_edges": pruned, "archived_nodes": archived}

    def restore(self, node_ids: list[int]) -> None:
        """Bring archived nodes (and their recoverable edges) back."""
        with self._write_lock:
            self.graph.restore_archived(node_ids)
            for node_id in sorted(set(node_ids)):
                self.lexical.index_node(node_id,
                                        self.graph.index_text(node_id))

    # ------------------------------------------------------------------
    # Reads
    # ------------------------------------------------------------------

    def query(self, text: str, *, steps: int | None = None,
              fan_dilution: bool = True,
              keep_rejected_candidates: bool = False) -> RetrievalResult:
        """Retrieve context for a query and track activation peaks."""
        result, state = retrieve(
            self.graph, text, self.embedder, self.lexical, self.prior,
            self.params, steps=steps, fan_dilution=fan_dilution,
            keep_rejected_candidates=keep_rejected_candidates,
            return_state=True)
        if state is not None:
            for node_id, peak in state.peaks.items():
                if peak > self.window_peaks.get(node_id, 0.0):
                    self.window_peaks[node_id] = peak
        return result

    def stats(self) -> dict:
        graph = self.graph
        in_degrees = [len(graph._in.get(node_id, ()))
                      for node_id in graph.node_ids()]
        histogram: dict[int, int] = {}
        for degree in in_degrees:
            histogram[degree] = histogram.get(degree, 0) + 1
        return {
            "episodic_nodes": len(graph.episodic),
            "semantic_nodes": len(graph.semantic),
            "edges": graph.edge_count,
            "archived_nodes": len(graph.archive),
            "turns_ingested": graph.turn_counter,
            "consolidations": graph.consolidation_counter,
            "in_degree_histogram": dict(sorted(histogram.items())),
            "prior_computed_at": self.prior.computed_at,
        }

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def save(self, path) -> int:
        from .persistence import save_snapshot
        with self._write_lock:
            return save_snapshot(self, path)

    @classmethod
    def load(cls, path, embedder=None, extractor=None) -> "MemoryEngine":
        from .persistence import load_snapshot
        return load_snapshot(path, embedder=embedder, extractor=extractor)
