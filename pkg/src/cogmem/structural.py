"""Query-independent structural prior: cached PageRank over the live graph.

Computed under the writer lock on the consolidation cadence and read by
every retrieval in between, so repeated queries observe identical values.
Edges are treated uniformly and unweighted (parallel edges of different
kinds collapse to one link); dangling mass redistributes uniformly. Raw
scores sum to 1; retrieval consumes max-normalized values so the prior
stays on [0, 1] as the graph grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import MemoryGraph


@dataclass
class StructuralPrior:
    scores: dict[int, float] = field(default_factory=dict)
    normalized: dict[int, float] = field(default_factory=dict)
    computed_at: int = 0
    damping: float = 0.85
    iterations: int = 100
    tolerance: float = 1e-8

    def lookup(self, node_id: int) -> float:
        """Max-normalized prior; nodes added after the refresh read as 0."""
        return self.normalized.get(node_id, 0.0)


def compute_pagerank(graph: MemoryGraph, damping: float = 0.85,
                     iterations: int = 100, tolerance: float = 1e-8,
                     computed_at: int | None = None) -> StructuralPrior:
    """Power-iteration PageRank over all live nodes.

    Iterates until the L1 change drops below ``tolerance`` or the iteration
    cap is reached. Returns raw and max-normalized scores keyed by node id.
    """
    ids = graph.node_ids()
    stamp = graph.consolidation_counter if computed_at is None \
        else computed_at
    if not ids:
        return StructuralPrior(computed_at=stamp, damping=damping,
                               iterations=iterations, tolerance=tolerance)
    index = {node_id: i for i, node_id in enumerate(ids)}
    n = len(ids)

    # Collapse parallel edges (same endpoints, different kinds) to one link.
    links = sorted({(edge.src, edge.dst) for edge in graph.all_edges()})
    src_idx = np.array([index[src] for src, _ in links], dtype=np.int64)
    dst_idx = np.array([index[dst] for _, dst in links], dtype=np.int64)
    out_deg = np.zeros(n, dtype=np.float64)
    np.add.at(out_deg, src_idx, 1.0)
    dangling = out_deg == 0.0

    rank = np.full(n, 1.0 / n, dtype=np.float64)
    base = (1.0 - damping) / n
    for _ in range(iterations):
        share = np.where(dangling, 0.0, rank / np.maximum(out_deg, 1.0))
        incoming = np.zeros(n, dtype=np.float64)
        if len(src_idx):
            np.add.at(incoming, dst_idx, share[src_idx])
        dangling_mass = float(rank[dangling].sum())
        updated = base + damping * (incoming + dangling_mass / n)
        delta = float(np.abs(updated - rank).sum())
        rank = updated
        if delta < tolerance:
            break

    scores = {node_id: float(rank[index[node_id]]) for node_id in ids}
    peak = max(scores.values())
    normalized = {node_id: value / peak for node_id, value in scores.items()}
    return StructuralPrior(scores=scores, normalized=normalized,
                           computed_at=stamp, damping=damping,
                           iterations=iterations, tolerance=tolerance)
