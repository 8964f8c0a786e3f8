"""Incremental inverted index with BM25 scoring.

Feeds the lexical half of anchor selection. The IDF uses the non-negative
formulation ln(1 + (N - n + 0.5)/(n + 0.5)) so scores never go below zero —
anchor energy must stay non-negative. Tokenization is shared with the
deterministic embedder so the lexical and dense paths agree on word
boundaries.
"""

from __future__ import annotations

import math
from collections import Counter

from .embedding import tokenize
from .errors import DuplicateNodeError, UnknownNodeError


class LexicalIndex:
    """Inverted index over node contents supporting add/remove and BM25."""

    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        # term -> {node id -> term frequency}
        self.postings: dict[str, dict[int, int]] = {}
        self.doc_lengths: dict[int, int] = {}
        self._length_sum = 0

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return self._length_sum / len(self.doc_lengths)

    def index_node(self, node_id: int, content: str) -> None:
        """Add one document; raises if the id is already indexed."""
        if node_id in self.doc_lengths:
            raise DuplicateNodeError(f"node {node_id} is already indexed")
        tokens = tokenize(content)
        self.doc_lengths[node_id] = len(tokens)
        self._length_sum += len(tokens)
        for term, tf in Counter(tokens).items():
            self.postings.setdefault(term, {})[node_id] = tf

    def remove_node(self, node_id: int) -> None:
        """Remove a document as if it were never indexed."""
        if node_id not in self.doc_lengths:
            raise UnknownNodeError(f"node {node_id} is not indexed")
        self._length_sum -= self.doc_lengths.pop(node_id)
        empty_terms = []
        for term, entries in self.postings.items():
            if entries.pop(node_id, None) is not None and not entries:
                empty_terms.append(term)
        for term in empty_terms:
            del self.postings[term]

    def bm25_scores(self, query: str, limit: int | None = None
                    ) -> list[tuple[int, float]]:
        """Rank indexed nodes against the query.

        Returns (node id, score) pairs in descending score order, ties broken
        by smaller id; nodes sharing no term with the query are excluded.
        """
        terms = tokenize(query)
        if not terms or not self.doc_lengths:
            return []
        n_docs = self.doc_count
        avg_len = self.avg_doc_length
        scores: dict[int, float] = {}
        # Deduplicate while keeping deterministic term order.
        for term in sorted(set(terms)):
            entries = self.postings.get(term)
            if not entries:
                continue
            n_t = len(entries)
            idf = math.log(1.0 + (n_docs - n_t + 0.5) / (n_t + 0.5))
            for node_id, tf in entries.items():
                dl = self.doc_lengths[node_id]
                denom = tf + self.k1 * (1.0 - self.b + self.b * dl / avg_len)
                scores[node_id] = scores.get(node_id, 0.0) + \
                    idf * tf * (self.k1 + 1.0) / denom
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        if limit is not None:
            ranked = ranked[:limit]
        return ranked
