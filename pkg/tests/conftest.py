"""Shared fixtures: controlled embedders, scripted extractors, graph builders.

Graph-dynamics tests never depend on embedding *quality*: similarity
relationships are constructed explicitly, either from unit vectors built
here or from token overlap under the deterministic hasher.
"""

from __future__ import annotations

import numpy as np
import pytest

from cogmem.embedding import HashingEmbedder, EmbedderConfig
from cogmem.graph import Edge, EdgeKind, EpisodicNode, MemoryGraph, SemanticNode
from cogmem.lexical import LexicalIndex
from cogmem.params import HyperParams

DIM = 16


def make_params(**overrides) -> HyperParams:
    defaults = {"embed_dim": DIM}
    defaults.update(overrides)
    return HyperParams(**defaults)


def unit(components, dim: int = DIM) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for index, value in components.items() if isinstance(components, dict) \
            else enumerate(components):
        vec[index] = value
    norm = np.linalg.norm(vec)
    assert norm > 0, "test vector must be nonzero"
    return vec / norm


def basis(index: int, dim: int = DIM) -> np.ndarray:
    return unit({index: 1.0}, dim)


def random_unit(rng: np.random.Generator, dim: int = DIM) -> np.ndarray:
    vec = rng.normal(size=dim)
    return vec / np.linalg.norm(vec)


class FakeEmbedder:
    """Returns prescribed unit vectors per text; falls back to hashing."""

    def __init__(self, table: dict[str, np.ndarray] | None = None,
                 dim: int = DIM):
        self.table = dict(table or {})
        self.dimension = dim
        self._fallback = HashingEmbedder(EmbedderConfig(dimension=dim))

    def embed(self, text: str) -> np.ndarray:
        if text in self.table:
            return self.table[text]
        return self._fallback.embed(text)


class ScriptedExtractor:
    """Yields one prescribed (items, hints) batch per extract() call."""

    def __init__(self, batches):
        self.batches = list(batches)
        self.calls = 0

    def extract(self, turns):
        batch = self.batches[min(self.calls, len(self.batches) - 1)] \
            if self.batches else ([], [])
        self.calls += 1
        return batch


class FailingExtractor:
    def extract(self, turns):
        raise RuntimeError("extractor blew up mid-batch")


def add_episode(graph: MemoryGraph, vec: np.ndarray, timestamp: float,
                content: str = "") -> int:
    node_id = graph._allocate_id()
    graph.episodic[node_id] = EpisodicNode(
        id=node_id, content=content or f"episode {node_id}",
        embedding=np.asarray(vec, dtype=np.float64),
        timestamp=float(timestamp))
    return node_id


def add_concept(graph: MemoryGraph, vec: np.ndarray, name: str = "",
                category: str = "Other") -> int:
    node_id = graph._allocate_id()
    graph.semantic[node_id] = SemanticNode(
        id=node_id, name=name or f"concept {node_id}", category=category,
        embedding=np.asarray(vec, dtype=np.float64))
    return node_id


def link(graph: MemoryGraph, src: int, dst: int, kind: EdgeKind,
         weight: float = 0.8, created_at: int = 0) -> None:
    graph._add_edge(Edge(src, dst, weight, kind, created_at))


def edge_kind_for(graph: MemoryGraph, src: int, dst: int) -> EdgeKind:
    if graph.is_episodic(src) and graph.is_episodic(dst):
        return EdgeKind.TEMPORAL
    if graph.is_episodic(src) or graph.is_episodic(dst):
        return EdgeKind.ABSTRACTION
    return EdgeKind.ASSOCIATION


def random_graph(rng: np.random.Generator, max_nodes: int = 12,
                 max_edges: int | None = None, dim: int = DIM,
                 params: HyperParams | None = None
                 ) -> tuple[MemoryGraph, np.ndarray]:
    """A random mixed graph plus a random query embedding."""
    p = params or make_params(embed_dim=dim)
    graph = MemoryGraph(p)
    n_episodic = int(rng.integers(1, max(2, max_nodes - 1)))
    n_semantic = int(rng.integers(0, max_nodes - n_episodic + 1))
    timestamp = 0.0
    for _ in range(n_episodic):
        timestamp += float(rng.uniform(0.5, 3.0))
        add_episode(graph, random_unit(rng, dim), timestamp)
    for _ in range(n_semantic):
        add_concept(graph, random_unit(rng, dim))
    ids = graph.node_ids()
    cap = max_edges if max_edges is not None else max_nodes * 3
    n_edges = int(rng.integers(0, cap + 1))
    seen = set()
    for _ in range(n_edges):
        src, dst = rng.choice(ids, size=2, replace=True)
        src, dst = int(src), int(dst)
        if src == dst:
            continue
        kind = edge_kind_for(graph, src, dst)
        if (src, dst, kind) in seen:
            continue
        seen.add((src, dst, kind))
        weight = float(rng.uniform(0.05, 1.0))
        link(graph, src, dst, kind, weight,
             created_at=int(rng.integers(0, 5)))
    return graph, random_unit(rng, dim)


def build_lexical(graph: MemoryGraph) -> LexicalIndex:
    index = LexicalIndex()
    for node_id in graph.node_ids():
        index.index_node(node_id, graph.index_text(node_id))
    return index


@pytest.fixture
def params() -> HyperParams:
    return make_params()


@pytest.fixture
def hash_embedder() -> HashingEmbedder:
    return HashingEmbedder(EmbedderConfig(dimension=DIM))
