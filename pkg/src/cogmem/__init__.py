"""cogmem — conversational memory as an episodic-semantic activation graph.

Dialogue turns become episodic nodes; consolidation synthesizes semantic
concept nodes and wires both layers together. Retrieval injects query
energy at lexical/dense anchors, spreads it with fan-effect dilution and
lateral inhibition, fuses the resulting activation with cosine similarity
and a PageRank prior, and rejects queries whose best trace is too weak to
trust.
"""

from .embedding import (EmbedderConfig, HashingEmbedder, ServiceEmbedder,
                        cosine_sim, make_embedder, tokenize)
from .engine import MemoryEngine
from .errors import (CogmemError, EmptyStoreError, ExtractionParseError,
                     MonotonicityError, SnapshotIntegrityError,
                     SnapshotIOError, SnapshotVersionError, TransportError,
                     ValidationError)
from .extraction import (ExtractedEdgeHint, ExtractedItem,
                         RuleBasedExtractor, build_extraction_prompt,
                         parse_extraction_response)
from .graph import (Edge, EdgeKind, EpisodicNode, MemoryGraph, SemanticNode,
                    temporal_edge_weight)
from .lexical import LexicalIndex
from .params import HyperParams
from .persistence import load_snapshot, save_snapshot
from .retrieval import (RetrievalCandidate, RetrievalResult, Verdict,
                        build_verification_prompt, gate, retrieve)
from .structural import StructuralPrior, compute_pagerank

__version__ = "0.1.0"

__all__ = [
    "CogmemError", "EmptyStoreError", "ExtractionParseError",
    "MonotonicityError", "SnapshotIntegrityError", "SnapshotIOError",
    "SnapshotVersionError", "TransportError", "ValidationError",
    "EmbedderConfig", "HashingEmbedder", "ServiceEmbedder", "cosine_sim",
    "make_embedder", "tokenize",
    "ExtractedEdgeHint", "ExtractedItem", "RuleBasedExtractor",
    "build_extraction_prompt", "parse_extraction_response",
    "Edge", "EdgeKind", "EpisodicNode", "MemoryGraph", "SemanticNode",
    "temporal_edge_weight",
    "LexicalIndex", "HyperParams", "MemoryEngine",
    "load_snapshot", "save_snapshot",
    "RetrievalCandidate", "RetrievalResult", "Verdict",
    "build_verification_prompt", "gate", "retrieve",
    "StructuralPrior", "compute_pagerank",
    "__version__",
]
