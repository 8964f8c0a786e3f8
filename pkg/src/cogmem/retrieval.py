"""Triple-hybrid retrieval: fuse similarity, activation, and structure.

Every candidate carries its decomposed score

    score = lambda1 * max(sim, 0) + lambda2 * activation + lambda3 * prior

so the fusion is auditable after the fact. Candidates are the nodes the
activation run left energized plus the top dense hits (pure-similarity
matches survive even when propagation missed them). The top-k by fused score
are re-ordered for presentation: episodes chronologically, each concept
spliced in just before its strongest linked episode.

A confidence gate rejects the query outright when the top candidate's
activation falls below ``tau_gate`` — low energy means the graph holds no
trace worth answering from.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .activation import run_activation
from .embedding import cosine_sim
from .errors import EmptyStoreError
from .graph import EpisodicNode, MemoryGraph
from .lexical import LexicalIndex
from .params import HyperParams
from .structural import StructuralPrior

REJECTION_MESSAGE = ("No supporting memory found for this query; "
                     "declining to answer.")
EMPTY_STORE_MESSAGE = ("The memory store is empty; nothing is known yet.")

VERIFICATION_INSTRUCTION = (
    "Answer using ONLY the evidence above. "
    "Is this EXPLICITLY mentioned? If not, output 'Not mentioned'."
)


class Verdict(str, Enum):
    ANSWERABLE = "answerable"
    REJECTED = "rejected"


@dataclass(frozen=True)
class RetrievalCandidate:
    id: int
    sim: float          # cosine similarity to the query, in [-1, 1]
    activation: float   # final firing rate, in [0, 1]
    prior: float        # normalized structural prior, in [0, 1]
    score: float        # fused value


@dataclass
class RetrievalResult:
    candidates: list[RetrievalCandidate]
    confidence: float
    verdict: Verdict
    rejection_message: str | None = None

    @property
    def answerable(self) -> bool:
        return self.verdict is Verdict.ANSWERABLE


def fused_score(sim: float, activation: float, prior: float,
                params: HyperParams) -> float:
    return params.lambda1 * max(sim, 0.0) + params.lambda2 * activation \
        + params.lambda3 * prior


def gate(candidates: list[RetrievalCandidate], confidence: float,
         params: HyperParams
         ) -> tuple[Verdict, list[RetrievalCandidate], str | None]:
    """Dual-stage gate, stage one: reject iff confidence < tau_gate.

    The comparison is strict, so confidence exactly at the threshold passes.
    Answerable verdicts pass candidates through unchanged; rejections carry
    the fixed negative-acknowledgement message.
    """
    if confidence < params.tau_gate:
        return Verdict.REJECTED, candidates, REJECTION_MESSAGE
    return Verdict.ANSWERABLE, candidates, None


def retrieve(graph: MemoryGraph, query_text: str, embedder,
             lexical: LexicalIndex, prior: StructuralPrior,
             params: HyperParams, *, steps: int | None = None,
             fan_dilution: bool = True,
             keep_rejected_candidates: bool = False,
             return_state: bool = False):
    """Run activation, fuse the three signals, gate, and order the top-k.

    An empty graph short-circuits to a Rejected result with the empty-store
    message. With ``return_state=True`` the final activation state is
    returned alongside the result (the engine uses it for dormancy
    bookkeeping).
    """
    if graph.live_count == 0:
        result = RetrievalResult(candidates=[], confidence=0.0,
                                 verdict=Verdict.REJECTED,
                                 rejection_message=EMPTY_STORE_MESSAGE)
        return (result, None) if return_state else result

    query_embedding = np.asarray(embedder.embed(query_text),
                                 dtype=np.float64)
    try:
        state = run_activation(graph, query_text, query_embedding, lexical,
                               params, steps=steps,
                               fan_dilution=fan_dilution)
    except EmptyStoreError:
        result = RetrievalResult(candidates=[], confidence=0.0,
                                 verdict=Verdict.REJECTED,
                                 rejection_message=EMPTY_STORE_MESSAGE)
        return (result, None) if return_state else result

    universe = sorted({node_id for node_id, value
                       in state.activation.items() if value > 0.0}
                      | set(state.dense_hits))
    scored = []
    for node_id in universe:
        sim = cosine_sim(graph.node(node_id).embedding, query_embedding)
        activation = state.activation.get(node_id, 0.0)
        prior_value = prior.lookup(node_id)
        scored.append(RetrievalCandidate(
            id=node_id, sim=sim, activation=activation, prior=prior_value,
            score=fused_score(sim, activation, prior_value, params)))
    scored.sort(key=lambda c: (-c.score, c.id))
    top = scored[:params.top_k]

    confidence = top[0].activation if top else 0.0
    verdict, passed, message = gate(top, confidence, params)
    if verdict is Verdict.REJECTED and not keep_rejected_candidates:
        passed = []
    ordered = presentation_order(graph, passed)
    result = RetrievalResult(candidates=ordered, confidence=confidence,
                             verdict=verdict, rejection_message=message)
    return (result, state) if return_state else result


def presentation_order(graph: MemoryGraph,
                       candidates: list[RetrievalCandidate]
                       ) -> list[RetrievalCandidate]:
    """Topological presentation: chronological episodes, concepts spliced in.

    Episodic candidates sort by timestamp (ties by id). Each semantic
    candidate is inserted immediately before the episodic candidate it is
    most strongly linked to (highest edge weight in either direction, ties
    to the earlier episode); concepts with no linked episode in the result
    go at the front.
    """
    episodic = [c for c in candidates if graph.is_episodic(c.id)]
    semantic = [c for c in candidates if not graph.is_episodic(c.id)]
    episodic.sort(key=lambda c: (graph.episodic[c.id].timestamp, c.id))
    episodic_ids = {c.id for c in episodic}

    orphans: list[RetrievalCandidate] = []
    attached: dict[int, list[RetrievalCandidate]] = {}
    for candidate in sorted(semantic, key=lambda c: (-c.score, c.id)):
        best: tuple[float, float, int] | None = None  # (-w, timestamp, id)
        for edge in graph.out_edges(candidate.id) + \
                graph.in_edges(candidate.id):
            other = edge.dst if edge.src == candidate.id else edge.src
            if other not in episodic_ids:
                continue
            key = (-edge.weight, graph.episodic[other].timestamp, other)
            if best is None or key < best:
                best = key
        if best is None:
            orphans.append(candidate)
        else:
            attached.setdefault(best[2], []).append(candidate)

    ordered: list[RetrievalCandidate] = list(orphans)
    for episode in episodic:
        ordered.extend(attached.get(episode.id, ()))
        ordered.append(episode)
    return ordered


@dataclass(frozen=True)
class EvidenceEntry:
    node_id: int
    timestamp: float | None
    text: str


def evidence_entries(graph: MemoryGraph,
                     candidates: list[RetrievalCandidate]
                     ) -> list[EvidenceEntry]:
    """Presentation-ordered evidence rows for prompting and display."""
    entries = []
    for candidate in candidates:
        node = graph.node(candidate.id)
        if isinstance(node, EpisodicNode):
            entries.append(EvidenceEntry(node.id, node.timestamp,
                                         node.content))
        else:
            text = node.name
            if node.attributes:
                text += " (" + "; ".join(node.attributes) + ")"
            entries.append(EvidenceEntry(node.id, None, text))
    return entries


def build_verification_prompt(query: str,
                              evidence: list[EvidenceEntry]) -> str:
    """Strict-evidence answer prompt over the retrieved context.

    Deterministic: identical inputs produce byte-identical prompts. Each
    evidence row is tagged with its node id and timestamp.
    """
    lines = ["Evidence:\n"]
    for entry in evidence:
        stamp = "-" if entry.timestamp is None else repr(entry.timestamp)
        lines.append(f"[node {entry.node_id} | t={stamp}] {entry.text}\n")
    lines.append("\n")
    lines.append(f"Question: {query}\n")
    lines.append(VERIFICATION_INSTRUCTION + "\n")
    return "".join(lines)
