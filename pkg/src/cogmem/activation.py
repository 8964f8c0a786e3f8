"""Spreading-activation dynamics over the memory graph.

One query cycle:

1. seed: anchors chosen by the union of two trigger streams (BM25 lexical,
   dense cosine), each anchor injected with energy proportional to its
   query similarity;
2. propagate: each active node spreads a share of its activation along its
   out-edges, diluted by its out-degree (the fan effect), while retaining
   a decayed fraction of its own energy;
3. inhibit: the top-M potentials suppress everything strictly below them,
   enforcing winner-take-most sparsity;
4. fire: a steep sigmoid turns potentials into firing rates; potentials at
   or below the dormancy floor fire to exactly zero (sparse-frontier rule)
   so untouched regions stay dark.

The cycle repeats a fixed number of steps. Everything here is pure with
respect to the graph snapshot: concurrent queries over the same quiescent
graph are safe, and identical inputs produce bit-identical states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import cosine_sim
from .errors import EmptyStoreError
from .graph import MemoryGraph
from .lexical import LexicalIndex
from .params import HyperParams


@dataclass
class ActivationState:
    """Per-query activation bookkeeping (sparse: missing id means 0)."""

    activation: dict[int, float]
    potential: dict[int, float]
    iteration: int
    anchors: set[int]
    lexical_hits: list[int] = field(default_factory=list)
    dense_hits: list[int] = field(default_factory=list)
    peaks: dict[int, float] = field(default_factory=dict)
    history: list[dict[int, float]] | None = None

    def record_peaks(self) -> None:
        for node_id, value in self.activation.items():
            if value > self.peaks.get(node_id, 0.0):
                self.peaks[node_id] = value


def dense_top_k(graph: MemoryGraph, query_embedding: np.ndarray,
                k: int) -> list[tuple[int, float]]:
    """Exact top-k nodes by cosine similarity over all live embeddings."""
    sims = []
    for node_id in graph.node_ids():
        sims.append((node_id,
                     cosine_sim(graph.node(node_id).embedding,
                                query_embedding)))
    sims.sort(key=lambda item: (-item[1], item[0]))
    return sims[:k]


def seed_anchors(graph: MemoryGraph, query_text: str,
                 query_embedding: np.ndarray, lexical: LexicalIndex,
                 params: HyperParams) -> ActivationState:
    """Select the anchor set and inject initial energy.

    Anchors are the union of the top ``anchor_k`` BM25 hits and the top
    ``anchor_k`` cosine hits. Every anchor starts at
    ``alpha * sim(node, query)``, clamped into [0, 1]: negative similarity
    carries no defined meaning downstream, so it floors at zero while the
    node keeps its anchor membership.

    Raises:
        EmptyStoreError: the graph holds no nodes ("nothing known").
    """
    if graph.live_count == 0:
        raise EmptyStoreError("memory graph is empty")
    lexical_hits = [node_id for node_id, _ in
                    lexical.bm25_scores(query_text, limit=params.anchor_k)]
    dense_hits = [node_id for node_id, _ in
                  dense_top_k(graph, query_embedding, params.anchor_k)]
    anchors = set(lexical_hits) | set(dense_hits)
    activation: dict[int, float] = {}
    for node_id in sorted(anchors):
        sim = cosine_sim(graph.node(node_id).embedding, query_embedding)
        activation[node_id] = min(1.0, max(0.0, params.alpha * sim))
    state = ActivationState(activation=activation, potential={},
                            iteration=0, anchors=anchors,
                            lexical_hits=lexical_hits,
                            dense_hits=dense_hits)
    state.record_peaks()
    return state


def propagate_step(graph: MemoryGraph, state: ActivationState,
                   params: HyperParams,
                   fan_dilution: bool = True) -> dict[int, float]:
    """One propagation sweep: retained energy plus fan-diluted inflow.

    Only the one-hop frontier of the active set is evaluated; everything
    else keeps an implicit potential of zero. ``fan_dilution=False`` removes
    the out-degree division (ablation switch).
    """
    potentials: dict[int, float] = {}
    retain = 1.0 - params.delta
    active = sorted((node_id, value)
                    for node_id, value in state.activation.items()
                    if value > 0.0)
    for node_id, value in active:
        potentials[node_id] = retain * value
    for node_id, value in active:
        fan = graph.out_degree(node_id)
        if fan == 0:
            continue
        share = params.spreading * value
        if fan_dilution:
            share /= fan
        for edge in graph.out_edges(node_id):
            weight = graph.propagation_weight(edge, params)
            potentials[edge.dst] = potentials.get(edge.dst, 0.0) + \
                share * weight
    return potentials


def lateral_inhibition(potentials: dict[int, float],
                       params: HyperParams) -> dict[int, float]:
    """Suppress lower potentials by the margin to the top-M inhibitor set.

    Each node loses ``beta * sum(u_k - u_i)`` over inhibitors strictly above
    it, floored at zero. The strict inequality means the global maximum is
    never inhibited; equal potentials leave each other untouched.
    """
    positive = sorted(((node_id, value)
                       for node_id, value in potentials.items()
                       if value > 0.0),
                      key=lambda item: (-item[1], item[0]))
    inhibitors = positive[:params.inhibit_m]
    inhibited: dict[int, float] = {}
    for node_id in sorted(potentials):
        value = potentials[node_id]
        suppression = 0.0
        for _, inhibitor_value in inhibitors:
            if inhibitor_value > value:
                suppression += inhibitor_value - value
        inhibited[node_id] = max(0.0, value - params.beta * suppression)
    return inhibited


def sigmoid(x: float, params: HyperParams) -> float:
    z = -params.gamma * (x - params.theta)
    if z > 700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


def fire(inhibited: dict[int, float], params: HyperParams,
         dense_firing: bool = False) -> dict[int, float]:
    """Map inhibited potentials to firing rates in [0, 1].

    Sparse-frontier rule (default): potentials at or below the dormancy
    floor fire to exactly 0, keeping unreached nodes dark. With
    ``dense_firing=True`` the sigmoid applies literally to every supplied
    potential, which gives untouched nodes a baseline of
    sigmoid(-gamma * theta); that mode exists for comparison tests only.
    """
    activation: dict[int, float] = {}
    for node_id in sorted(inhibited):
        value = inhibited[node_id]
        if dense_firing:
            activation[node_id] = sigmoid(value, params)
        elif value > params.epsilon_dormant:
            activation[node_id] = sigmoid(value, params)
    return activation


def run_activation(graph: MemoryGraph, query_text: str,
                   query_embedding: np.ndarray, lexical: LexicalIndex,
                   params: HyperParams, *, steps: int | None = None,
                   fan_dilution: bool = True, dense_firing: bool = False,
                   record_history: bool = False) -> ActivationState:
    """Run the full cycle: seed, then T x (propagate -> inhibit -> fire).

    ``steps`` overrides ``params.steps`` (0 returns the seeded state
    untouched). Per-node peak activation is tracked across iterations for
    dormancy bookkeeping.
    """
    state = seed_anchors(graph, query_text, query_embedding, lexical, params)
    total = params.steps if steps is None else steps
    if record_history:
        state.history = [dict(state.activation)]
    for _ in range(total):
        potentials = propagate_step(graph, state, params,
                                    fan_dilution=fan_dilution)
        inhibited = lateral_inhibition(potentials, params)
        state.activation = fire(inhibited, params,
                                dense_firing=dense_firing)
        state.potential = inhibited
        state.iteration += 1
        state.record_peaks()
        if record_history:
            state.history.append(dict(state.activation))
    return state
