"""Independent dense-matrix reference implementations used as test oracles.

These deliberately recompute the dynamics over *all* nodes with numpy
matrices — no sparsity, no shared code paths with the engine — so they can
arbitrate the sparse implementations.
"""

from __future__ import annotations

import numpy as np

from cogmem.embedding import cosine_sim


def dense_activation_reference(graph, params, query_embedding, anchors,
                               steps, fan_dilution=True):
    """Full-matrix evaluation of seeding, propagation, inhibition, firing.

    Returns a list of activation dicts: index 0 is the seeded state, index
    t is the state after cycle t.
    """
    ids = graph.node_ids()
    index = {node_id: i for i, node_id in enumerate(ids)}
    n = len(ids)

    spread = np.zeros((n, n))  # spread[i, j]: j -> i contribution weight
    fan = np.zeros(n)
    for node_id in ids:
        j = index[node_id]
        edges = graph.out_edges(node_id)
        fan[j] = len(edges)
        for edge in edges:
            spread[index[edge.dst], j] += \
                params.spreading * graph.propagation_weight(edge, params)

    a = np.zeros(n)
    for node_id in anchors:
        sim = cosine_sim(graph.node(node_id).embedding, query_embedding)
        a[index[node_id]] = min(1.0, max(0.0, params.alpha * sim))

    def snapshot(vector):
        return {ids[i]: float(vector[i]) for i in range(n)
                if vector[i] != 0.0}

    history = [snapshot(a)]
    for _ in range(steps):
        # fan == 0 leaves a zero column in `spread`, so the share value for
        # those nodes never contributes.
        share = a / np.maximum(fan, 1.0) if fan_dilution else a
        u = (1.0 - params.delta) * a + spread @ share

        order = sorted((i for i in range(n) if u[i] > 0.0),
                       key=lambda i: (-u[i], ids[i]))
        inhibitors = [u[i] for i in order[:params.inhibit_m]]
        u_hat = np.zeros(n)
        for i in range(n):
            suppression = sum(v - u[i] for v in inhibitors if v > u[i])
            u_hat[i] = max(0.0, u[i] - params.beta * suppression)

        a = np.where(
            u_hat > params.epsilon_dormant,
            1.0 / (1.0 + np.exp(-params.gamma * (u_hat - params.theta))),
            0.0)
        history.append(snapshot(a))
    return history


def dense_pagerank_reference(graph, damping=0.85, iterations=100,
                             tolerance=1e-8):
    """Column-stochastic dense power iteration (parallel edges collapsed)."""
    ids = graph.node_ids()
    index = {node_id: i for i, node_id in enumerate(ids)}
    n = len(ids)
    adjacency = np.zeros((n, n))
    for edge in graph.all_edges():
        adjacency[index[edge.dst], index[edge.src]] = 1.0
    out = adjacency.sum(axis=0)
    transition = np.zeros((n, n))
    np.divide(adjacency, out, out=transition, where=out > 0)
    dangling = out == 0.0
    rank = np.full(n, 1.0 / n)
    for _ in range(iterations):
        updated = (1.0 - damping) / n + damping * (
            transition @ rank + rank[dangling].sum() / n)
        if np.abs(updated - rank).sum() < tolerance:
            rank = updated
            break
        rank = updated
    return {ids[i]: float(rank[i]) for i in range(n)}
