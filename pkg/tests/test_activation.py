import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cogmem.activation import (ActivationState, fire, lateral_inhibition,
                               propagate_step, run_activation, seed_anchors)
from cogmem.errors import EmptyStoreError
from cogmem.graph import EdgeKind, MemoryGraph

from conftest import (DIM, add_concept, add_episode, basis, build_lexical,
                      link, make_params, random_graph, random_unit, unit)
from reference import dense_activation_reference


def _state(activation, iteration=0):
    return ActivationState(activation=dict(activation), potential={},
                           iteration=iteration,
                           anchors=set(activation))


# ---------------------------------------------------------------------------
# seed_anchors
# ---------------------------------------------------------------------------

def test_seed_identical_node_gets_full_energy(params):
    graph = MemoryGraph(params)
    query = basis(0)
    node = add_episode(graph, query, 0.0, "green jacket")
    state = seed_anchors(graph, "green jacket", query,
                         build_lexical(graph), params)
    assert state.activation[node] == pytest.approx(1.0)
    assert node in state.anchors


def test_seed_orthogonal_bm25_hit_has_zero_energy(params):
    graph = MemoryGraph(params)
    match = add_episode(graph, basis(1), 0.0, "green jacket")
    add_episode(graph, basis(2), 1.0, "something else entirely")
    state = seed_anchors(graph, "jacket", basis(0),
                         build_lexical(graph), params)
    assert match in state.anchors          # via the lexical stream
    assert state.activation[match] == 0.0  # orthogonal embedding


def test_seed_union_assigns_energy_once(params):
    graph = MemoryGraph(params)
    node = add_episode(graph, basis(0), 0.0, "green jacket")
    state = seed_anchors(graph, "green jacket", basis(0),
                         build_lexical(graph), params)
    assert state.anchors == {node}
    assert list(state.activation) == [node]


def test_seed_empty_graph_rejected(params):
    graph = MemoryGraph(params)
    with pytest.raises(EmptyStoreError):
        seed_anchors(graph, "anything", basis(0), build_lexical(graph),
                     params)


def test_seed_negative_similarity_clamped(params):
    graph = MemoryGraph(params)
    node = add_episode(graph, -basis(0), 0.0, "inverse")
    state = seed_anchors(graph, "inverse", basis(0),
                         build_lexical(graph), params)
    assert state.activation[node] == 0.0


# ---------------------------------------------------------------------------
# propagate_step hand values
# ---------------------------------------------------------------------------

def test_propagation_splits_energy_over_fan(params):
    # Source at full activation, two unit-weight out-edges, delta = 0.5:
    # each target receives 0.8 * 1 * 1 / 2 = 0.4.
    graph = MemoryGraph(params)
    src = add_concept(graph, basis(0))
    a = add_concept(graph, basis(1))
    b = add_concept(graph, basis(2))
    link(graph, src, a, EdgeKind.ASSOCIATION, 1.0)
    link(graph, src, b, EdgeKind.ASSOCIATION, 1.0)
    potentials = propagate_step(graph, _state({src: 1.0}), params)
    assert potentials[a] == pytest.approx(0.4, abs=1e-12)
    assert potentials[b] == pytest.approx(0.4, abs=1e-12)
    assert potentials[src] == pytest.approx(0.5, abs=1e-12)


def test_isolated_node_keeps_retained_energy(params):
    graph = MemoryGraph(params)
    node = add_concept(graph, basis(0))
    potentials = propagate_step(graph, _state({node: 0.6}), params)
    assert potentials == {node: pytest.approx(0.3, abs=1e-12)}


def test_inactive_unreached_node_stays_zero(params):
    graph = MemoryGraph(params)
    active = add_concept(graph, basis(0))
    bystander = add_concept(graph, basis(1))
    potentials = propagate_step(graph, _state({active: 0.5}), params)
    assert bystander not in potentials


def test_fan_dilution_can_be_disabled(params):
    graph = MemoryGraph(params)
    src = add_concept(graph, basis(0))
    targets = [add_concept(graph, basis(i + 1)) for i in range(4)]
    for t in targets:
        link(graph, src, t, EdgeKind.ASSOCIATION, 1.0)
    diluted = propagate_step(graph, _state({src: 1.0}), params)
    flooded = propagate_step(graph, _state({src: 1.0}), params,
                             fan_dilution=False)
    for t in targets:
        assert diluted[t] == pytest.approx(0.2, abs=1e-12)
        assert flooded[t] == pytest.approx(0.8, abs=1e-12)


def test_energy_distribution_identity(params):
    # With all outgoing weights 1, the total spread equals S * a_j: fan
    # division conserves energy. Power-of-two fans keep the float math exact.
    for fan in (1, 2, 4, 8):
        graph = MemoryGraph(params)
        src = add_concept(graph, basis(0))
        targets = [add_concept(graph, basis((i + 1) % DIM))
                   for i in range(fan)]
        for t in targets:
            link(graph, src, t, EdgeKind.ASSOCIATION, 1.0)
        value = 0.7
        potentials = propagate_step(graph, _state({src: value}), params)
        total = math.fsum(potentials[t] for t in targets)
        assert total == params.spreading * value


def test_temporal_weight_recomputed_from_timestamps(params):
    graph = MemoryGraph(params)
    early = add_episode(graph, basis(0), 0.0)
    late = add_episode(graph, basis(1), 100.0)
    # Stored weight is deliberately wrong; propagation must recompute.
    link(graph, early, late, EdgeKind.TEMPORAL, weight=0.123)
    potentials = propagate_step(graph, _state({early: 1.0}), params)
    assert potentials[late] == \
        pytest.approx(params.spreading * math.exp(-1.0), abs=1e-12)


# ---------------------------------------------------------------------------
# lateral_inhibition
# ---------------------------------------------------------------------------

def test_inhibition_hand_values(params):
    # {A: 0.9, B: 0.6, C: 0.5} with M=2, beta=0.15: B loses 0.15*0.3 and C
    # loses 0.15*(0.4 + 0.1); the maximum is untouched.
    p = make_params(inhibit_m=2)
    inhibited = lateral_inhibition({1: 0.9, 2: 0.6, 3: 0.5}, p)
    assert inhibited[1] == pytest.approx(0.9, abs=1e-12)
    assert inhibited[2] == pytest.approx(0.555, abs=1e-12)
    assert inhibited[3] == pytest.approx(0.425, abs=1e-12)


def test_equal_potentials_untouched(params):
    inhibited = lateral_inhibition({1: 0.4, 2: 0.4, 3: 0.4}, params)
    assert inhibited == {1: 0.4, 2: 0.4, 3: 0.4}


def test_single_node_untouched(params):
    assert lateral_inhibition({5: 0.2}, params) == {5: 0.2}


def test_inhibition_floors_at_zero(params):
    p = make_params(beta=1.0, inhibit_m=7)
    inhibited = lateral_inhibition({1: 1.0, 2: 0.01}, p)
    assert inhibited[2] == 0.0


@settings(deadline=None, max_examples=200)
@given(st.dictionaries(st.integers(0, 30),
                       st.floats(0.0, 2.0, allow_nan=False), max_size=12),
       st.integers(1, 9), st.floats(0.0, 1.0))
def test_inhibition_properties(potentials, m, beta):
    p = make_params(inhibit_m=m, beta=beta)
    inhibited = lateral_inhibition(potentials, p)
    assert set(inhibited) == set(potentials)
    for node_id, value in inhibited.items():
        assert 0.0 <= value <= potentials[node_id]
    if potentials and max(potentials.values()) > 0:
        top = min(i for i, v in potentials.items()
                  if v == max(potentials.values()))
        assert inhibited[top] == potentials[top]  # arg-max never inhibited


# ---------------------------------------------------------------------------
# fire
# ---------------------------------------------------------------------------

def test_fire_midpoint_and_hand_value(params):
    fired = fire({1: 0.5, 2: 0.7}, params)
    assert fired[1] == pytest.approx(0.5, abs=1e-12)
    assert fired[2] == pytest.approx(0.73106, abs=1e-5)


def test_fire_sparse_frontier_rule(params):
    fired = fire({1: 0.0, 2: 0.01, 3: 0.011}, params)
    assert 1 not in fired and 2 not in fired
    assert fired[3] > 0.0


def test_fire_dense_mode_applies_literal_sigmoid(params):
    fired = fire({1: 0.0}, params, dense_firing=True)
    baseline = 1.0 / (1.0 + math.exp(params.gamma * params.theta))
    assert fired[1] == pytest.approx(baseline, abs=1e-12)


@settings(deadline=None, max_examples=100)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_fire_monotone(a, b):
    p = make_params()
    fired = fire({1: a, 2: b}, p, dense_firing=True)
    if a > b:
        assert fired[1] >= fired[2]


# ---------------------------------------------------------------------------
# run_activation
# ---------------------------------------------------------------------------

def test_zero_steps_returns_seeded_state(params):
    graph = MemoryGraph(params)
    node = add_episode(graph, basis(0), 0.0, "green jacket")
    lexical = build_lexical(graph)
    seeded = seed_anchors(graph, "green jacket", basis(0), lexical, params)
    ran = run_activation(graph, "green jacket", basis(0), lexical, params,
                         steps=0)
    assert ran.activation == seeded.activation
    assert ran.iteration == 0


def test_chain_reaches_two_hops_but_not_disconnected(params):
    # A -> B -> C chain with the anchor at A: C lights up by iteration 2;
    # a disconnected D never does.
    graph = MemoryGraph(params)
    a = add_concept(graph, basis(0), "alpha")
    b = add_concept(graph, basis(1), "beta")
    c = add_concept(graph, basis(2), "gamma")
    d = add_concept(graph, basis(3), "delta")
    link(graph, a, b, EdgeKind.ASSOCIATION, 1.0)
    link(graph, b, c, EdgeKind.ASSOCIATION, 1.0)
    state = run_activation(graph, "alpha", basis(0), build_lexical(graph),
                           params)
    assert state.iteration == params.steps
    assert state.activation.get(c, 0.0) > 0.0
    assert state.activation.get(d, 0.0) == 0.0
    assert state.peaks.get(d, 0.0) == 0.0


def test_two_runs_bit_identical(params):
    rng = np.random.default_rng(11)
    graph, query = random_graph(rng, max_nodes=10)
    lexical = build_lexical(graph)
    first = run_activation(graph, "query words", query, lexical, params)
    second = run_activation(graph, "query words", query, lexical, params)
    assert first.activation == second.activation
    assert first.potential == second.potential
    assert first.anchors == second.anchors


def test_peaks_track_maximum_across_iterations(params):
    graph = MemoryGraph(params)
    node = add_episode(graph, basis(0), 0.0, "green jacket")
    state = run_activation(graph, "green jacket", basis(0),
                           build_lexical(graph), params,
                           record_history=True)
    expected = max(h.get(node, 0.0) for h in state.history)
    assert state.peaks[node] == expected


def test_sparse_matches_dense_reference_small_sample(params):
    rng = np.random.default_rng(1234)
    for _ in range(25):
        graph, query = random_graph(rng, max_nodes=12)
        lexical = build_lexical(graph)
        state = run_activation(graph, "episode concept", query, lexical,
                               params, record_history=True)
        expected = dense_activation_reference(
            graph, params, query, state.anchors, params.steps)
        assert len(state.history) == len(expected)
        for got, want in zip(state.history, expected):
            for node_id in set(got) | set(want):
                assert got.get(node_id, 0.0) == \
                    pytest.approx(want.get(node_id, 0.0), abs=1e-9)
