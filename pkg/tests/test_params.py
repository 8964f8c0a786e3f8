import pytest

from cogmem.params import HyperParams


def test_defaults_validate():
    p = HyperParams()
    assert p.delta == 0.5
    assert p.spreading == 0.8
    assert p.rho == 0.01
    assert p.beta == 0.15
    assert p.inhibit_m == 7
    assert p.gamma == 5.0
    assert p.theta == 0.5
    assert p.steps == 3
    assert (p.lambda1, p.lambda2, p.lambda3) == (0.5, 0.3, 0.2)
    assert p.top_k == 30
    assert p.tau_dup == 0.92
    assert p.tau_gate == 0.12
    assert p.consolidation_n == 5
    assert p.prune_k == 15
    assert p.epsilon_dormant == 0.01
    assert p.dormancy_w == 10
    assert p.max_active_nodes == 10000
    assert p.embed_dim == 384


def test_lambda_sum_enforced():
    with pytest.raises(ValueError, match="sum to 1"):
        HyperParams(lambda1=0.5, lambda2=0.5, lambda3=0.5)


@pytest.mark.parametrize("field,value", [
    ("tau_gate", 1.5), ("tau_dup", -0.1), ("theta", 2.0),
    ("steps", 0), ("inhibit_m", 0), ("embed_dim", 4),
])
def test_out_of_range_rejected(field, value):
    with pytest.raises(ValueError):
        HyperParams(**{field: value})


def test_replace_revalidates():
    p = HyperParams()
    q = p.replace(tau_gate=0.0)
    assert q.tau_gate == 0.0 and p.tau_gate == 0.12
    with pytest.raises(ValueError):
        p.replace(steps=-1)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown parameter"):
        HyperParams.from_dict({"delta": 0.5, "bogus": 1})


def test_round_trip_through_dict():
    p = HyperParams(delta=0.3, top_k=7)
    assert HyperParams.from_dict(p.to_dict()) == p
