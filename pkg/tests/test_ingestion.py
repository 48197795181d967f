import json

import pytest

from gasconic.ingestion import (SchemaError, apply_stress, constant_profile,
                                expand_loads, load_demand_profile,
                                parse_network_json, write_network)
from gasconic.network import validate_network

MINIMAL = {
    "horizon": 1, "gamma1": 1.0, "gamma2": 1.0,
    "nodes": [
        {"id": "a", "kind": "source", "p_min": 1.0, "p_max": 5.0, "load": 3.0},
        {"id": "b", "kind": "sink", "p_min": 1.0, "p_max": 5.0, "load": -3.0},
    ],
    "pipes": [{"from": "a", "to": "b", "kind": "pipe", "w": 1.0,
               "f_min": -10.0, "f_max": 10.0}],
}


def test_parse_minimal():
    net = parse_network_json(json.dumps(MINIMAL))
    assert len(net.nodes) == 2 and len(net.pipes) == 1
    assert net.kappa_hat == 0.114


def test_missing_w_on_pipe():
    doc = json.loads(json.dumps(MINIMAL))
    del doc["pipes"][0]["w"]
    with pytest.raises(SchemaError) as err:
        parse_network_json(json.dumps(doc))
    assert "pipes[0]" in str(err.value)


def test_short_pipe_without_w():
    doc = json.loads(json.dumps(MINIMAL))
    doc["pipes"][0]["kind"] = "short"
    del doc["pipes"][0]["w"]
    net = parse_network_json(json.dumps(doc))
    assert net.pipes[0].w == 0.0


def test_duplicate_node_id():
    doc = json.loads(json.dumps(MINIMAL))
    doc["nodes"].append(dict(doc["nodes"][0]))
    with pytest.raises(SchemaError) as err:
        parse_network_json(json.dumps(doc))
    assert "'a'" in str(err.value)


def test_unknown_field_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["nodes"][0]["pressure"] = 3
    with pytest.raises(SchemaError):
        parse_network_json(json.dumps(doc))


def test_non_finite_number_rejected():
    text = json.dumps(MINIMAL).replace("10.0", "1e999")
    with pytest.raises(SchemaError):
        parse_network_json(text)


def test_syntax_error_position():
    with pytest.raises(SchemaError) as err:
        parse_network_json(b"{\n  broken")
    assert "line" in str(err.value)


def test_round_trip():
    net = parse_network_json(json.dumps(MINIMAL))
    again = parse_network_json(write_network(net))
    assert write_network(again) == write_network(net)


def test_profile_constant():
    prof = load_demand_profile("\n".join(["1.0"] * 24), 24)
    assert len(prof) == 24
    assert all(m == 1.0 for m in prof.multipliers)


def test_profile_mean_ok():
    prof = load_demand_profile("0.5, 1.5", 2)
    assert prof.multipliers == [0.5, 1.5]


def test_profile_rescaled_with_warning():
    with pytest.warns(UserWarning):
        prof = load_demand_profile("2.0\n2.0", 2)
    assert prof.multipliers == [1.0, 1.0]


def test_profile_wrong_count():
    with pytest.raises(ValueError):
        load_demand_profile("1.0\n1.0", 3)


def test_profile_negative():
    with pytest.raises(ValueError):
        load_demand_profile("-0.5\n2.5", 2)


def test_apply_stress():
    net = parse_network_json(json.dumps(MINIMAL))
    apply_stress(net, 0.5)
    assert net.nodes[0].load == 1.5 and net.nodes[1].load == -1.5
    apply_stress(net, 3.0, sinks_only=True)
    assert net.nodes[0].load == 1.5 and net.nodes[1].load == -4.5
    with pytest.raises(ValueError):
        apply_stress(net, -1.0)


def test_expand_loads():
    net = validate_network(parse_network_json(json.dumps(
        {**MINIMAL, "horizon": 2})))
    from gasconic.ingestion import DemandProfile

    table = expand_loads(net, DemandProfile([0.5, 1.5]))
    assert table("a", 1) == 1.5 and table("a", 2) == 4.5
    assert table("b", 2) == -4.5


def test_expand_loads_balance_property():
    net = validate_network(parse_network_json(json.dumps(
        {**MINIMAL, "horizon": 3})))
    apply_stress(net, 1.3)
    from gasconic.ingestion import DemandProfile

    prof = DemandProfile([0.7, 1.1, 1.2])
    table = expand_loads(net, prof)
    base_sum = sum(n.load for n in net.nodes)
    for t in (1, 2, 3):
        total = sum(table(n.id, t) for n in net.nodes)
        assert abs(total - prof.multipliers[t - 1] * base_sum) < 1e-12


def test_expand_mismatch():
    net = validate_network(parse_network_json(json.dumps(MINIMAL)))
    with pytest.raises(ValueError):
        expand_loads(net, constant_profile(5))
