import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasconic.network import (Compressor, GasNetwork, InfeasiblePipeError,
                              NetworkValidationError, Node, Pipe, PipeBox,
                              Store, Valve, adjacency, scale_loads,
                              squared_transform, tightened_pipe_box,
                              validate_network)


def two_node_net():
    return GasNetwork(
        nodes=[Node("a", "source", 1.0, 5.0, 3.0),
               Node("b", "sink", 1.0, 5.0, -3.0)],
        pipes=[Pipe("a", "b", "pipe", 1.0, -10.0, 10.0)],
        horizon=1)


def test_squared_transform_values():
    net = two_node_net()
    squared_transform(net)
    assert net.nodes[0].pi_min == 1.0
    assert net.nodes[0].pi_max == 25.0


def test_squared_transform_ratios():
    net = two_node_net()
    net.compressors.append(Compressor("a", "b", 1.1, 1.6, -5, 5, 1.0, 1.0, 1.0))
    net.valves.append(Valve("a", "b", "regular", 1.0, 1.0, -5, 5))
    squared_transform(net)
    assert math.isclose(net.compressors[0].r_min, 1.21)
    assert math.isclose(net.compressors[0].r_max, 2.56)
    assert net.valves[0].r_min == net.valves[0].r_max == 1.0


def test_squared_transform_idempotent():
    net = two_node_net()
    squared_transform(net)
    first = (net.nodes[0].pi_min, net.nodes[0].pi_max)
    squared_transform(net)
    assert (net.nodes[0].pi_min, net.nodes[0].pi_max) == first


def test_squared_transform_rejects_nonpositive_pressure():
    net = two_node_net()
    net.nodes[0].p_min = 0.0
    with pytest.raises(NetworkValidationError) as err:
        squared_transform(net)
    assert "a" in str(err.value)


def test_tightened_box_symmetric():
    pipe = Pipe("a", "b", "pipe", 1.0, -10.0, 10.0)
    box = tightened_pipe_box(pipe, 1.0, 25.0, 1.0, 25.0)
    root24 = math.sqrt(24.0)
    assert math.isclose(box.alpha_lo, -root24)
    assert math.isclose(box.alpha_hi, root24)
    assert box.beta_lo == -24.0 and box.beta_hi == 24.0
    assert box.one_sided == "none"


def test_tightened_box_positive_flow():
    pipe = Pipe("a", "b", "pipe", 1.0, 0.0, 2.0)
    box = tightened_pipe_box(pipe, 1.0, 25.0, 1.0, 25.0)
    assert box.alpha_lo == 0.0 and box.alpha_hi == 2.0
    assert box.beta_lo == 0.0 and box.beta_hi == 4.0
    assert box.one_sided == "positive"


def test_tightened_box_zero_flow():
    pipe = Pipe("a", "b", "pipe", 1.0, 0.0, 0.0)
    box = tightened_pipe_box(pipe, 1.0, 25.0, 1.0, 25.0)
    assert box.alpha_lo == box.alpha_hi == 0.0
    assert box.beta_lo == box.beta_hi == 0.0


def test_tightened_box_incompatible():
    pipe = Pipe("a", "b", "pipe", 1.0, 5.0, 10.0)
    # potentials force a drop of at most 1, flow lower bound needs 25
    with pytest.raises(InfeasiblePipeError):
        tightened_pipe_box(pipe, 4.0, 5.0, 4.0, 5.0)


@given(
    f_lo=st.floats(-20, 0), f_span=st.floats(0.1, 30),
    pi_i_lo=st.floats(0.5, 10), pi_i_span=st.floats(0.5, 40),
    pi_j_lo=st.floats(0.5, 10), pi_j_span=st.floats(0.5, 40),
    w=st.floats(0.01, 3.0), grow=st.floats(0.0, 5.0))
@settings(max_examples=120, deadline=None)
def test_tightened_box_monotone(f_lo, f_span, pi_i_lo, pi_i_span, pi_j_lo,
                                pi_j_span, w, grow):
    pipe = Pipe("a", "b", "pipe", w, f_lo, f_lo + f_span)
    try:
        box = tightened_pipe_box(pipe, pi_i_lo, pi_i_lo + pi_i_span,
                                 pi_j_lo, pi_j_lo + pi_j_span)
    except InfeasiblePipeError:
        return
    bigger = Pipe("a", "b", "pipe", w, f_lo - grow, f_lo + f_span + grow)
    box2 = tightened_pipe_box(bigger, pi_i_lo, pi_i_lo + pi_i_span + grow,
                              pi_j_lo, pi_j_lo + pi_j_span + grow)
    assert box2.alpha_lo <= box.alpha_lo + 1e-12
    assert box2.alpha_hi >= box.alpha_hi - 1e-12
    assert box2.beta_lo <= box.beta_lo + 1e-12
    assert box2.beta_hi >= box.beta_hi - 1e-12


def test_zero_flow_point_inside_box():
    pipe = Pipe("a", "b", "pipe", 0.7, -4.0, 6.0)
    box = tightened_pipe_box(pipe, 2.0, 9.0, 3.0, 12.0)
    lo = max(box.pi_i_lo, box.pi_j_lo)
    hi = min(box.pi_i_hi, box.pi_j_hi)
    assert lo <= hi
    for c in (lo, (lo + hi) / 2, hi):
        assert box.alpha_lo <= 0.0 <= box.alpha_hi
        assert box.beta_lo <= 0.0 <= box.beta_hi
        assert box.pi_i_lo <= c <= box.pi_i_hi
        assert box.pi_j_lo <= c <= box.pi_j_hi


def test_adjacency_single_pipe():
    net = validate_network(two_node_net())
    out_n, in_n, out_c, in_c, stores = adjacency(net, "a")
    assert out_n == ["b"] and in_n == [] and out_c == [] and in_c == []
    assert stores == []


def test_adjacency_compressor_and_store():
    net = two_node_net()
    net.pipes = []
    net.compressors = [Compressor("a", "b", 1.1, 1.6, -5, 5, 1.0, 1.0, 1.0)]
    net.stores = [Store("b", 0.0, 5.0, 1.0, 0.9, 1.1, 2.0)]
    net = validate_network(net)
    out_n, in_n, out_c, in_c, stores = adjacency(net, "b")
    assert in_n == ["a"] and in_c == ["a"]
    assert len(stores) == 1


def test_adjacency_unknown_node():
    net = validate_network(two_node_net())
    with pytest.raises(KeyError):
        adjacency(net, "zz")


def test_validate_collects_all_errors():
    net = GasNetwork(
        nodes=[Node("a", "inner", 1.0, 5.0, 3.0),   # inner load nonzero
               Node("b", "sink", 1.0, 5.0, -3.0)],
        pipes=[Pipe("a", "b", "pipe", 1.0, -10.0, 10.0)],
        compressors=[Compressor("a", "b", 0.9, 1.6, -5, 5, 1.0, 1.0, 1.0)],
        horizon=1)
    with pytest.raises(NetworkValidationError) as err:
        validate_network(net)
    messages = [m for _, m in err.value.violations]
    assert any("inner load nonzero" in m for m in messages)
    assert any("ratio_min" in m for m in messages)
    assert len(err.value.violations) >= 2


def test_validate_well_formed():
    net = validate_network(two_node_net())
    assert net.pipe_boxes


def test_scale_loads():
    net = two_node_net()
    scale_loads(net, 0.5)
    assert net.nodes[0].load == 1.5
    assert net.nodes[1].load == -1.5
    with pytest.raises(ValueError):
        scale_loads(net, 0.0)
