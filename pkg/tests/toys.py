"""Toy networks shared by the unit and acceptance tests.

Compressor potential bounds deliberately satisfy pi_j_lo < r_lo*pi_i_lo
and pi_j_hi > r_hi*pi_i_hi so the W-type disjuncts of the compressor
block are empty: the remaining V-type bands are exact on their secant
side and the relaxation closes the gap at integral points.
"""

import numpy as np

from gasconic.ingestion import DemandProfile, constant_profile, expand_loads
from gasconic.network import (Compressor, GasNetwork, Node, Pipe, Store,
                              Valve, validate_network)


def toy_pipe_compressor(horizon=1):
    """source - pipe - compressor - sink."""
    net = GasNetwork(
        nodes=[Node("S", "source", 2.0, 3.5, 5.0),
               Node("M", "inner", 2.0, 3.0, 0.0),
               Node("T", "sink", 2.0, 5.0, -5.0)],
        pipes=[Pipe("S", "M", "pipe", 0.05, -10.0, 10.0)],
        compressors=[Compressor("M", "T", a_min=1.1, a_max=1.5, f_min=-8.0,
                                f_max=8.0, h=0.9, fuel_cost=2.0,
                                startup_cost=5.0, min_up=1, min_down=1)],
        horizon=horizon, gamma1=1.0, gamma2=0.5)
    return validate_network(net)


def toy_store(horizon=2):
    """pipe + compressor + a store at the middle node."""
    net = toy_pipe_compressor(horizon)
    net.stores.append(Store("M", s_min=0.0, s_max=10.0, s_init=5.0,
                            eta_in=0.9, eta_out=1.1, withdrawal_cost=3.0))
    net.compressors[0].min_up = 2
    return validate_network(net)


def toy_chain(horizon=2):
    """Two one-sided pipes around a compressor (known flow direction)."""
    net = GasNetwork(
        nodes=[Node("S", "source", 2.2, 3.6, 6.0),
               Node("A", "inner", 2.0, 3.2, 0.0),
               Node("B", "inner", 2.0, 5.3, 0.0),
               Node("T", "sink", 2.0, 5.2, -6.0)],
        pipes=[Pipe("S", "A", "pipe", 0.04, 0.0, 12.0),
               Pipe("B", "T", "pipe", 0.03, 0.0, 12.0)],
        compressors=[Compressor("A", "B", a_min=1.15, a_max=1.6, f_min=-9.0,
                                f_max=9.0, h=0.7, fuel_cost=1.5,
                                startup_cost=4.0, min_up=1, min_down=1)],
        horizon=horizon, gamma1=1.0, gamma2=0.5)
    return validate_network(net)


def toy_loop(horizon=1):
    """Parallel pipes form a cycle ahead of the compressor."""
    net = GasNetwork(
        nodes=[Node("S", "source", 2.0, 3.5, 6.0),
               Node("A", "inner", 2.0, 3.0, 0.0),
               Node("T", "sink", 2.0, 5.0, -6.0)],
        pipes=[Pipe("S", "A", "pipe", 0.05, -12.0, 12.0),
               Pipe("S", "A", "pipe", 0.08, -12.0, 12.0)],
        compressors=[Compressor("A", "T", a_min=1.1, a_max=1.5, f_min=-9.0,
                                f_max=9.0, h=0.9, fuel_cost=2.0,
                                startup_cost=5.0, min_up=1, min_down=1)],
        horizon=horizon, gamma1=1.0, gamma2=0.5)
    return validate_network(net)


def toy_valve(horizon=2):
    """Compressor path plus a regular-valve bypass."""
    net = GasNetwork(
        nodes=[Node("S", "source", 2.0, 4.0, 5.0),
               Node("M", "inner", 2.0, 3.0, 0.0),
               Node("T", "sink", 2.0, 5.0, -5.0)],
        pipes=[Pipe("S", "M", "pipe", 0.05, -10.0, 10.0)],
        compressors=[Compressor("M", "T", a_min=1.1, a_max=1.5, f_min=-8.0,
                                f_max=8.0, h=0.9, fuel_cost=2.0,
                                startup_cost=5.0, min_up=2, min_down=2)],
        valves=[Valve("S", "T", "regular", 1.0, 1.0, -10.0, 10.0, 1, 1)],
        horizon=horizon, gamma1=1.0, gamma2=0.5)
    return validate_network(net)


def toy_passive(horizon=1):
    """Balanced passive network: two pipes, no active elements."""
    net = GasNetwork(
        nodes=[Node("S", "source", 2.0, 4.0, 4.0),
               Node("M", "inner", 1.8, 3.8, 0.0),
               Node("T", "sink", 1.5, 3.6, -4.0)],
        pipes=[Pipe("S", "M", "pipe", 0.05, -10.0, 10.0),
               Pipe("M", "T", "pipe", 0.04, -10.0, 10.0)],
        horizon=horizon, gamma1=1.0, gamma2=0.5)
    return validate_network(net)


ALGORITHM1_TOYS = [
    ("pipe_compressor", toy_pipe_compressor, 1, None),
    ("store", toy_store, 2, [0.8, 1.2]),
    ("chain", toy_chain, 2, [0.9, 1.1]),
    ("loop", toy_loop, 1, None),
    ("valve", toy_valve, 2, [1.1, 0.9]),
]


def toy_loads(net, multipliers=None):
    if multipliers is None:
        profile = constant_profile(net.horizon)
    else:
        profile = DemandProfile(multipliers)
    return expand_loads(net, profile)


def random_network(rng, horizon=None):
    """Small random instance for dominance tests; always feasible by
    construction (loads sized well under capacities)."""
    horizon = horizon or int(rng.integers(1, 3))
    demand = float(rng.uniform(2.0, 6.0))
    w1 = float(rng.uniform(0.02, 0.08))
    nodes = [Node("S", "source", 2.0, float(rng.uniform(3.2, 4.0)), demand),
             Node("M", "inner", 2.0, 3.0, 0.0),
             Node("T", "sink", 2.0, 5.0, -demand)]
    pipes = [Pipe("S", "M", "pipe", w1, -15.0, 15.0)]
    comps = [Compressor("M", "T", a_min=1.1, a_max=float(rng.uniform(1.4, 1.6)),
                        f_min=-12.0, f_max=12.0, h=float(rng.uniform(0.5, 1.0)),
                        fuel_cost=2.0, startup_cost=5.0, min_up=1, min_down=1)]
    valves = []
    if rng.random() < 0.4:
        valves.append(Valve("S", "T", "regular", 1.0, 1.0, -10.0, 10.0, 1, 1))
    net = GasNetwork(nodes=nodes, pipes=pipes, compressors=comps, valves=valves,
                     horizon=horizon, gamma1=1.0, gamma2=0.5)
    return validate_network(net)
