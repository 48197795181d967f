"""Assemble the multi-period MINLP and its three conic relaxations.

`build_minlp` lays down everything linear (variables, balance, storage,
switching, short pipes, the linearized objective) plus a symbolic record
of the nonconvex families. `build_relaxation` copies that base and
replaces each nonconvex family with the chosen conic encoding: the exact
pipe hull (R1), the McCormick+cone set (R2) or four hyperplanes (R3),
always combined with the 11-disjunct compressor block and valve big-M
rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .compressor import (HYPO_EXP, emit_compressor_outer_block,
                         emit_valve_block)
from .conic import ConicProgram
from .ingestion import LoadTable
from .network import Compressor, GasNetwork, Pipe, Valve
from .weymouth import (build_pipe_hull, emit_hull_block_r1,
                       emit_one_sided_blocks, emit_poly_oa_block_r3,
                       emit_socr_oa_block_r2)

RELAXATIONS = ("r1", "r2", "r3")
OBJECTIVES = ("g1", "g2", "g3")


@dataclass
class MinlpData:
    network: GasNetwork
    loads: LoadTable
    objective: str
    prog: ConicProgram = None          # linear families + objective
    pi: dict = field(default_factory=dict)       # (node, t) -> var
    flow: dict = field(default_factory=dict)     # (edge key, t) -> var
    loss: dict = field(default_factory=dict)     # (comp key, t) -> var
    switch: dict = field(default_factory=dict)   # (active key, t) -> var
    switch_pos: dict = field(default_factory=dict)
    switch_neg: dict = field(default_factory=dict)
    startup: dict = field(default_factory=dict)
    shutdown: dict = field(default_factory=dict)
    level: dict = field(default_factory=dict)    # (store key, t) -> var
    inject: dict = field(default_factory=dict)
    withdraw: dict = field(default_factory=dict)
    hulls: dict = field(default_factory=dict)    # pipe key -> PipeHull
    pipe_families: list = field(default_factory=list)   # (pipe, t, kind)
    comp_families: list = field(default_factory=list)
    valve_families: list = field(default_factory=list)

    @property
    def horizon(self):
        return self.network.horizon


def _loss_bound(comp: Compressor):
    r_hi = comp.a_max ** 2
    factor = comp.h * (r_hi ** HYPO_EXP - 1.0)
    return factor * comp.f_min, factor * comp.f_max


def _split_abs(prog, expr, lo, hi, cost, name):
    """Add d = expr with |d| costed in the objective; returns (d, d+, d-)."""
    d = prog.add_var(name, lo, hi)
    prog.add_linear(prog.x(d) - expr, "==", 0.0, f"{name}:def")
    plus, minus = prog.linearize_abs(d, cost, label=name)
    return d, plus, minus


def install_objective(prog, data: MinlpData, kind):
    """Attach the linearized objective of the requested kind."""
    if kind not in OBJECTIVES:
        raise ValueError(f"unknown objective {kind!r}")
    net = data.network
    T = net.horizon
    X = prog.x
    if kind in ("g1", "g3"):
        for ckey, comp in _edges(net, Compressor):
            for t in range(1, T + 1):
                prog.linearize_abs(data.loss[(ckey, t)], comp.fuel_cost,
                                   label=f"absl[{ckey},{t}]")
    if kind == "g1":
        for ckey, comp in _edges(net, Compressor):
            for t in range(1, T + 1):
                prog.add_objective(comp.startup_cost * X(data.startup[(ckey, t)]))
        for skey, store in _stores(net):
            for t in range(1, T + 1):
                prog.add_objective(store.withdrawal_cost * X(data.withdraw[(skey, t)]))
    if kind == "g2":
        g1w, g2w = net.gamma1, net.gamma2
        for ckey, comp in _edges(net, Compressor):
            ni = net.node_by_id(comp.from_node)
            nj = net.node_by_id(comp.to_node)
            span = (ni.pi_max - ni.pi_min) + (nj.pi_max - nj.pi_min)
            for t in range(1, T + 1):
                diff = X(data.pi[(comp.from_node, t)]) - X(data.pi[(comp.to_node, t)])
                _split_abs(prog, diff, ni.pi_min - nj.pi_max,
                           ni.pi_max - nj.pi_min, g1w, f"g2a[{ckey},{t}]")
                if t >= 2:
                    prev = X(data.pi[(comp.from_node, t - 1)]) \
                        - X(data.pi[(comp.to_node, t - 1)])
                    _split_abs(prog, diff - prev, -span, span, g2w,
                               f"g2b[{ckey},{t}]")


def _edges(net, cls):
    if cls is Pipe:
        return [((("P", i)), e) for i, e in enumerate(net.pipes)]
    if cls is Compressor:
        return [((("C", i)), e) for i, e in enumerate(net.compressors)]
    if cls is Valve:
        return [((("V", i)), e) for i, e in enumerate(net.valves)]
    raise TypeError(cls)


def _stores(net):
    return [((("S", i)), s) for i, s in enumerate(net.stores)]


def edge_lookup(net: GasNetwork):
    """Key -> edge object for every edge and store."""
    table = {}
    for key, e in _edges(net, Pipe) + _edges(net, Compressor) + _edges(net, Valve):
        table[key] = e
    for key, s in _stores(net):
        table[key] = s
    return table


def build_minlp(network: GasNetwork, loads: LoadTable, objective="g3") -> MinlpData:
    """Declare all variables and the linear constraint families."""
    if loads.horizon != network.horizon:
        raise ValueError("load table horizon mismatch")
    net = network
    T = net.horizon
    data = MinlpData(network=net, loads=loads, objective=objective)
    prog = ConicProgram(f"minlp:{objective}")
    data.prog = prog
    X = prog.x

    for node in net.nodes:
        for t in range(1, T + 1):
            data.pi[(node.id, t)] = prog.add_var(
                f"pi[{node.id},{t}]", node.pi_min, node.pi_max)
    for key, pipe in _edges(net, Pipe):
        if pipe.kind == "short":
            lo, hi = pipe.f_min, pipe.f_max
        else:
            box = net.pipe_boxes[pipe.key]
            lo, hi = box.alpha_lo, box.alpha_hi
        for t in range(1, T + 1):
            data.flow[(key, t)] = prog.add_var(f"f[{key},{t}]", lo, hi)
    for key, comp in _edges(net, Compressor):
        l_lo, l_hi = _loss_bound(comp)
        for t in range(1, T + 1):
            data.flow[(key, t)] = prog.add_var(f"f[{key},{t}]",
                                               comp.f_min, comp.f_max)
            data.loss[(key, t)] = prog.add_var(f"l[{key},{t}]", l_lo, l_hi)
            data.switch[(key, t)] = prog.add_var(f"x[{key},{t}]", binary=True)
            data.switch_pos[(key, t)] = prog.add_var(f"x+[{key},{t}]", binary=True)
            data.switch_neg[(key, t)] = prog.add_var(f"x-[{key},{t}]", binary=True)
            data.startup[(key, t)] = prog.add_var(f"u[{key},{t}]", binary=True)
            data.shutdown[(key, t)] = prog.add_var(f"v[{key},{t}]", binary=True)
    for key, valve in _edges(net, Valve):
        for t in range(1, T + 1):
            data.flow[(key, t)] = prog.add_var(f"f[{key},{t}]",
                                               valve.f_min, valve.f_max)
            data.switch[(key, t)] = prog.add_var(f"x[{key},{t}]", binary=True)
            data.switch_pos[(key, t)] = prog.add_var(f"x+[{key},{t}]", binary=True)
            data.switch_neg[(key, t)] = prog.add_var(f"x-[{key},{t}]", binary=True)
    for key, store in _stores(net):
        cap_in = (store.s_max - store.s_min) / store.eta_in
        cap_out = (store.s_max - store.s_min) / store.eta_out
        for t in range(1, T + 1):
            data.level[(key, t)] = prog.add_var(f"s[{key},{t}]",
                                                store.s_min, store.s_max)
            data.inject[(key, t)] = prog.add_var(f"s+[{key},{t}]", 0.0, cap_in)
            data.withdraw[(key, t)] = prog.add_var(f"s-[{key},{t}]", 0.0, cap_out)

    # flow balance: supply = store net draw + outflow - inflow
    # + incoming-compressor losses - outgoing-compressor losses
    all_edges = _edges(net, Pipe) + _edges(net, Compressor) + _edges(net, Valve)
    for node in net.nodes:
        for t in range(1, T + 1):
            expr = None
            for key, edge in all_edges:
                term = None
                if edge.from_node == node.id:
                    term = X(data.flow[(key, t)])
                    if isinstance(edge, Compressor):
                        term = term - X(data.loss[(key, t)])
                elif edge.to_node == node.id:
                    term = -1.0 * X(data.flow[(key, t)])
                    if isinstance(edge, Compressor):
                        term = term + X(data.loss[(key, t)])
                if term is not None:
                    expr = term if expr is None else expr + term
            for key, store in _stores(net):
                if store.node == node.id:
                    term = X(data.inject[(key, t)]) - X(data.withdraw[(key, t)])
                    expr = term if expr is None else expr + term
            if expr is None:
                expr = 0.0 * X(data.pi[(node.id, t)])
            prog.add_linear(expr, "==", loads(node.id, t), f"bal[{node.id},{t}]")

    # storage recursion and cyclic end level
    for key, store in _stores(net):
        for t in range(1, T + 1):
            prev = store.s_init if t == 1 else None
            expr = X(data.level[(key, t)]) \
                - store.eta_in * X(data.inject[(key, t)]) \
                + store.eta_out * X(data.withdraw[(key, t)])
            if t == 1:
                prog.add_linear(expr, "==", store.s_init, f"store[{key},{t}]")
            else:
                prog.add_linear(expr - X(data.level[(key, t - 1)]), "==", 0.0,
                                f"store[{key},{t}]")
        prog.add_linear(X(data.level[(key, T)]), "==", store.s_init,
                        f"storeend[{key}]")

    # switching: min-up/down with the initial state off
    active = _edges(net, Compressor) + _edges(net, Valve)
    for key, elem in active:
        for t in range(1, T + 1):
            x_now = X(data.switch[(key, t)])
            x_prev = X(data.switch[(key, t - 1)]) if t > 1 else 0.0 * x_now
            for tp in range(t + 1, min(t + elem.min_up - 1, T) + 1):
                prog.add_linear(x_now - x_prev - X(data.switch[(key, tp)]),
                                "<=", 0.0, f"minup[{key},{t},{tp}]")
            for tp in range(t + 1, min(t + elem.min_down - 1, T) + 1):
                prog.add_linear(x_prev - x_now + X(data.switch[(key, tp)]),
                                "<=", 1.0, f"mindown[{key},{t},{tp}]")
            if isinstance(elem, Compressor):
                expr = x_now - x_prev - X(data.startup[(key, t)]) \
                    + X(data.shutdown[(key, t)])
                prog.add_linear(expr, "==", 0.0, f"updown[{key},{t}]")
                prog.add_linear(X(data.startup[(key, t)])
                                + X(data.shutdown[(key, t)]), "<=", 1.0,
                                f"uv[{key},{t}]")

    # short pipes: no pressure loss
    for key, pipe in _edges(net, Pipe):
        if pipe.kind != "short":
            continue
        for t in range(1, T + 1):
            prog.add_linear(X(data.pi[(pipe.from_node, t)])
                            - X(data.pi[(pipe.to_node, t)]), "==", 0.0,
                            f"short[{key},{t}]")

    # nonconvex families, recorded for the relaxations and the oracle
    for key, pipe in _edges(net, Pipe):
        if pipe.kind == "short":
            continue
        box = net.pipe_boxes[pipe.key]
        data.hulls[key] = None  # built lazily per relaxation need
        for t in range(1, T + 1):
            data.pipe_families.append((key, t, box.one_sided))
    for key, comp in _edges(net, Compressor):
        for t in range(1, T + 1):
            data.comp_families.append((key, t))
    for key, valve in _edges(net, Valve):
        for t in range(1, T + 1):
            data.valve_families.append((key, t))

    install_objective(prog, data, objective)
    return data


def _pipe_hull(data: MinlpData, key):
    if data.hulls.get(key) is None:
        table = edge_lookup(data.network)
        pipe = table[key]
        box = data.network.pipe_boxes[pipe.key]
        data.hulls[key] = build_pipe_hull(box, pipe.w)
    return data.hulls[key]


def build_relaxation(data: MinlpData, kind) -> ConicProgram:
    """Conic relaxation of the MINLP: R1 exact hull, R2 SOCr OA, R3 polyhedral."""
    kind = kind.lower()
    if kind not in RELAXATIONS:
        raise ValueError(f"unknown relaxation kind {kind!r}")
    net = data.network
    prog = data.prog.copy()
    prog.name = f"{data.prog.name}:{kind}"
    table = edge_lookup(net)
    X = prog.x
    direction = {}

    for key, t, sided in data.pipe_families:
        pipe = table[key]
        box = net.pipe_boxes[pipe.key]
        f = data.flow[(key, t)]
        pi_i = data.pi[(pipe.from_node, t)]
        pi_j = data.pi[(pipe.to_node, t)]
        tag = f"{kind}[{key},{t}]"
        if sided != "none":
            hull = _pipe_hull(data, key) if kind in ("r1", "r2") else None
            if kind in ("r1", "r2"):
                emit_one_sided_blocks(prog, f, pi_i, pi_j, hull, "socr", tag)
            else:
                hull_poly = _pipe_hull(data, key)
                emit_one_sided_blocks(prog, f, pi_i, pi_j, hull_poly, "poly", tag)
            continue
        if kind == "r3":
            emit_poly_oa_block_r3(prog, f, pi_i, pi_j, box, pipe.w, tag)
            continue
        z = prog.add_var(f"z[{key},{t}]", binary=True)
        direction[(key, t)] = z
        if kind == "r1":
            emit_hull_block_r1(prog, f, pi_i, pi_j, z, _pipe_hull(data, key), tag)
        else:
            emit_socr_oa_block_r2(prog, f, pi_i, pi_j, z, box, pipe.w, tag)

    for key, t in data.comp_families:
        comp = table[key]
        ni = net.node_by_id(comp.from_node)
        nj = net.node_by_id(comp.to_node)
        emit_compressor_outer_block(
            prog, comp,
            data.pi[(comp.from_node, t)], data.pi[(comp.to_node, t)],
            data.flow[(key, t)], data.loss[(key, t)],
            data.switch[(key, t)], data.switch_pos[(key, t)],
            data.switch_neg[(key, t)],
            (ni.pi_min, ni.pi_max, nj.pi_min, nj.pi_max),
            key=f"Y[{key},{t}]")

    for key, t in data.valve_families:
        valve = table[key]
        ni = net.node_by_id(valve.from_node)
        nj = net.node_by_id(valve.to_node)
        emit_valve_block(
            prog, valve,
            data.pi[(valve.from_node, t)], data.pi[(valve.to_node, t)],
            data.flow[(key, t)],
            data.switch[(key, t)], data.switch_pos[(key, t)],
            data.switch_neg[(key, t)],
            (ni.pi_min, ni.pi_max, nj.pi_min, nj.pi_max),
            key=f"valve[{key},{t}]")
    prog.direction_vars = direction
    return prog
