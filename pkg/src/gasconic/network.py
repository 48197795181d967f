"""Gas network domain model: nodes, edges, stores and derived quantities.

All pressures enter squared ("potentials"); every element carries its
squared ratio bounds after :func:`squared_transform`. Networks are plain
immutable-ish dataclasses; validation collects every violation instead of
failing fast so broken instance files can be fixed in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


class NetworkValidationError(ValueError):
    """Raised when an instance violates the network invariants.

    Carries the full list of (entity id, message) pairs.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{eid}: {msg}" for eid, msg in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {lines}")


class InfeasiblePipeError(ValueError):
    """Tightened flow/potential-drop bounds of a pipe are incompatible."""


@dataclass
class Node:
    id: str
    kind: str  # source | inner | sink
    p_min: float
    p_max: float
    load: float = 0.0
    # derived by squared_transform
    pi_min: float | None = None
    pi_max: float | None = None


@dataclass
class Pipe:
    from_node: str
    to_node: str
    kind: str = "pipe"  # pipe | resistor | short
    w: float = 0.0
    f_min: float = 0.0
    f_max: float = 0.0

    @property
    def key(self):
        return (self.from_node, self.to_node, "P")


@dataclass
class Compressor:
    from_node: str
    to_node: str
    a_min: float
    a_max: float
    f_min: float
    f_max: float
    h: float
    fuel_cost: float
    startup_cost: float
    min_up: int = 1
    min_down: int = 1
    # derived squared ratio bounds
    r_min: float | None = None
    r_max: float | None = None

    @property
    def key(self):
        return (self.from_node, self.to_node, "C")


@dataclass
class Valve:
    from_node: str
    to_node: str
    kind: str = "regular"  # control | regular
    a_min: float = 1.0
    a_max: float = 1.0
    f_min: float = 0.0
    f_max: float = 0.0
    min_up: int = 1
    min_down: int = 1
    r_min: float | None = None
    r_max: float | None = None

    @property
    def key(self):
        return (self.from_node, self.to_node, "V")


@dataclass
class Store:
    node: str
    s_min: float
    s_max: float
    s_init: float
    eta_in: float
    eta_out: float
    withdrawal_cost: float

    @property
    def key(self):
        return (self.node, "S")


@dataclass
class PipeBox:
    """Tightened per-pipe bounds on flow and potential difference."""

    alpha_lo: float
    alpha_hi: float
    beta_lo: float
    beta_hi: float
    pi_i_lo: float
    pi_i_hi: float
    pi_j_lo: float
    pi_j_hi: float

    @property
    def one_sided(self) -> str:
        if self.alpha_lo >= 0.0 and self.beta_lo >= 0.0:
            return "positive"
        if self.alpha_hi <= 0.0 and self.beta_hi <= 0.0:
            return "negative"
        return "none"


@dataclass
class GasNetwork:
    nodes: list[Node] = field(default_factory=list)
    pipes: list[Pipe] = field(default_factory=list)
    compressors: list[Compressor] = field(default_factory=list)
    valves: list[Valve] = field(default_factory=list)
    stores: list[Store] = field(default_factory=list)
    horizon: int = 1
    gamma1: float = 1.0
    gamma2: float = 1.0
    kappa_hat: float = 0.114
    pipe_boxes: dict = field(default_factory=dict)

    def node_by_id(self, nid: str) -> Node:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(f"unknown node id {nid!r}")

    @property
    def active_elements(self):
        return list(self.compressors) + list(self.valves)

    @property
    def edges(self):
        return list(self.pipes) + list(self.compressors) + list(self.valves)


def squared_transform(network: GasNetwork) -> GasNetwork:
    """Annotate the network with squared pressure and ratio bounds.

    Idempotent on already-annotated data: the derived fields are
    recomputed from the raw bounds each time.
    """
    for node in network.nodes:
        if not (node.p_min > 0.0):
            raise NetworkValidationError(
                [(node.id, f"non-positive pressure bound p_min={node.p_min}")])
        if not (node.p_max > 0.0):
            raise NetworkValidationError(
                [(node.id, f"non-positive pressure bound p_max={node.p_max}")])
        node.pi_min = node.p_min ** 2
        node.pi_max = node.p_max ** 2
    for elem in network.active_elements:
        elem.r_min = elem.a_min ** 2
        elem.r_max = elem.a_max ** 2
    return network


def tightened_pipe_box(pipe: Pipe, pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi) -> PipeBox:
    """Intersect raw flow bounds with the bounds implied by the potentials.

    Requires w > 0; short pipes never reach the quadratic machinery.
    """
    w = pipe.w
    if not (w > 0.0):
        raise ValueError("tightened_pipe_box requires w > 0 (short pipes bypass it)")
    a_lo = max(pipe.f_min, -math.sqrt(max(pi_j_hi - pi_i_lo, 0.0) / w))
    a_hi = min(pipe.f_max, math.sqrt(max(pi_i_hi - pi_j_lo, 0.0) / w))
    b_lo = max(-w * pipe.f_min ** 2, pi_i_lo - pi_j_hi)
    b_hi = min(w * pipe.f_max ** 2, pi_i_hi - pi_j_lo)
    tol = 1e-9 * max(1.0, abs(a_lo), abs(a_hi), abs(b_lo), abs(b_hi))
    if a_hi < a_lo - tol or b_hi < b_lo - tol:
        raise InfeasiblePipeError(
            f"pipe {pipe.from_node}->{pipe.to_node}: incompatible bounds "
            f"alpha=[{a_lo}, {a_hi}], beta=[{b_lo}, {b_hi}]")
    a_lo, a_hi = min(a_lo, a_hi), max(a_lo, a_hi)
    b_lo, b_hi = min(b_lo, b_hi), max(b_lo, b_hi)
    return PipeBox(a_lo, a_hi, b_lo, b_hi, pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi)


def adjacency(network: GasNetwork, node_id: str):
    """Neighbor sets used by the flow-balance row of one node.

    Returns (out_neighbors, in_neighbors, out_compressors, in_compressors,
    stores), where the first two cover every edge kind.
    """
    network.node_by_id(node_id)  # raises on unknown id
    d_out, d_in, dc_out, dc_in = [], [], [], []
    for edge in network.edges:
        if edge.from_node == node_id:
            d_out.append(edge.to_node)
            if isinstance(edge, Compressor):
                dc_out.append(edge.to_node)
        if edge.to_node == node_id:
            d_in.append(edge.from_node)
            if isinstance(edge, Compressor):
                dc_in.append(edge.from_node)
    stores = [s for s in network.stores if s.node == node_id]
    return d_out, d_in, dc_out, dc_in, stores


def _check_node(node: Node, out):
    if node.kind not in ("source", "inner", "sink"):
        out.append((node.id, f"unknown node kind {node.kind!r}"))
        return
    if not (node.p_min > 0.0):
        out.append((node.id, "pressure lower bound must be positive"))
    if node.p_max < node.p_min:
        out.append((node.id, "p_max < p_min"))
    if node.kind == "inner" and node.load != 0.0:
        out.append((node.id, "inner load nonzero"))
    if node.kind == "source" and node.load < 0.0:
        out.append((node.id, "source load negative"))
    if node.kind == "sink" and node.load > 0.0:
        out.append((node.id, "sink load positive"))


def _check_pipe(pipe: Pipe, idx, out):
    eid = f"pipe[{idx}] {pipe.from_node}->{pipe.to_node}"
    if pipe.kind not in ("pipe", "resistor", "short"):
        out.append((eid, f"unknown pipe kind {pipe.kind!r}"))
    elif pipe.kind == "short":
        if pipe.w != 0.0:
            out.append((eid, "short pipe must have w = 0"))
    elif not (pipe.w > 0.0):
        out.append((eid, f"{pipe.kind} must have w > 0"))
    if pipe.f_max < pipe.f_min:
        out.append((eid, "f_max < f_min"))


def _check_compressor(comp: Compressor, idx, out):
    eid = f"compressor[{idx}] {comp.from_node}->{comp.to_node}"
    if not (comp.a_min > 1.0):
        out.append((eid, "compressor ratio_min <= 1"))
    if not (comp.a_max > comp.a_min):
        out.append((eid, "compressor ratio_max <= ratio_min"))
    if not (comp.f_min < 0.0 < comp.f_max):
        out.append((eid, "compressor flow bounds must straddle 0"))
    if not (comp.h > 0.0):
        out.append((eid, "loss coefficient H must be positive"))
    for name in ("fuel_cost", "startup_cost"):
        if not (getattr(comp, name) > 0.0):
            out.append((eid, f"{name} must be positive"))
    for name in ("min_up", "min_down"):
        if getattr(comp, name) < 1:
            out.append((eid, f"{name} must be >= 1"))


def _check_valve(valve: Valve, idx, out):
    eid = f"valve[{idx}] {valve.from_node}->{valve.to_node}"
    if valve.kind == "regular":
        if valve.a_min != 1.0 or valve.a_max != 1.0:
            out.append((eid, "regular valve must have a_min = a_max = 1"))
    elif valve.kind == "control":
        if not (0.0 < valve.a_min < valve.a_max <= 1.0):
            out.append((eid, "control valve requires 0 < a_min < a_max <= 1"))
    else:
        out.append((eid, f"unknown valve kind {valve.kind!r}"))
    if valve.f_max < valve.f_min:
        out.append((eid, "f_max < f_min"))
    for name in ("min_up", "min_down"):
        if getattr(valve, name) < 1:
            out.append((eid, f"{name} must be >= 1"))


def _check_store(store: Store, idx, node_ids, out):
    eid = f"store[{idx}] @{store.node}"
    if store.node not in node_ids:
        out.append((eid, f"unknown node id {store.node!r}"))
    if not (store.s_min >= 0.0):
        out.append((eid, "s_min must be nonnegative"))
    if store.s_max < store.s_min:
        out.append((eid, "s_max < s_min"))
    if not (store.s_min <= store.s_init <= store.s_max):
        out.append((eid, "s_init outside [s_min, s_max]"))
    if not (store.eta_in > 0.0 and store.eta_out > 0.0):
        out.append((eid, "injection/withdrawal rates must be positive"))
    if not (store.withdrawal_cost > 0.0):
        out.append((eid, "withdrawal_cost must be positive"))


def validate_network(network: GasNetwork) -> GasNetwork:
    """Check every invariant, annotate derived fields and pipe boxes.

    All violations are collected before raising so an instance can be
    debugged in one round trip.
    """
    violations = []
    node_ids = set()
    for node in network.nodes:
        if node.id in node_ids:
            violations.append((node.id, "duplicate node id"))
        node_ids.add(node.id)
        _check_node(node, violations)

    for idx, pipe in enumerate(network.pipes):
        _check_pipe(pipe, idx, violations)
    for idx, comp in enumerate(network.compressors):
        _check_compressor(comp, idx, violations)
    for idx, valve in enumerate(network.valves):
        _check_valve(valve, idx, violations)
    for idx, store in enumerate(network.stores):
        _check_store(store, idx, node_ids, violations)

    for edge in network.edges:
        for nid in (edge.from_node, edge.to_node):
            if nid not in node_ids:
                violations.append(
                    (f"{edge.from_node}->{edge.to_node}", f"unknown node id {nid!r}"))
    if network.horizon < 1:
        violations.append(("network", "horizon must be >= 1"))
    if network.gamma1 < 0.0 or network.gamma2 < 0.0:
        violations.append(("network", "objective weights must be nonnegative"))
    if violations:
        raise NetworkValidationError(violations)

    squared_transform(network)
    network.pipe_boxes = {}
    for pipe in network.pipes:
        if pipe.kind == "short":
            continue
        ni = network.node_by_id(pipe.from_node)
        nj = network.node_by_id(pipe.to_node)
        network.pipe_boxes[pipe.key] = tightened_pipe_box(
            pipe, ni.pi_min, ni.pi_max, nj.pi_min, nj.pi_max)
    return network


def scale_loads(network: GasNetwork, sigma: float, sinks_only: bool = False) -> GasNetwork:
    """Multiply nodal base loads by a stress factor (in place)."""
    if not (sigma > 0.0):
        raise ValueError(f"stress factor must be positive, got {sigma}")
    for node in network.nodes:
        if sinks_only and node.kind != "sink":
            continue
        node.load *= sigma
    return network
