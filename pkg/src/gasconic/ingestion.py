"""Instance file parsing: network JSON and demand-profile CSV.

The JSON schema is strict: unknown keys are rejected and every number
must be finite, so typos surface as errors instead of silently ignored
fields.
"""

from __future__ import annotations

import json
import math
import warnings

from .network import Compressor, GasNetwork, Node, Pipe, Store, Valve

_NODE_KEYS = {"id": str, "kind": str, "p_min": float, "p_max": float, "load": float}
_PIPE_KEYS = {"from": str, "to": str, "kind": str, "w": float,
              "f_min": float, "f_max": float}
_COMP_KEYS = {"from": str, "to": str, "a_min": float, "a_max": float,
              "f_min": float, "f_max": float, "h": float, "fuel_cost": float,
              "startup_cost": float, "min_up": int, "min_down": int}
_VALVE_KEYS = {"from": str, "to": str, "kind": str, "a_min": float, "a_max": float,
               "f_min": float, "f_max": float, "min_up": int, "min_down": int}
_STORE_KEYS = {"node": str, "s_min": float, "s_max": float, "s_init": float,
               "eta_in": float, "eta_out": float, "withdrawal_cost": float}


class SchemaError(ValueError):
    """Instance file violates the network JSON schema."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _coerce(raw, keys, path, optional=()):
    if not isinstance(raw, dict):
        raise SchemaError(path, "expected an object")
    unknown = set(raw) - set(keys)
    if unknown:
        raise SchemaError(path, f"unknown field(s) {sorted(unknown)}")
    out = {}
    for name, typ in keys.items():
        if name not in raw:
            if name in optional:
                continue
            raise SchemaError(f"{path}.{name}", "missing required field")
        value = raw[name]
        if typ is str:
            if not isinstance(value, str):
                raise SchemaError(f"{path}.{name}", "expected a string")
            out[name] = value
        elif typ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(f"{path}.{name}", "expected an integer")
            out[name] = value
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"{path}.{name}", "expected a number")
            if not math.isfinite(value):
                raise SchemaError(f"{path}.{name}", "non-finite number")
            out[name] = float(value)
    return out


def parse_network_json(data: bytes | str) -> GasNetwork:
    """Parse and schema-check a network instance file."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"syntax error at line {exc.lineno} column {exc.colno}: "
                               f"{exc.msg}") from exc
    top = {"horizon": int, "kappa_hat": float, "gamma1": float, "gamma2": float,
           "nodes": list, "pipes": list, "compressors": list, "valves": list,
           "stores": list}
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected a top-level object")
    unknown = set(doc) - set(top)
    if unknown:
        raise SchemaError("$", f"unknown field(s) {sorted(unknown)}")
    for name in ("horizon", "gamma1", "gamma2", "nodes"):
        if name not in doc:
            raise SchemaError(f"$.{name}", "missing required field")

    horizon = doc["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise SchemaError("$.horizon", "expected an integer")
    kappa_hat = doc.get("kappa_hat", 0.114)
    if isinstance(kappa_hat, bool) or not isinstance(kappa_hat, (int, float)) \
            or not math.isfinite(kappa_hat):
        raise SchemaError("$.kappa_hat", "expected a finite number")
    gammas = {}
    for name in ("gamma1", "gamma2"):
        val = doc[name]
        if isinstance(val, bool) or not isinstance(val, (int, float)) \
                or not math.isfinite(val):
            raise SchemaError(f"$.{name}", "expected a finite number")
        gammas[name] = float(val)

    net = GasNetwork(horizon=horizon, kappa_hat=float(kappa_hat),
                     gamma1=gammas["gamma1"], gamma2=gammas["gamma2"])

    seen_ids = set()
    for idx, raw in enumerate(doc.get("nodes", [])):
        rec = _coerce(raw, _NODE_KEYS, f"$.nodes[{idx}]")
        if rec["id"] in seen_ids:
            raise SchemaError(f"$.nodes[{idx}].id", f"duplicate node id {rec['id']!r}")
        seen_ids.add(rec["id"])
        net.nodes.append(Node(id=rec["id"], kind=rec["kind"], p_min=rec["p_min"],
                              p_max=rec["p_max"], load=rec["load"]))
    for idx, raw in enumerate(doc.get("pipes", [])):
        path = f"$.pipes[{idx}]"
        rec = _coerce(raw, _PIPE_KEYS, path, optional=("w",))
        if rec.get("kind", "pipe") != "short" and "w" not in rec:
            raise SchemaError(f"{path}.w", "missing required field for a pipe with loss")
        net.pipes.append(Pipe(from_node=rec["from"], to_node=rec["to"],
                              kind=rec["kind"], w=rec.get("w", 0.0),
                              f_min=rec["f_min"], f_max=rec["f_max"]))
    for idx, raw in enumerate(doc.get("compressors", [])):
        rec = _coerce(raw, _COMP_KEYS, f"$.compressors[{idx}]")
        net.compressors.append(Compressor(
            from_node=rec["from"], to_node=rec["to"], a_min=rec["a_min"],
            a_max=rec["a_max"], f_min=rec["f_min"], f_max=rec["f_max"],
            h=rec["h"], fuel_cost=rec["fuel_cost"], startup_cost=rec["startup_cost"],
            min_up=rec["min_up"], min_down=rec["min_down"]))
    for idx, raw in enumerate(doc.get("valves", [])):
        rec = _coerce(raw, _VALVE_KEYS, f"$.valves[{idx}]")
        net.valves.append(Valve(
            from_node=rec["from"], to_node=rec["to"], kind=rec["kind"],
            a_min=rec["a_min"], a_max=rec["a_max"], f_min=rec["f_min"],
            f_max=rec["f_max"], min_up=rec["min_up"], min_down=rec["min_down"]))
    for idx, raw in enumerate(doc.get("stores", [])):
        rec = _coerce(raw, _STORE_KEYS, f"$.stores[{idx}]")
        net.stores.append(Store(
            node=rec["node"], s_min=rec["s_min"], s_max=rec["s_max"],
            s_init=rec["s_init"], eta_in=rec["eta_in"], eta_out=rec["eta_out"],
            withdrawal_cost=rec["withdrawal_cost"]))
    return net


def write_network(net: GasNetwork) -> bytes:
    """Serialize a network back to the instance JSON schema."""
    doc = {
        "horizon": net.horizon,
        "kappa_hat": net.kappa_hat,
        "gamma1": net.gamma1,
        "gamma2": net.gamma2,
        "nodes": [{"id": n.id, "kind": n.kind, "p_min": n.p_min, "p_max": n.p_max,
                   "load": n.load} for n in net.nodes],
        "pipes": [{"from": p.from_node, "to": p.to_node, "kind": p.kind, "w": p.w,
                   "f_min": p.f_min, "f_max": p.f_max} for p in net.pipes],
        "compressors": [{"from": c.from_node, "to": c.to_node, "a_min": c.a_min,
                         "a_max": c.a_max, "f_min": c.f_min, "f_max": c.f_max,
                         "h": c.h, "fuel_cost": c.fuel_cost,
                         "startup_cost": c.startup_cost, "min_up": c.min_up,
                         "min_down": c.min_down} for c in net.compressors],
        "valves": [{"from": v.from_node, "to": v.to_node, "kind": v.kind,
                    "a_min": v.a_min, "a_max": v.a_max, "f_min": v.f_min,
                    "f_max": v.f_max, "min_up": v.min_up, "min_down": v.min_down}
                   for v in net.valves],
        "stores": [{"node": s.node, "s_min": s.s_min, "s_max": s.s_max,
                    "s_init": s.s_init, "eta_in": s.eta_in, "eta_out": s.eta_out,
                    "withdrawal_cost": s.withdrawal_cost} for s in net.stores],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


class DemandProfile:
    """Per-period demand multipliers with unit mean."""

    def __init__(self, multipliers):
        self.multipliers = [float(m) for m in multipliers]

    def __len__(self):
        return len(self.multipliers)


def load_demand_profile(data: bytes | str, horizon: int) -> DemandProfile:
    """Parse a CSV of multipliers and renormalize the mean to 1.

    A deviation beyond 1e-6 triggers rescaling with a warning; tiny
    drift is corrected silently. Exactly ``horizon`` values required.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    values = []
    for token in data.replace(",", "\n").split("\n"):
        token = token.strip()
        if not token:
            continue
        values.append(float(token))
    if len(values) != horizon:
        raise ValueError(f"expected {horizon} multipliers, got {len(values)}")
    if any(v < 0.0 for v in values):
        raise ValueError("negative demand multiplier")
    mean = sum(values) / len(values)
    if mean <= 0.0:
        raise ValueError("profile mean must be positive")
    if abs(mean - 1.0) > 1e-6:
        warnings.warn(f"demand profile mean {mean:.6g} != 1; rescaling to unit mean")
        values = [v / mean for v in values]
    elif abs(mean - 1.0) > 1e-9:
        values = [v / mean for v in values]
    return DemandProfile(values)


def constant_profile(horizon: int) -> DemandProfile:
    return DemandProfile([1.0] * horizon)


def apply_stress(network: GasNetwork, sigma: float,
                 sinks_only: bool = False) -> GasNetwork:
    """Scale base loads by the stress factor (sources and sinks alike).

    Scaling both sides keeps the instance balanced at any stress level;
    ``sinks_only`` scales demand only.
    """
    from .network import scale_loads

    return scale_loads(network, sigma, sinks_only=sinks_only)


class LoadTable:
    """Mapping (node id, period) -> load, period in 1..T."""

    def __init__(self, q: dict, horizon: int):
        self.q = q
        self.horizon = horizon

    def __call__(self, node_id: str, t: int) -> float:
        return self.q[(node_id, t)]


def expand_loads(network: GasNetwork, profile: DemandProfile) -> LoadTable:
    """Spread base loads over the horizon with the profile multipliers."""
    if len(profile) != network.horizon:
        raise ValueError(
            f"profile length {len(profile)} != horizon {network.horizon}")
    q = {}
    for node in network.nodes:
        for t in range(1, network.horizon + 1):
            q[(node.id, t)] = node.load * profile.multipliers[t - 1]
    return LoadTable(q, network.horizon)
