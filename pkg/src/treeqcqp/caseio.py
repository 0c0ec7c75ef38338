"""Case-file ingestion/emission and seeded random radial circuit generation.

Case files are strict JSON: unknown keys are rejected, and errors carry a
JSON-pointer-style path.  Lines are specified either by per-km impedance and
length (converted to per-unit through the network bases) or by per-unit
admittance directly, never both.  Missing limits mean "+inf" (no constraint).

The random generator draws sparsely loaded rural-feeder parameters:
(0.33 + i 0.38) ohm/km line impedance with 0.2-0.3 km lengths, voltage band
1 +/- 0.05 pu, demands up to 4.5 kW with 20-30% reactive fraction, PV
capacity up to 2 kW on a configurable fraction of nodes (reactive capability
+/-30% of capacity), and a substation rated at 5 kW per bus.  Topology is a
uniform random attachment tree by default; a Pruefer-sequence uniform
spanning tree is available behind a flag.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import ValidationError
from .network import Bus, Line, ObjectiveSpec, PowerNetwork

_CASE_KEYS = {"base", "buses", "lines", "objective"}
_BASE_KEYS = {"power_MW", "voltage_kV_LL"}
_BUS_KEYS = {"id", "p_demand_kW", "q_demand_kVAr", "p_gen", "q_gen", "v_bounds_pu"}
_LINE_KEYS = {
    "from", "to", "r_ohm_per_km", "x_ohm_per_km", "length_km",
    "g_pu", "b_pu", "f_max_MW", "l_max_MW",
}
_OBJECTIVE_KEYS = {"kind", "cost"}

RURAL_FEEDER = {
    "r_ohm_per_km": 0.33,
    "x_ohm_per_km": 0.38,
    "length_km": (0.2, 0.3),
    "v_band_pu": 0.05,
    "p_demand_kw": (0.0, 4.5),
    "q_fraction": (0.2, 0.3),
    "pv_cap_kw": (0.0, 2.0),
    "pv_q_fraction": 0.3,
    "substation_kw_per_bus": 5.0,
    "power_base_mw": 1.0,
    "voltage_base_kv": 12.47,
}


class CaseError(ValidationError):
    """Case parse error with a JSON-pointer-ish location."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _reject_unknown(obj: dict, allowed: set, path: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise CaseError(path, f"unknown keys {sorted(extra)}")


def _bound_pair(raw, path: str) -> tuple[float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise CaseError(path, "expected [min, max]")
    lo = -math.inf if raw[0] is None else float(raw[0])
    hi = math.inf if raw[1] is None else float(raw[1])
    return lo, hi


def parse_case(doc: dict | str) -> tuple[PowerNetwork, ObjectiveSpec]:
    """Parse a case document (dict or JSON text) into a validated network."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict):
        raise CaseError("/", "case document must be a JSON object")
    _reject_unknown(doc, _CASE_KEYS, "/")

    base = doc.get("base", {})
    _reject_unknown(base, _BASE_KEYS, "/base")
    power_mw = float(base.get("power_MW", 1.0))
    voltage_kv = float(base.get("voltage_kV_LL", 12.47))
    if power_mw <= 0 or voltage_kv <= 0:
        raise CaseError("/base", "bases must be positive")
    z_base = (voltage_kv * 1e3) ** 2 / (power_mw * 1e6)
    kw = power_mw * 1e3

    raw_buses = doc.get("buses")
    if not raw_buses:
        raise CaseError("/buses", "at least one bus required")
    ids = {}
    buses = []
    for idx, rb in enumerate(raw_buses):
        path = f"/buses/{idx}"
        _reject_unknown(rb, _BUS_KEYS, path)
        if "id" not in rb:
            raise CaseError(path, "missing id")
        bid = int(rb["id"])
        if bid in ids:
            raise CaseError(path, f"duplicate bus id {bid}")
        ids[bid] = idx
        p_lo, p_hi = _bound_pair(rb.get("p_gen", [0.0, 0.0]), path + "/p_gen")
        q_lo, q_hi = _bound_pair(rb.get("q_gen", [0.0, 0.0]), path + "/q_gen")
        v_lo, v_hi = _bound_pair(rb.get("v_bounds_pu", [0.95, 1.05]), path + "/v_bounds_pu")
        if not (0.0 < v_lo <= v_hi) or not math.isfinite(v_hi):
            raise CaseError(path + "/v_bounds_pu", "need 0 < min <= max, finite")
        buses.append(
            Bus(
                p_demand=float(rb.get("p_demand_kW", 0.0)) / kw,
                q_demand=float(rb.get("q_demand_kVAr", 0.0)) / kw,
                p_gen_min=p_lo / kw,
                p_gen_max=p_hi / kw,
                q_gen_min=q_lo / kw,
                q_gen_max=q_hi / kw,
                w_min=v_lo**2,
                w_max=v_hi**2,
            )
        )
    if min(ids) != 1:
        raise CaseError("/buses", "bus ids must start at 1 (substation)")

    lines = []
    for idx, rl in enumerate(doc.get("lines", [])):
        path = f"/lines/{idx}"
        _reject_unknown(rl, _LINE_KEYS, path)
        for key in ("from", "to"):
            if key not in rl or int(rl[key]) not in ids:
                raise CaseError(path, f"missing or unknown bus in {key!r}")
        has_z = any(k in rl for k in ("r_ohm_per_km", "x_ohm_per_km", "length_km"))
        has_y = any(k in rl for k in ("g_pu", "b_pu"))
        if has_z == has_y:
            raise CaseError(path, "specify exactly one of (r, x, length) or (g, b)")
        if has_z:
            try:
                r = float(rl["r_ohm_per_km"]) * float(rl["length_km"])
                xx = float(rl["x_ohm_per_km"]) * float(rl["length_km"])
            except KeyError as exc:
                raise CaseError(path, f"missing {exc.args[0]!r}") from None
            z_pu = (r + 1j * xx) / z_base
            y_pu = 1.0 / z_pu
            g, b = float(y_pu.real), float(-y_pu.imag)
        else:
            g = float(rl.get("g_pu", 0.0))
            b = float(rl.get("b_pu", 0.0))
        if g <= 0 or b <= 0:
            raise CaseError(path, f"line must be resistive-inductive (g={g:.4g}, b={b:.4g})")
        f_max = float(rl["f_max_MW"]) / power_mw if "f_max_MW" in rl else math.inf
        l_max = float(rl["l_max_MW"]) / power_mw if "l_max_MW" in rl else math.inf
        lines.append(Line(ids[int(rl["from"])], ids[int(rl["to"])], g, b, f_max, l_max))

    obj_raw = doc.get("objective", {"kind": "loss"})
    _reject_unknown(obj_raw, _OBJECTIVE_KEYS, "/objective")
    kind = obj_raw.get("kind", "loss")
    cost = obj_raw.get("cost")
    spec = ObjectiveSpec(kind, None if cost is None else np.asarray(cost, dtype=np.float64))

    net = PowerNetwork(buses, lines, power_mw, voltage_kv, gauge_bus=ids[1])
    try:
        net.validate()
        spec.validate(net.n)
    except ValidationError as exc:
        raise CaseError("/", str(exc)) from None
    return net, spec


def emit_case(net: PowerNetwork, spec: ObjectiveSpec) -> dict:
    """Case document from a network; inverse of :func:`parse_case` field-for-field."""
    kw = net.power_base_mw * 1e3

    def pair(lo: float, hi: float) -> list:
        return [None if math.isinf(lo) else lo * kw, None if math.isinf(hi) else hi * kw]

    doc = {
        "base": {"power_MW": net.power_base_mw, "voltage_kV_LL": net.voltage_base_kv},
        "buses": [
            {
                "id": k + 1,
                "p_demand_kW": bus.p_demand * kw,
                "q_demand_kVAr": bus.q_demand * kw,
                "p_gen": pair(bus.p_gen_min, bus.p_gen_max),
                "q_gen": pair(bus.q_gen_min, bus.q_gen_max),
                "v_bounds_pu": [math.sqrt(bus.w_min), math.sqrt(bus.w_max)],
            }
            for k, bus in enumerate(net.buses)
        ],
        "lines": [],
        "objective": {"kind": spec.kind},
    }
    for ln in net.lines:
        entry = {"from": ln.i + 1, "to": ln.j + 1, "g_pu": ln.g, "b_pu": ln.b}
        if math.isfinite(ln.f_max):
            entry["f_max_MW"] = ln.f_max * net.power_base_mw
        if math.isfinite(ln.l_max):
            entry["l_max_MW"] = ln.l_max * net.power_base_mw
        doc["lines"].append(entry)
    if spec.cost_coeffs is not None:
        doc["objective"]["cost"] = [float(c) for c in spec.cost_coeffs]
    return doc


@dataclass
class RandomCircuitParams:
    n: int
    seed: int
    pv_fraction: float | None = None        # None: drawn uniformly in [0.15, 0.60]
    topology: str = "attachment"             # or "pruefer"

    def validate(self) -> None:
        if self.n < 2:
            raise ValidationError("need at least 2 buses")
        if self.pv_fraction is not None and not (0.15 <= self.pv_fraction <= 0.60):
            raise ValidationError("pv_fraction must lie in [0.15, 0.60]")
        if self.topology not in ("attachment", "pruefer"):
            raise ValidationError(f"unknown topology {self.topology!r}")


def _random_tree_edges(n: int, rng: np.random.Generator, topology: str) -> list[tuple[int, int]]:
    if topology == "attachment":
        return [(int(rng.integers(0, t)), t) for t in range(1, n)]
    # uniform spanning tree from a random Pruefer sequence
    seq = [int(rng.integers(0, n)) for _ in range(n - 2)] if n > 2 else []
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    import heapq

    leaves = [k for k in range(n) if degree[k] == 1]
    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    last = [k for k in range(n) if degree[k] == 1]
    edges.append((last[0], last[1]))
    return edges


def gen_random_radial(params: RandomCircuitParams) -> tuple[PowerNetwork, ObjectiveSpec]:
    """Deterministic random radial circuit for a (n, seed, pv_fraction) triple."""
    params.validate()
    cfg = RURAL_FEEDER
    rng = np.random.default_rng(params.seed)
    n = params.n
    kw = cfg["power_base_mw"] * 1e3
    z_base = (cfg["voltage_base_kv"] * 1e3) ** 2 / (cfg["power_base_mw"] * 1e6)

    edges = _random_tree_edges(n, rng, params.topology)
    lines = []
    for (i, j) in edges:
        length = float(rng.uniform(*cfg["length_km"]))
        z = (cfg["r_ohm_per_km"] + 1j * cfg["x_ohm_per_km"]) * length / z_base
        y = 1.0 / z
        lines.append(Line(i, j, float(y.real), float(-y.imag)))

    pv_frac = params.pv_fraction
    if pv_frac is None:
        pv_frac = float(rng.uniform(0.15, 0.60))
    n_pv = int(round(pv_frac * (n - 1)))
    pv_nodes = set(rng.choice(np.arange(1, n), size=n_pv, replace=False).tolist()) if n_pv else set()

    v_lo, v_hi = 1.0 - cfg["v_band_pu"], 1.0 + cfg["v_band_pu"]
    buses = []
    for k in range(n):
        p_d = float(rng.uniform(*cfg["p_demand_kw"])) / kw
        q_d = p_d * float(rng.uniform(*cfg["q_fraction"]))
        if k == 0:
            p_cap = cfg["substation_kw_per_bus"] * n / kw
        elif k in pv_nodes:
            p_cap = float(rng.uniform(*cfg["pv_cap_kw"])) / kw
        else:
            p_cap = 0.0
        q_cap = cfg["pv_q_fraction"] * p_cap
        buses.append(
            Bus(
                p_demand=p_d,
                q_demand=q_d,
                p_gen_min=0.0,
                p_gen_max=p_cap,
                q_gen_min=-q_cap,
                q_gen_max=q_cap,
                w_min=v_lo**2,
                w_max=v_hi**2,
            )
        )
    net = PowerNetwork(buses, lines, cfg["power_base_mw"], cfg["voltage_base_kv"])
    net.validate()
    return net, ObjectiveSpec("loss")


def case_to_json(net: PowerNetwork, spec: ObjectiveSpec) -> str:
    return json.dumps(emit_case(net, spec), indent=2, sort_keys=True)


def load_case(path: str) -> tuple[PowerNetwork, ObjectiveSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_case(json.load(fh))
