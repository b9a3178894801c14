"""Physical and link-level primitives: channel gain, drag, propulsion power.

Also holds the scenario data types and the validator that turns a raw
(JSON-like) mapping into a :class:`ScenarioConfig`.

All quantities are SI: bits, seconds, meters, Watts, Newtons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

AP = 0
STANDARD_GRAVITY = 9.81
KMH = 1.0 / 3.6
MEGABYTE_BITS = 8.0e6
GIGABYTE_BITS = 8.0e9


class ModelError(ValueError):
    """Raised when a primitive is evaluated outside its domain."""


class SingularGeometryError(ModelError):
    pass


class ScenarioError(ValueError):
    """Aggregated validation failure; ``problems`` lists every violation."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  - " + "\n  - ".join(self.problems))


@dataclass(frozen=True)
class ChannelParams:
    antenna_gain_product: float = 1.0
    path_loss_exponent: float = 1.5
    noise_power: float = 1e-10
    # indexed by receiver id; entry 0 is the access point
    bandwidth_per_receiver: tuple[float, ...] = (1e5,)

    def bandwidth(self, receiver: int) -> float:
        if len(self.bandwidth_per_receiver) == 1:
            return self.bandwidth_per_receiver[0]
        return self.bandwidth_per_receiver[receiver]


@dataclass(frozen=True)
class LinkGeometry:
    altitude_difference: float
    lateral_displacement: float
    along_track_separation: float


@dataclass(frozen=True)
class DragModel:
    """Resistive force ``C_D1 v**2 + C_D2 v**-2``."""

    parasitic_coefficient: float
    induced_coefficient: float


@dataclass(frozen=True)
class NodeParams:
    mass: float
    altitude: float
    lateral_offset: float
    initial_data: float
    buffer_capacity: float
    v_min: float
    v_max: float
    v_init: float
    q_init: float
    q_final: float
    direction: int
    p_max: float

    @property
    def path_length(self) -> float:
        return abs(self.q_final - self.q_init)

    @property
    def fixed_speed(self) -> bool:
        return self.v_min == self.v_max


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: tuple[NodeParams, ...]
    channel: ChannelParams
    drag: DragModel
    horizon: float
    knot_count: int
    topology: tuple[tuple[int, int], ...]
    relaying_enabled: bool = False
    gravity: float = STANDARD_GRAVITY

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def knot_times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.knot_count + 1)

    def node(self, n: int) -> NodeParams:
        """Node by 1-based id (the access point, id 0, has no parameters)."""
        return self.nodes[n - 1]

    def receivers(self) -> list[int]:
        return sorted({m for _, m in self.topology})

    def transmitters_to(self, m: int) -> list[int]:
        return sorted(n for n, mm in self.topology if mm == m)

    def outgoing(self, n: int) -> list[int]:
        return sorted(m for nn, m in self.topology if nn == n)


def channel_gain(channel: ChannelParams, geom: LinkGeometry) -> float:
    """Line-of-sight gain ``G / (a**2 + delta**2 + q**2)**alpha``."""
    d2 = (geom.altitude_difference ** 2 + geom.lateral_displacement ** 2
          + geom.along_track_separation ** 2)
    if d2 <= 0.0:
        raise SingularGeometryError("zero separation between transmitter and receiver")
    return channel.antenna_gain_product / d2 ** channel.path_loss_exponent


def gain_profile(channel: ChannelParams, a: float, delta: float, q) -> np.ndarray:
    """Vectorised :func:`channel_gain` over along-track separations ``q``."""
    q = np.asarray(q, dtype=float)
    d2 = a * a + delta * delta + q * q
    if np.any(d2 <= 0.0):
        raise SingularGeometryError("zero separation between transmitter and receiver")
    return channel.antenna_gain_product / d2 ** channel.path_loss_exponent


def drag_force(drag: DragModel, v):
    """Drag at speed ``v`` (scalar or array).

    Negative speeds are outside the model (the drag is taken as infinite
    there), so they raise rather than return ``inf``.
    """
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0.0):
        raise ModelError("drag is undefined for negative speed")
    if drag.induced_coefficient > 0.0 and np.any(v_arr == 0.0):
        raise ModelError("induced drag is singular at zero speed")
    safe = np.where(v_arr > 0.0, v_arr, 1.0)
    induced = np.where(v_arr > 0.0, drag.induced_coefficient / safe ** 2, 0.0)
    out = drag.parasitic_coefficient * v_arr ** 2 + induced
    return float(out) if np.ndim(out) == 0 else out


def drag_power(drag: DragModel, v):
    """``v * drag_force(v)``, the steady-flight propulsion power."""
    return v * drag_force(drag, v)


def drag_from_physical(rho: float, c_d0: float, wing_area: float, oswald: float,
                       aspect_ratio: float, mass: float,
                       g: float = STANDARD_GRAVITY) -> DragModel:
    """Fixed-wing drag coefficients with lift equal to weight."""
    args = dict(rho=rho, c_d0=c_d0, wing_area=wing_area, oswald=oswald,
                aspect_ratio=aspect_ratio, mass=mass, g=g)
    bad = [k for k, v in args.items() if not (v > 0.0 and math.isfinite(v))]
    if bad:
        raise ScenarioError([f"{k} must be positive and finite" for k in bad])
    c1 = rho * c_d0 * wing_area / 2.0
    c2 = 2.0 * (mass * g) ** 2 / (math.pi * oswald * aspect_ratio * rho * wing_area)
    return DragModel(c1, c2)


def propulsion_power(drag: DragModel, mass: float, v, v_dot):
    """Instantaneous propulsion power ``v * (drag(v) + m * v_dot)``.

    Can be negative while decelerating; no regenerative clamp is applied.
    """
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr <= 0.0) and drag.induced_coefficient > 0.0:
        raise ModelError("propulsion power requires strictly positive speed")
    out = v_arr * (np.asarray(drag_force(drag, v_arr)) + mass * np.asarray(v_dot, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# scenario validation

_NODE_DEFAULTS = {
    "mass": 3.0,
    "altitude": 1000.0,
    "lateral_offset": 0.0,
    "buffer_capacity": GIGABYTE_BITS,
    "p_max": 100.0,
}


def _num(raw: Mapping[str, Any], key: str, where: str, problems: list[str],
         default: Any = None) -> float | None:
    val = raw.get(key, default)
    if val is None:
        problems.append(f"{where}: missing '{key}'")
        return None
    try:
        val = float(val)
    except (TypeError, ValueError):
        problems.append(f"{where}: '{key}' is not a number ({val!r})")
        return None
    if not math.isfinite(val):
        problems.append(f"{where}: '{key}' must be finite")
        return None
    return val


def _drag(raw: Any, problems: list[str], nodes_raw: Sequence[Mapping[str, Any]]) -> DragModel | None:
    if not isinstance(raw, Mapping):
        problems.append("drag: expected an object")
        return None
    if "physical" in raw:
        phys = raw["physical"]
        mass = phys.get("mass", nodes_raw[0].get("mass", _NODE_DEFAULTS["mass"]) if nodes_raw else None)
        try:
            return drag_from_physical(phys["rho"], phys["c_d0"], phys["wing_area"],
                                      phys["oswald"], phys["aspect_ratio"], mass,
                                      phys.get("g", STANDARD_GRAVITY))
        except KeyError as exc:
            problems.append(f"drag.physical: missing {exc.args[0]!r}")
        except ScenarioError as exc:
            problems.extend(f"drag.physical: {p}" for p in exc.problems)
        return None
    c1 = _num(raw, "parasitic_coefficient", "drag", problems)
    c2 = _num(raw, "induced_coefficient", "drag", problems)
    if c1 is None or c2 is None:
        return None
    if c1 <= 0.0:
        problems.append("drag: parasitic_coefficient must be > 0")
    if c2 < 0.0:
        problems.append("drag: induced_coefficient must be >= 0")
    return DragModel(c1, c2)


def _channel(raw: Any, n_nodes: int, problems: list[str]) -> ChannelParams | None:
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        problems.append("channel: expected an object")
        return None
    G = _num(raw, "antenna_gain_product", "channel", problems, 1.0)
    alpha = _num(raw, "path_loss_exponent", "channel", problems, 1.5)
    sigma2 = _num(raw, "noise_power", "channel", problems, 1e-10)
    bw_raw = raw.get("bandwidth_per_receiver", 1e5)
    if isinstance(bw_raw, (int, float)):
        bw_raw = [bw_raw]
    try:
        bw = tuple(float(b) for b in bw_raw)
    except (TypeError, ValueError):
        problems.append("channel: bandwidth_per_receiver must be a number or list of numbers")
        bw = None
    if None in (G, alpha, sigma2) or bw is None:
        return None
    if G <= 0.0:
        problems.append("channel: antenna_gain_product must be > 0")
    if alpha < 1.0:
        problems.append("channel: path_loss_exponent must be >= 1")
    if sigma2 <= 0.0:
        problems.append("channel: noise_power must be > 0")
    if not bw or any(not (b > 0.0) for b in bw):
        problems.append("channel: every bandwidth must be > 0")
    if len(bw) not in (1, n_nodes + 1):
        problems.append(f"channel: bandwidth_per_receiver needs 1 or {n_nodes + 1} entries, got {len(bw)}")
    return ChannelParams(G, alpha, sigma2, bw)


def _node(raw: Any, idx: int, horizon: float | None, problems: list[str]) -> NodeParams | None:
    where = f"nodes[{idx}]"
    if not isinstance(raw, Mapping):
        problems.append(f"{where}: expected an object")
        return None
    before = len(problems)
    vals = {k: _num(raw, k, where, problems, d) for k, d in _NODE_DEFAULTS.items()}
    vals["initial_data"] = _num(raw, "initial_data", where, problems)
    vals["v_min"] = _num(raw, "v_min", where, problems)
    vals["v_max"] = _num(raw, "v_max", where, problems)
    if len(problems) > before:
        return None
    v_min, v_max = vals["v_min"], vals["v_max"]
    v_init = _num(raw, "v_init", where, problems, 0.5 * (v_min + v_max))
    if v_init is None:
        return None
    # default path: symmetric about the access point, traversed at v_init
    half = 0.5 * (horizon or 0.0) * v_init
    q_init = _num(raw, "q_init", where, problems, -half)
    q_final = _num(raw, "q_final", where, problems, half)
    if q_init is None or q_final is None:
        return None
    direction_default = 1 if q_final >= q_init else -1
    direction = raw.get("direction", direction_default)
    if direction not in (-1, 1):
        problems.append(f"{where}: direction must be -1 or +1")
        return None

    if vals["mass"] <= 0.0:
        problems.append(f"{where}: mass must be > 0")
    if vals["initial_data"] < 0.0:
        problems.append(f"{where}: initial_data must be >= 0")
    elif 0.0 < vals["initial_data"] < 1.0:
        problems.append(f"{where}: initial_data must be 0 or at least 1 bit")
    if vals["buffer_capacity"] <= 0.0:
        problems.append(f"{where}: buffer_capacity must be > 0")
    if vals["initial_data"] > vals["buffer_capacity"]:
        problems.append(f"{where}: initial_data exceeds buffer_capacity")
    if vals["p_max"] <= 0.0:
        problems.append(f"{where}: p_max must be > 0")
    if v_min < 0.0:
        problems.append(f"{where}: v_min must be >= 0")
    if v_min > v_max:
        problems.append(f"{where}: v_min > v_max")
    elif not (v_min <= v_init <= v_max):
        problems.append(f"{where}: v_init outside [v_min, v_max]")
    if q_final != q_init and (1 if q_final > q_init else -1) != direction:
        problems.append(f"{where}: direction inconsistent with q_final - q_init")
    return NodeParams(mass=vals["mass"], altitude=vals["altitude"],
                      lateral_offset=vals["lateral_offset"],
                      initial_data=vals["initial_data"],
                      buffer_capacity=vals["buffer_capacity"],
                      v_min=v_min, v_max=v_max, v_init=v_init,
                      q_init=q_init, q_final=q_final, direction=int(direction),
                      p_max=vals["p_max"])


def validate_scenario(raw: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a raw scenario mapping and fill defaults.

    Every violated invariant is collected before raising, so a single
    :class:`ScenarioError` reports all problems at once.

    Defaults: ``G = 1``, ``g = 9.81``, ``knot_count = 200``, no relaying,
    one direct link per node to the access point, ``v_init`` at mid-range
    and a path symmetric about the access point covered at ``v_init``.
    """
    problems: list[str] = []
    if not isinstance(raw, Mapping):
        raise ScenarioError(["scenario must be a JSON object"])

    horizon = _num(raw, "horizon", "scenario", problems)
    if horizon is not None and horizon <= 0.0:
        problems.append("scenario: horizon must be > 0")
    K = raw.get("knot_count", 200)
    if not isinstance(K, int) or isinstance(K, bool) or K < 2:
        problems.append("scenario: knot_count must be an integer >= 2")
        K = None
    g = _num(raw, "gravity", "scenario", problems, STANDARD_GRAVITY)

    nodes_raw = raw.get("nodes")
    if not isinstance(nodes_raw, Sequence) or isinstance(nodes_raw, (str, bytes)) or not nodes_raw:
        problems.append("scenario: 'nodes' must be a non-empty list")
        nodes_raw = []
    nodes = [_node(nr, i, horizon, problems) for i, nr in enumerate(nodes_raw)]
    N = len(nodes_raw)

    channel = _channel(raw.get("channel"), N, problems)
    drag = _drag(raw.get("drag"), problems, nodes_raw)

    relaying = raw.get("relaying_enabled", False)
    if not isinstance(relaying, bool):
        problems.append("scenario: relaying_enabled must be a boolean")
        relaying = False
    topo_raw = raw.get("topology")
    if topo_raw is None:
        topo_raw = [[n, AP] for n in range(1, N + 1)]
    topology: list[tuple[int, int]] = []
    for link in topo_raw:
        try:
            n, m = (int(link[0]), int(link[1]))
        except (TypeError, ValueError, IndexError):
            problems.append(f"topology: malformed link {link!r}")
            continue
        if not (1 <= n <= N):
            problems.append(f"topology: transmitter {n} is not a node id in 1..{N}")
        elif not (0 <= m <= N) or m == n:
            problems.append(f"topology: invalid receiver {m} for transmitter {n}")
        elif m != AP and not relaying:
            problems.append(f"topology: link U{n}->U{m} requires relaying_enabled")
        elif (n, m) in topology:
            problems.append(f"topology: duplicate link U{n}->U{m}")
        else:
            topology.append((n, m))
    for n in range(1, N + 1):
        if nodes_raw and not any(t == n for t, _ in topology):
            problems.append(f"topology: node U{n} has no outgoing link")

    if not problems:
        # separation along the (a, delta) plane must be non-zero for inter-node links
        for n, m in topology:
            if m == AP:
                a, d = nodes[n - 1].altitude, nodes[n - 1].lateral_offset
            else:
                a = nodes[n - 1].altitude - nodes[m - 1].altitude
                d = nodes[n - 1].lateral_offset - nodes[m - 1].lateral_offset
            if a * a + d * d <= 0.0:
                problems.append(f"topology: link U{n}->U{m} has zero altitude and lateral separation")
    if problems:
        raise ScenarioError(problems)
    return ScenarioConfig(nodes=tuple(nodes), channel=channel, drag=drag,
                          horizon=horizon, knot_count=K,
                          topology=tuple(sorted(topology)),
                          relaying_enabled=relaying, gravity=g)


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    """Inverse of :func:`validate_scenario` (all defaults made explicit)."""
    return {
        "horizon": cfg.horizon,
        "knot_count": cfg.knot_count,
        "gravity": cfg.gravity,
        "relaying_enabled": cfg.relaying_enabled,
        "topology": [list(link) for link in cfg.topology],
        "channel": {
            "antenna_gain_product": cfg.channel.antenna_gain_product,
            "path_loss_exponent": cfg.channel.path_loss_exponent,
            "noise_power": cfg.channel.noise_power,
            "bandwidth_per_receiver": list(cfg.channel.bandwidth_per_receiver),
        },
        "drag": {
            "parasitic_coefficient": cfg.drag.parasitic_coefficient,
            "induced_coefficient": cfg.drag.induced_coefficient,
        },
        "nodes": [
            {f: getattr(nd, f) for f in NodeParams.__dataclass_fields__}
            for nd in cfg.nodes
        ],
    }
