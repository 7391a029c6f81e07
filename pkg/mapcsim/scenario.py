"""scenario configuration and construction.

DEFAULT_CONFIG is the only place the default parameters live. parse_config()
merges a JSON scenario file over it and validates the result; build_scenario()
turns a validated config into devices, positions and flows.
"""

from __future__ import absolute_import

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .cotdma import InfoChannel, MapcPair
from .edca import AccessCategory, AcParams, EdcaParams, Role
from .engine import STREAM_PLACEMENT, RngStream, make_stream_id
from .medium import rx_power_matrix
from .phy import PhyConfig
from .traffic import DEFAULT_FLOWS, FRAGMENT_THRESHOLD, Direction, FlowSpec, TrafficModel, default_flow_spec
from .utils.process_utils import us_to_ns

logger = logging.getLogger(__name__)

SCENARIOS = ("RTMG", "VR")
SYSTEMS = ("coordinated", "uncoordinated")
SYSTEM_LABELS = {"coordinated": "c", "uncoordinated": "u"}


def _traffic_defaults():
    out = {}
    for (model, direction), (size, iat, size_dist, iat_dist) in DEFAULT_FLOWS.items():
        out.setdefault(model.value, {})[direction.value] = {
            "mean_pkt_bytes": size, "mean_iat_us": iat, "size_dist": dict(size_dist), "iat_dist": dict(iat_dist)}
    return out


def _edca_defaults():
    params = EdcaParams()
    out = {"slot_us": params.slot_us, "sifs_us": params.sifs_us, "retry_limit": params.retry_limit,
           "queue_limit": params.queue_limit}
    for ac, p in params.ac.items():
        out[ac.name] = asdict(p)
    return out


DEFAULT_CONFIG = {
    "scenario": "RTMG",
    "system": "coordinated",
    "n_vc_stas": 2,
    "n_bss": 4,
    "mapc_pair": None,
    "co_bss": [0, 1],
    "info_channel": "backhaul",
    "ul_mu_in_baseline": True,
    "sim_time_us": 5000000,
    "warmup_us": 250000,
    "n_iterations": 50,
    "topology": {
        "room_size_m": 20.0,
        "cluster_radius_m": 5.0,
        "walls_between_rooms": 0,
        "placement_seed": None,
        "positions": None,
    },
    "phy": asdict(PhyConfig()),
    "edca": _edca_defaults(),
    "mac": {"fragment_threshold": FRAGMENT_THRESHOLD},
    "traffic": _traffic_defaults(),
    "metrics": {"pooled": False, "alpha": 0.05, "raw_samples": False},
}

# keys whose value is a free-form dict
_OPAQUE = ("size_dist", "iat_dist")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super(ConfigError, self).__init__("config key '{}': {}".format(key, message))
        self.key = key


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        dotted = "{}.{}".format(path, key) if path else key
        if key not in base:
            raise ConfigError(dotted, "unknown key")
        if isinstance(base[key], dict) and key not in _OPAQUE:
            if not isinstance(value, dict):
                raise ConfigError(dotted, "expected a mapping, got {!r}".format(value))
            out[key] = _merge(base[key], value, dotted)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def _int(values, key, low=None):
    v = values[key]
    _require(isinstance(v, int) and not isinstance(v, bool), key, "expected an integer, got {!r}".format(v))
    if low is not None:
        _require(v >= low, key, "must be >= {}, got {}".format(low, v))
    return v


@dataclass
class ScenarioConfig:
    scenario: str
    system: str
    n_vc_stas: int
    n_bss: int
    mapc_pair: Optional[List[int]]
    co_bss: List[int]
    info_channel: str
    ul_mu_in_baseline: bool
    sim_time_us: int
    warmup_us: int
    n_iterations: int
    topology: dict
    phy: dict
    edca: dict
    mac: dict
    traffic: dict
    metrics: dict

    @property
    def coordinated(self):
        return self.system == "coordinated"

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **overrides):
        """a new validated config with top-level values replaced."""
        values = self.to_dict()
        if "system" in overrides and overrides["system"] != self.system:
            values["mapc_pair"] = None
        values.update(overrides)
        return _validate(values)

    def phy_config(self):
        return PhyConfig(**self.phy)

    def edca_params(self):
        acs = {ac: AcParams(**self.edca[ac.name]) for ac in AccessCategory}
        return EdcaParams(acs, self.edca["slot_us"], self.edca["sifs_us"], self.edca["retry_limit"],
                          self.edca["queue_limit"])

    def flow_spec(self, model, direction):
        return default_flow_spec(model, direction, self.traffic[TrafficModel(model).value][Direction(direction).value])


def _validate(values):
    _require(values["scenario"] in SCENARIOS, "scenario", "expected one of {}, got {!r}".format(
        SCENARIOS, values["scenario"]))
    _require(values["system"] in SYSTEMS, "system", "expected one of {}, got {!r}".format(
        SYSTEMS, values["system"]))
    _int(values, "n_vc_stas", 0)
    n_bss = _int(values, "n_bss", 2)
    _int(values, "n_iterations", 1)
    _int(values, "sim_time_us", 1)
    warmup = _int(values, "warmup_us", 0)
    _require(warmup < values["sim_time_us"], "warmup_us", "must be below sim_time_us ({})".format(
        values["sim_time_us"]))
    _require(isinstance(values["ul_mu_in_baseline"], bool), "ul_mu_in_baseline", "expected true or false")
    _require(values["info_channel"] in [c.value for c in InfoChannel], "info_channel",
             "expected one of {}, got {!r}".format([c.value for c in InfoChannel], values["info_channel"]))

    def ap_pair(key):
        pair = values[key]
        _require(isinstance(pair, list) and len(pair) == 2, key, "expected two AP ids, got {!r}".format(pair))
        _require(all(isinstance(a, int) and 0 <= a < n_bss for a in pair), key,
                 "AP ids must be in [0, {}), got {}".format(n_bss, pair))
        _require(pair[0] != pair[1], key, "the two APs must differ, got {}".format(pair))
        return pair

    co_bss = ap_pair("co_bss")
    if values["mapc_pair"] is not None:
        _require(values["system"] == "coordinated", "mapc_pair", "only valid when system is coordinated")
        pair = ap_pair("mapc_pair")
        _require(sorted(pair) == sorted(co_bss), "mapc_pair", "must equal co_bss {}, got {}".format(co_bss, pair))
    elif values["system"] == "coordinated":
        values["mapc_pair"] = list(co_bss)

    topo = values["topology"]
    _require(topo["room_size_m"] > 0, "topology.room_size_m", "must be > 0")
    _require(0 < topo["cluster_radius_m"] <= topo["room_size_m"] / 2.0, "topology.cluster_radius_m",
             "must be in (0, room_size_m / 2]")
    _require(topo["walls_between_rooms"] >= 0, "topology.walls_between_rooms", "must be >= 0")
    if topo["positions"] is not None:
        n_devices = n_bss * (values["n_vc_stas"] + 3)
        _require(len(topo["positions"]) == n_devices, "topology.positions",
                 "expected {} [x, y] entries, got {}".format(n_devices, len(topo["positions"])))

    _require(values["mac"]["fragment_threshold"] >= 1, "mac.fragment_threshold", "must be >= 1")
    _require(0 < values["metrics"]["alpha"] < 1, "metrics.alpha", "must be in (0, 1)")

    config = ScenarioConfig(**values)
    try:
        config.phy_config().validate()
    except (TypeError, ValueError) as e:
        raise ConfigError("phy", str(e))
    try:
        config.edca_params().validate()
    except (TypeError, ValueError) as e:
        raise ConfigError("edca", str(e))
    for model in TrafficModel:
        for direction in Direction:
            try:
                spec = config.flow_spec(model, direction)
            except (TypeError, ValueError) as e:
                raise ConfigError("traffic.{}.{}".format(model.value, direction.value), str(e))
            _require(spec.mean_pkt_bytes > 0 and spec.mean_iat_us > 0,
                     "traffic.{}.{}".format(model.value, direction.value), "means must be > 0")
    return config


def parse_config(text):
    """
    :param text: JSON scenario text, any subset of DEFAULT_CONFIG
    :return: ScenarioConfig with every default filled in
    """
    try:
        raw = json.loads(text) if text.strip() else {}
    except ValueError as e:
        raise ConfigError("<root>", "not valid JSON: {}".format(e))
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    if raw.get("mapc_pair") is not None and "co_bss" not in raw:
        raw["co_bss"] = list(raw["mapc_pair"])
    return _validate(_merge(DEFAULT_CONFIG, raw))


def load_config(path):
    if path is None:
        return parse_config("{}")
    with open(path) as fp:
        return parse_config(fp.read())


@dataclass
class Node:
    device_id: int
    role: Role
    bss: int
    index: int
    position: tuple


@dataclass
class FlowPlan:
    flow_id: int
    spec: FlowSpec
    source: int
    destination: int
    bss: int
    index: int
    sub: int


@dataclass
class Scenario:
    name: str
    system: str
    n_vc_stas: int
    nodes: List[Node]
    positions: np.ndarray
    walls: Optional[np.ndarray]
    flows: List[FlowPlan]
    pair: Optional[MapcPair]
    co_bss: tuple
    phy: PhyConfig
    edca: EdcaParams
    allow_ul_mu: bool
    sim_time_ns: int
    warmup_ns: int
    fragment_threshold: int = FRAGMENT_THRESHOLD
    config: Optional[ScenarioConfig] = field(default=None, repr=False)

    @property
    def aps(self):
        return [n for n in self.nodes if n.role is Role.AP]

    @property
    def stas(self):
        return [n for n in self.nodes if n.role is Role.STA]


def _place_sta(rng, center, radius):
    """uniform over the disc of the given radius."""
    angle = 2.0 * math.pi * rng.random()
    dist = radius * math.sqrt(rng.random())
    return center[0] + dist * math.cos(angle), center[1] + dist * math.sin(angle)


def mutual_pd(rx_dbm, a, b, pd_threshold_dbm):
    return rx_dbm[a][b] >= pd_threshold_dbm and rx_dbm[b][a] >= pd_threshold_dbm


def build_scenario(config, seed=0):
    """
    APs at the centers of a row of rooms, STAs uniform in the cluster disc
    around their AP. every BSS holds a background STA, n_vc_stas VC STAs and
    one LL STA (RTMG or VR); every STA has one DL and one UL flow.
    :param config: ScenarioConfig
    :param seed: run seed, also the placement seed unless the topology sets one
    :return: Scenario
    """
    topo = config.topology
    phy = config.phy_config()
    n_bss, n_vc = config.n_bss, config.n_vc_stas
    placement_seed = topo["placement_seed"] if topo["placement_seed"] is not None else seed
    room = float(topo["room_size_m"])

    nodes = []
    for b in range(n_bss):
        nodes.append(Node(b, Role.AP, b, 0, (room * (b + 0.5), room / 2.0)))
    sta_models = []
    for b in range(n_bss):
        center = nodes[b].position
        models = [TrafficModel.BACKGROUND] + [TrafficModel.VC] * n_vc + [TrafficModel(config.scenario)]
        for index, model in enumerate(models, start=1):
            rng = RngStream(placement_seed, make_stream_id(STREAM_PLACEMENT, b, index))
            nodes.append(Node(len(nodes), Role.STA, b, index, _place_sta(rng, center, topo["cluster_radius_m"])))
            sta_models.append(model)
    if topo["positions"] is not None:
        for node, pos in zip(nodes, topo["positions"]):
            node.position = (float(pos[0]), float(pos[1]))
    positions = np.array([n.position for n in nodes], dtype=float)

    walls = None
    if topo["walls_between_rooms"]:
        rooms = np.array([int(p[0] // room) for p in positions])
        walls = np.abs(rooms[:, None] - rooms[None, :]) * int(topo["walls_between_rooms"])

    flows = []
    by_bss = {}
    for node, model in zip([n for n in nodes if n.role is Role.STA], sta_models):
        by_bss.setdefault(node.bss, []).append((node, model))
    for b in range(n_bss):
        ordered = sorted(by_bss.get(b, []), key=lambda nm: {TrafficModel.VC: 0, TrafficModel.BACKGROUND: 2}.get(
            nm[1], 1))
        for node, model in ordered:
            for sub, direction in enumerate((Direction.DL, Direction.UL)):
                src, dst = (b, node.device_id) if direction is Direction.DL else (node.device_id, b)
                flows.append(FlowPlan(len(flows), config.flow_spec(model, direction), src, dst, b, node.index, sub))

    pair = None
    if config.coordinated:
        pair = MapcPair(config.mapc_pair[0], config.mapc_pair[1], InfoChannel(config.info_channel))
    a, c = config.co_bss
    rx = rx_power_matrix(positions, phy.tx_power_dbm, walls, phy.wall_loss_db)
    if not mutual_pd(rx, a, c, phy.pd_threshold_dbm):
        logger.warning("APs %d and %d are not within preamble detection of each other (%.1f / %.1f dBm)",
                       a, c, rx[a][c], rx[c][a])

    return Scenario(config.scenario, config.system, n_vc, nodes, positions, walls, flows, pair, tuple(config.co_bss),
                    phy, config.edca_params(), config.coordinated or config.ul_mu_in_baseline,
                    us_to_ns(config.sim_time_us), us_to_ns(config.warmup_us),
                    config.mac["fragment_threshold"], config)


