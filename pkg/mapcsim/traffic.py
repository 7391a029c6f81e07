"""traffic models: RTMG, VR, VC and background flows as timestamped
application packets, fragmented into MPDUs and mapped to access categories.
"""

from __future__ import absolute_import

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np
from scipy.stats import truncnorm

from .edca import AccessCategory

FRAGMENT_THRESHOLD = 11454
_BLOCK = 4096


class TrafficModel(Enum):
    RTMG = "RTMG"
    VR = "VR"
    VC = "VC"
    BACKGROUND = "BACKGROUND"


class Direction(Enum):
    DL = "DL"
    UL = "UL"


LL_MODELS = (TrafficModel.RTMG, TrafficModel.VR)

MODEL_AC = {
    TrafficModel.RTMG: AccessCategory.VO,
    TrafficModel.VR: AccessCategory.VO,
    TrafficModel.VC: AccessCategory.VI,
    TrafficModel.BACKGROUND: AccessCategory.BE,
}

# (model, direction) -> mean packet bytes, mean IAT us, size dist, IAT dist
DEFAULT_FLOWS = {
    (TrafficModel.RTMG, Direction.DL): (80, 23060.0, {"kind": "truncnorm", "cv": 0.25},
                                        {"kind": "truncnorm", "cv": 0.25}),
    (TrafficModel.RTMG, Direction.UL): (50, 30490.0, {"kind": "truncnorm", "cv": 0.25},
                                        {"kind": "truncnorm", "cv": 0.25}),
    (TrafficModel.VR, Direction.DL): (166660, 33330.0, {"kind": "lognormal", "cv": 0.1},
                                      {"kind": "fixed"}),
    (TrafficModel.VR, Direction.UL): (190, 10810.0, {"kind": "fixed"}, {"kind": "fixed"}),
    (TrafficModel.VC, Direction.DL): (7810, 33330.0, {"kind": "lognormal", "cv": 0.2},
                                      {"kind": "fixed"}),
    (TrafficModel.VC, Direction.UL): (7810, 33330.0, {"kind": "lognormal", "cv": 0.2},
                                      {"kind": "fixed"}),
    (TrafficModel.BACKGROUND, Direction.DL): (200000, 8000.0, {"kind": "fixed"}, {"kind": "fixed"}),
    (TrafficModel.BACKGROUND, Direction.UL): (200000, 8000.0, {"kind": "fixed"}, {"kind": "fixed"}),
}

DIST_KINDS = ("fixed", "truncnorm", "lognormal", "exponential")


@dataclass
class FlowSpec:
    model: TrafficModel
    direction: Direction
    ac: AccessCategory
    mean_pkt_bytes: float
    mean_iat_us: float
    size_dist: dict = field(default_factory=lambda: {"kind": "fixed"})
    iat_dist: dict = field(default_factory=lambda: {"kind": "fixed"})

    @property
    def is_ll(self):
        return self.model in LL_MODELS

    @property
    def periodic(self):
        return self.iat_dist.get("kind") == "fixed"


def default_flow_spec(model, direction, overrides=None):
    """
    FlowSpec of (model, direction) with the default means and distributions.
    :param overrides: optional dict with any of mean_pkt_bytes, mean_iat_us,
        size_dist, iat_dist
    """
    model = TrafficModel(model) if not isinstance(model, TrafficModel) else model
    direction = Direction(direction) if not isinstance(direction, Direction) else direction
    size, iat, size_dist, iat_dist = DEFAULT_FLOWS[(model, direction)]
    values = dict(mean_pkt_bytes=size, mean_iat_us=iat, size_dist=dict(size_dist), iat_dist=dict(iat_dist))
    if overrides:
        values.update(overrides)
    return FlowSpec(model, direction, MODEL_AC[model], **values)


def mean_offered_load_bps(spec):
    if spec.mean_iat_us <= 0:
        raise ValueError("mean_iat_us must be > 0, got {}".format(spec.mean_iat_us))
    return 8.0 * spec.mean_pkt_bytes / (spec.mean_iat_us * 1e-6)


def lognormal_params(mean, cv):
    sigma2 = math.log(1.0 + cv * cv)
    return math.log(mean) - sigma2 / 2.0, math.sqrt(sigma2)


def _check_dist(dist, what):
    kind = dist.get("kind")
    if kind not in DIST_KINDS:
        raise ValueError("unknown {} distribution {!r}, expected one of {}".format(what, kind, DIST_KINDS))
    if kind in ("truncnorm", "lognormal") and not dist.get("cv", 0) > 0:
        raise ValueError("{} distribution {} needs cv > 0".format(what, kind))


class _Sampler(object):
    """draws from one distribution around a mean, in blocks."""

    def __init__(self, dist, mean, generator):
        self.kind = dist["kind"]
        self.mean = float(mean)
        self.cv = float(dist.get("cv", 0.0))
        self._gen = generator
        self._block = np.empty(0)
        self._pos = 0

    def _refill(self):
        if self.kind == "truncnorm":
            sigma = self.cv * self.mean
            self._block = truncnorm.rvs(-3.0, 3.0, loc=self.mean, scale=sigma, size=_BLOCK,
                                        random_state=self._gen)
        elif self.kind == "lognormal":
            mu, sigma = lognormal_params(self.mean, self.cv)
            self._block = self._gen.lognormal(mu, sigma, size=_BLOCK)
        else:
            self._block = self._gen.exponential(self.mean, size=_BLOCK)
        self._pos = 0

    def draw(self):
        if self.kind == "fixed":
            return self.mean
        if self._pos >= len(self._block):
            self._refill()
        value = self._block[self._pos]
        self._pos += 1
        return float(value)


class Flow(object):
    """flow-state of one traffic flow: source, destination and its samplers."""

    def __init__(self, spec, rng, flow_id=0, source=0, destination=0, bss=0):
        self.spec = spec
        self.rng = rng
        self.flow_id = flow_id
        self.source = source
        self.destination = destination
        self.bss = bss
        self._size = _Sampler(spec.size_dist, spec.mean_pkt_bytes, rng.generator)
        self._iat = _Sampler(spec.iat_dist, spec.mean_iat_us, rng.generator)
        self.n_packets = 0
        self.n_bytes = 0

    @property
    def is_ll(self):
        return self.spec.is_ll

    @property
    def ac(self):
        return self.spec.ac

    @property
    def direction(self):
        return self.spec.direction

    def first_arrival_us(self):
        """uniform phase in [0, mean IAT)."""
        return self.rng.random() * self.spec.mean_iat_us

    def __repr__(self):
        return "Flow({}, {}/{} {}->{})".format(self.flow_id, self.spec.model.value,
                                                self.spec.direction.value, self.source, self.destination)


def make_flow(spec, rng, flow_id=0, source=0, destination=0, bss=0):
    if not isinstance(spec.model, TrafficModel):
        raise ValueError("unknown traffic model {!r}".format(spec.model))
    if spec.mean_pkt_bytes <= 0 or spec.mean_iat_us <= 0:
        raise ValueError("flow means must be > 0, got size={} iat={}".format(
            spec.mean_pkt_bytes, spec.mean_iat_us))
    _check_dist(spec.size_dist, "size")
    _check_dist(spec.iat_dist, "iat")
    return Flow(spec, rng, flow_id, source, destination, bss)


def next_arrival(flow):
    """
    :return: (size_bytes, iat_us); size_bytes >= 1
    """
    size = max(1, int(round(flow._size.draw())))
    iat = max(flow._iat.draw(), 1e-3)
    flow.n_packets += 1
    flow.n_bytes += size
    return size, iat


def fragment(size_bytes, threshold=FRAGMENT_THRESHOLD):
    """split an application packet into MPDU payload sizes summing to size_bytes."""
    if size_bytes < 1:
        raise ValueError("packet size must be >= 1, got {}".format(size_bytes))
    if threshold < 1:
        raise ValueError("fragment threshold must be >= 1, got {}".format(threshold))
    n_full, rest = divmod(size_bytes, threshold)
    sizes = [threshold] * n_full
    if rest:
        sizes.append(rest)
    return sizes


@dataclass
class AppPacket:
    flow: Any
    size_bytes: int
    arrival_ns: int
    n_fragments: int
    delivered: int = 0
    lost: bool = False

    @property
    def complete(self):
        return self.delivered == self.n_fragments


@dataclass
class Mpdu:
    flow_id: int
    size_bytes: int
    arrival_ns: int
    direction: Direction
    source: int
    destination: int
    is_ll: bool
    ac: AccessCategory
    packet: Optional[AppPacket] = field(default=None, repr=False)
    retries: int = 0

    @property
    def arrival_time_us(self):
        return self.arrival_ns / 1000.0


def packet_to_mpdus(flow, size_bytes, arrival_ns, threshold=FRAGMENT_THRESHOLD):
    sizes = fragment(size_bytes, threshold)
    packet = AppPacket(flow, size_bytes, arrival_ns, len(sizes))
    return packet, [Mpdu(flow.flow_id, s, arrival_ns, flow.direction, flow.source, flow.destination,
                         flow.is_ll, flow.ac, packet) for s in sizes]
