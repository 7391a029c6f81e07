"""abstract PHY: PPDU airtimes from a fixed MCS configuration, the
enterprise breakpoint path loss and the capture rule.
durations are computed in integer ns; *_airtime() helpers return us.
"""

from __future__ import absolute_import

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from .utils.process_utils import NS_PER_US

# (bits per subcarrier, coding rate numerator, denominator)
MCS_TABLE = {
    0: (1, 1, 2),
    1: (2, 1, 2),
    2: (2, 3, 4),
    3: (4, 1, 2),
    4: (4, 3, 4),
    5: (6, 2, 3),
    6: (6, 3, 4),
    7: (6, 5, 6),
    8: (8, 3, 4),
    9: (8, 5, 6),
    10: (10, 3, 4),
    11: (10, 5, 6),
}

DATA_SUBCARRIERS = {20: 234, 40: 468, 80: 980, 160: 1960}
RU242_SUBCARRIERS = 234
MAX_RUS = 4
MAX_AMPDU_MPDUS = 64

HE_SYMBOL_NS = 12800
LEGACY_SYMBOL_NS = 4000
LEGACY_BITS_PER_SYMBOL = 24  # 6 Mbit/s non-HT

SERVICE_BITS = 16
TAIL_BITS = 6

MPDU_OVERHEAD_BYTES = 38  # MAC header 30 + FCS 4 + A-MPDU delimiter 4

# control frame sizes in octets
ACK_BYTES = 14
CTS_BYTES = 14
ICR_BYTES = 14
BLOCK_ACK_BYTES = 32
CF_END_BYTES = 20
ICF_BYTES = 34
MU_RTS_TXS_BYTES = 34


def trigger_bytes(n_users):
    return 24 + 6 * n_users


def multi_sta_block_ack_bytes(n_users):
    return 22 + 12 * n_users


class OversizeError(ValueError):
    pass


@dataclass
class PhyConfig:
    data_mcs: int = 7
    ctrl_mcs: int = 0
    tx_power_dbm: float = 21.0
    gi_ns: int = 800
    band_ghz: float = 5.0
    bandwidth_mhz: int = 80
    n_ss: int = 1
    max_ppdu_us: int = 5484
    pd_threshold_dbm: float = -82.0
    ed_threshold_dbm: float = -62.0
    capture_margin_db: float = 10.0
    data_preamble_us: int = 44
    ctrl_preamble_us: int = 20
    sifs_us: int = 16
    slot_us: int = 9
    wall_loss_db: float = 7.0

    def validate(self):
        if self.data_mcs not in MCS_TABLE:
            raise ValueError("unsupported data MCS {}".format(self.data_mcs))
        if self.bandwidth_mhz not in DATA_SUBCARRIERS:
            raise ValueError("unsupported bandwidth {} MHz".format(self.bandwidth_mhz))
        if not self.pd_threshold_dbm < self.ed_threshold_dbm:
            raise ValueError("pd_threshold_dbm ({}) must be below ed_threshold_dbm ({})".format(
                self.pd_threshold_dbm, self.ed_threshold_dbm))
        if self.n_ss < 1:
            raise ValueError("n_ss must be >= 1")
        if self.max_ppdu_us <= self.data_preamble_us:
            raise ValueError("max_ppdu_us must exceed the preamble")
        return self

    @property
    def symbol_ns(self):
        return HE_SYMBOL_NS + self.gi_ns

    @property
    def sifs_ns(self):
        return self.sifs_us * NS_PER_US

    @property
    def slot_ns(self):
        return self.slot_us * NS_PER_US

    @property
    def pifs_ns(self):
        return self.sifs_ns + self.slot_ns

    @property
    def max_ppdu_ns(self):
        return self.max_ppdu_us * NS_PER_US


class FrameClass(Enum):
    DATA = "data"
    CONTROL = "control"
    TRIGGER = "trigger"
    BLOCK_ACK = "block_ack"


@dataclass
class Ppdu:
    tx_device: int
    frame_class: FrameClass
    duration_ns: int
    mpdus: Dict[int, List] = field(default_factory=dict)
    ru_map: Optional[Dict[int, int]] = None
    start_ns: Optional[int] = None

    @property
    def airtime_us(self):
        return self.duration_ns / float(NS_PER_US)

    @property
    def receivers(self):
        return list(self.mpdus.keys())

    @property
    def n_mpdus(self):
        return sum(len(m) for m in self.mpdus.values())

    @property
    def payload_bytes(self):
        return sum(m.size_bytes for ms in self.mpdus.values() for m in ms)


def bits_per_symbol(mcs, n_subcarriers, n_ss=1):
    try:
        nbpscs, num, den = MCS_TABLE[mcs]
    except KeyError:
        raise ValueError("unsupported MCS {}".format(mcs))
    return n_subcarriers * nbpscs * n_ss * num // den


def psdu_bits(payload_octets, n_mpdus):
    if payload_octets == 0:
        return 0
    return SERVICE_BITS + TAIL_BITS + 8 * (payload_octets + n_mpdus * MPDU_OVERHEAD_BYTES)


def _check_ppdu_args(payload_octets, n_mpdus):
    if payload_octets < 0:
        raise ValueError("payload_octets must be >= 0, got {}".format(payload_octets))
    if not 0 <= n_mpdus <= MAX_AMPDU_MPDUS:
        raise ValueError("n_mpdus must be in [0, {}], got {}".format(MAX_AMPDU_MPDUS, n_mpdus))


def ppdu_duration_ns(payload_octets, mcs, n_mpdus, config, n_subcarriers=None):
    """
    SU (or single-RU) data PPDU duration in ns:
    preamble + ceil(data bits / bits per symbol) * symbol duration.
    :param payload_octets: MSDU payload over all MPDUs of the PPDU
    :param mcs:
    :param n_mpdus: MPDUs in the A-MPDU, 0..64
    :param config: PhyConfig
    :param n_subcarriers: data subcarriers, None for the full configured band
    :return: int ns
    """
    _check_ppdu_args(payload_octets, n_mpdus)
    if n_subcarriers is None:
        n_subcarriers = DATA_SUBCARRIERS[config.bandwidth_mhz]
    nbits = psdu_bits(payload_octets, n_mpdus)
    nsym = -(-nbits // bits_per_symbol(mcs, n_subcarriers, config.n_ss))
    duration = config.data_preamble_us * NS_PER_US + nsym * config.symbol_ns
    if duration > config.max_ppdu_ns:
        raise OversizeError("PPDU of {} octets / {} MPDUs needs {} us, above the {} us cap".format(
            payload_octets, n_mpdus, duration / NS_PER_US, config.max_ppdu_us))
    return duration


def ppdu_airtime(payload_octets, mcs, n_mpdus, config):
    return ppdu_duration_ns(payload_octets, mcs, n_mpdus, config) / float(NS_PER_US)


def mu_ppdu_duration_ns(per_ru_loads, mcs, config):
    """
    MU (or TB) PPDU duration: every RU is padded to the longest one.
    :param per_ru_loads: list of (payload_octets, n_mpdus), one per 242-tone RU
    :return: int ns
    """
    if len(per_ru_loads) > MAX_RUS:
        raise ValueError("at most {} RUs, got {}".format(MAX_RUS, len(per_ru_loads)))
    durations = [ppdu_duration_ns(octets, mcs, n, config, n_subcarriers=RU242_SUBCARRIERS)
                 for octets, n in per_ru_loads]
    return max(durations) if durations else config.data_preamble_us * NS_PER_US


def mu_ppdu_airtime(per_ru_loads, mcs, config):
    return mu_ppdu_duration_ns(per_ru_loads, mcs, config) / float(NS_PER_US)


def ctrl_frame_duration_ns(octets, config):
    nbits = SERVICE_BITS + TAIL_BITS + 8 * octets
    nsym = -(-nbits // LEGACY_BITS_PER_SYMBOL)
    return config.ctrl_preamble_us * NS_PER_US + nsym * LEGACY_SYMBOL_NS


def ctrl_frame_airtime(octets, config):
    return ctrl_frame_duration_ns(octets, config) / float(NS_PER_US)


def path_loss_db(distance_m, n_walls=0, wall_loss_db=7.0):
    """
    enterprise breakpoint model at 5 GHz:
    40.05 + 20 log10(min(d, 10)) + 35 log10(max(d, 10) / 10) + wall_loss * n_walls
    """
    if distance_m <= 0:
        raise ValueError("distance must be > 0, got {}".format(distance_m))
    if n_walls < 0:
        raise ValueError("n_walls must be >= 0, got {}".format(n_walls))
    return (40.05 + 20.0 * math.log10(min(distance_m, 10.0))
            + 35.0 * math.log10(max(distance_m, 10.0) / 10.0)
            + wall_loss_db * n_walls)


def dbm_to_mw(p_dbm):
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw):
    if p_mw <= 0.0:
        return -math.inf
    return 10.0 * math.log10(p_mw)


def captured(desired_dbm, interferers_dbm, config):
    """
    a frame survives when it is above PD and leads the summed interference
    by at least the capture margin.
    """
    if desired_dbm < config.pd_threshold_dbm:
        return False
    if len(interferers_dbm) == 0:
        return True
    interference_dbm = mw_to_dbm(sum(dbm_to_mw(p) for p in interferers_dbm))
    return desired_dbm - interference_dbm >= config.capture_margin_db
