"""Co-TDMA TXOP sharing between one pair of APs.

pure parts: the candidate information a sharing AP holds about its partner,
the action plan of a TXOP holder and the shared-window duration.
polling_phase() and execute_txs() are frame-exchange programs, generators
driven by the TXOP context of mapcsim.network.
"""

from __future__ import absolute_import

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .edca import AccessCategory, block_ack_ns, cf_end_ns
from .phy import (CTS_BYTES, DATA_SUBCARRIERS, ICF_BYTES, ICR_BYTES, MAX_AMPDU_MPDUS, MAX_RUS, MU_RTS_TXS_BYTES,
                  RU242_SUBCARRIERS, OversizeError, bits_per_symbol, ctrl_frame_duration_ns,
                  multi_sta_block_ack_bytes, ppdu_duration_ns, trigger_bytes)
from .utils.process_utils import NS_PER_US

logger = logging.getLogger(__name__)


class InfoChannel(Enum):
    IN_BAND = "in_band"
    BACKHAUL = "backhaul"


class Action(Enum):
    DL_TX = "DL_TX"
    UL_MU_TX = "UL_MU_TX"
    COTDMA_SHARE = "COTDMA_SHARE"
    CF_END = "CF_END"
    NONE = "NONE"


@dataclass(frozen=True)
class MapcPair:
    ap_i: int
    ap_j: int
    info_channel: InfoChannel = InfoChannel.BACKHAUL

    def __post_init__(self):
        if self.ap_i == self.ap_j:
            raise ValueError("a MAPC pair needs two distinct APs, got {} twice".format(self.ap_i))

    def partner(self, ap):
        if ap == self.ap_i:
            return self.ap_j
        if ap == self.ap_j:
            return self.ap_i
        raise KeyError("AP {} is not in the pair ({}, {})".format(ap, self.ap_i, self.ap_j))

    def __contains__(self, ap):
        return ap in (self.ap_i, self.ap_j)


@dataclass
class CandidateInfo:
    ap_id: int
    dl_ll_backlog_bytes: int = 0
    ul_ll_backlog_bytes: int = 0
    responded: bool = False
    n_dl_ll_mpdus: int = 0
    n_ul_ll_mpdus: int = 0
    ul_ll_stas: int = 0

    def __post_init__(self):
        if self.dl_ll_backlog_bytes < 0 or self.ul_ll_backlog_bytes < 0:
            raise ValueError("backlogs must be >= 0")


@dataclass
class SharedTxopGrant:
    sharing_ap: int
    shared_ap: int
    start_time_us: float
    duration_us: float
    dl_ll_bytes: int = 0
    ul_ll_bytes: int = 0

    @property
    def end_time_us(self):
        return self.start_time_us + self.duration_us


@dataclass
class TxopState:
    """what the holder knows at a decision instant."""
    remaining_ns: int
    has_dl: bool = False
    dl_fits: bool = False
    ul_ll_bytes: int = 0
    ul_fits: bool = False
    allow_ul_mu: bool = True
    shared: bool = False


@dataclass
class Plan:
    action: Action
    candidate: Optional[CandidateInfo] = None
    shared_ns: int = 0


def snapshot_candidate(ap, stations, responded=True, acs=None):
    """
    CandidateInfo of an AP from its DL queues and its STAs' UL LL queues.
    :param acs: access categories that can hold LL traffic (default: all)
    """
    info = CandidateInfo(ap.device_id, responded=responded)
    for ac, state in ap.acs.items():
        if acs is not None and ac not in acs:
            continue
        for m in state.queue:
            if m.is_ll:
                info.dl_ll_backlog_bytes += m.size_bytes
                info.n_dl_ll_mpdus += 1
    for sta in stations:
        n = 0
        for ac, state in sta.acs.items():
            if acs is not None and ac not in acs:
                continue
            for m in state.queue:
                if m.is_ll:
                    info.ul_ll_backlog_bytes += m.size_bytes
                    n += 1
        if n:
            info.n_ul_ll_mpdus += n
            info.ul_ll_stas += 1
    return info


def handshake_ns(phy):
    """MU-RTS TXS, SIFS, CTS, SIFS."""
    return (ctrl_frame_duration_ns(MU_RTS_TXS_BYTES, phy) + ctrl_frame_duration_ns(CTS_BYTES, phy)
            + 2 * phy.sifs_ns)


def polling_ns(phy):
    """ICF, SIFS, ICR, SIFS."""
    return ctrl_frame_duration_ns(ICF_BYTES, phy) + ctrl_frame_duration_ns(ICR_BYTES, phy) + 2 * phy.sifs_ns


def _dl_exchanges_ns(octets, n_mpdus, phy):
    """SU A-MPDU exchanges (PPDU, SIFS, block-ack) carrying a DL backlog."""
    if n_mpdus == 0:
        return 0
    per_mpdu = octets / float(n_mpdus)
    total, left = 0, n_mpdus
    while left > 0:
        n = min(left, MAX_AMPDU_MPDUS)
        while True:
            try:
                ppdu = ppdu_duration_ns(int(math.ceil(per_mpdu * n)), phy.data_mcs, n, phy)
                break
            except OversizeError:
                if n == 1:
                    ppdu = phy.max_ppdu_ns
                    break
                n = max(1, n // 2)
        total += ppdu + phy.sifs_ns + block_ack_ns(phy)
        left -= n
        if left:
            total += phy.sifs_ns
    return total


def _ul_exchanges_ns(octets, n_mpdus, n_stas, phy):
    """trigger-based rounds of at most 4 STAs carrying a UL backlog."""
    if n_mpdus == 0 or n_stas == 0:
        return 0
    rounds = int(math.ceil(n_stas / float(MAX_RUS)))
    users = min(n_stas, MAX_RUS)
    per_sta_octets = int(math.ceil(octets / float(n_stas)))
    per_sta_mpdus = max(1, min(MAX_AMPDU_MPDUS, int(math.ceil(n_mpdus / float(n_stas)))))
    try:
        tb = ppdu_duration_ns(per_sta_octets, phy.data_mcs, per_sta_mpdus, phy, n_subcarriers=RU242_SUBCARRIERS)
    except OversizeError:
        tb = phy.max_ppdu_ns
    one = (ctrl_frame_duration_ns(trigger_bytes(users), phy) + tb
           + ctrl_frame_duration_ns(multi_sta_block_ack_bytes(users), phy) + 2 * phy.sifs_ns)
    return rounds * one + (rounds - 1) * phy.sifs_ns


def min_exchange_ns(info, phy):
    """the shortest LL exchange the shared AP could run with this backlog."""
    options = []
    if info.n_dl_ll_mpdus:
        size = int(math.ceil(info.dl_ll_backlog_bytes / float(info.n_dl_ll_mpdus)))
        options.append(_dl_exchanges_ns(size, 1, phy))
    if info.n_ul_ll_mpdus:
        size = int(math.ceil(info.ul_ll_backlog_bytes / float(info.n_ul_ll_mpdus)))
        options.append(_ul_exchanges_ns(size, 1, 1, phy))
    return min(options) if options else 0


def shared_duration_ns(info, remaining_ns, phy):
    """
    time the shared AP needs for its DL and UL LL backlog, clipped to what is
    left of the TXOP after the MU-RTS TXS/CTS handshake.
    :return: int ns, 0 when there is no backlog or no room for one minimal exchange
    """
    if not info.responded:
        raise ValueError("candidate AP {} did not respond".format(info.ap_id))
    dl = _dl_exchanges_ns(info.dl_ll_backlog_bytes, info.n_dl_ll_mpdus, phy)
    ul = _ul_exchanges_ns(info.ul_ll_backlog_bytes, info.n_ul_ll_mpdus, info.ul_ll_stas, phy)
    need = dl + ul + (phy.sifs_ns if dl and ul else 0)
    if need == 0:
        return 0
    room = remaining_ns - handshake_ns(phy)
    if room < min_exchange_ns(info, phy):
        return 0
    return min(need, room)


def compute_shared_duration(info, remaining_txop_us, phy):
    return shared_duration_ns(info, int(round(remaining_txop_us * NS_PER_US)), phy) / float(NS_PER_US)


def room_to_share(ap, acs, limit_ns, phy):
    """
    whether a TXOP of limit_ns can leave time for a shared window after the
    polling phase and the holder's own eligible DL backlog.
    """
    capacity = limit_ns // phy.symbol_ns * bits_per_symbol(phy.data_mcs, DATA_SUBCARRIERS[phy.bandwidth_mhz],
                                                           phy.n_ss) // 8
    octets = n_mpdus = 0
    for ac in acs:
        for mpdu in ap.queue(ac):
            octets += mpdu.size_bytes
            n_mpdus += 1
            if octets >= capacity:
                return False
    return polling_ns(phy) + _dl_exchanges_ns(octets, n_mpdus, phy) + handshake_ns(phy) < limit_ns


def txop_action_plan(ap, txop_state, candidates, phy):
    """
    next action of a TXOP holder, in strict priority: DL, UL MU for LL
    traffic, TXOP sharing with a responding candidate (once per TXOP), CF-End.
    :param ap: DeviceState of the holder
    :param txop_state: TxopState at the decision instant
    :param candidates: list of CandidateInfo from the polling phase
    :return: Plan
    """
    if ap.txop is None:
        raise ValueError("device {} holds no TXOP".format(ap.device_id))
    if txop_state.has_dl and txop_state.dl_fits:
        return Plan(Action.DL_TX)
    if txop_state.allow_ul_mu and txop_state.ul_ll_bytes > 0 and txop_state.ul_fits:
        return Plan(Action.UL_MU_TX)
    if not txop_state.shared:
        for info in candidates:
            if not info.responded:
                continue
            duration = shared_duration_ns(info, txop_state.remaining_ns, phy)
            if duration > 0:
                return Plan(Action.COTDMA_SHARE, info, duration)
    if txop_state.remaining_ns >= cf_end_ns(phy):
        return Plan(Action.CF_END)
    return Plan(Action.NONE)


def polling_phase(ctx, sharing_ap, pair):
    """
    ICF to the partner and its ICR, at the start of the sharing AP's TXOP.
    :return: list with the partner's CandidateInfo, responded=False without ICR
    """
    ap = sharing_ap.device_id
    partner = pair.partner(ap)
    phy = ctx.phy
    icf = yield from ctx.send([(ap, partner)], ctrl_frame_duration_ns(ICF_BYTES, phy), "icf")
    responded = False
    if icf.delivered(ap, partner) and ctx.available(partner):
        yield phy.sifs_ns
        icr = yield from ctx.send([(partner, ap)], ctrl_frame_duration_ns(ICR_BYTES, phy), "icr")
        responded = icr.delivered(partner, ap)
    yield phy.sifs_ns
    return [ctx.candidate_info(partner, responded)]


def execute_txs(ctx, grant_plan, sharing_ap):
    """
    MU-RTS TXS, SIFS, CTS, then the shared AP's LL-only window: DL LL
    exchanges first, then triggered UL LL. control returns to the sharing AP
    at the window end, or one PIFS after the shared AP's last frame.
    :return: SharedTxopGrant, None when the CTS is missing
    """
    phy = ctx.phy
    ap = sharing_ap.device_id
    shared = grant_plan.candidate.ap_id
    window_end = ctx.now() + handshake_ns(phy) + grant_plan.shared_ns
    txs = yield from ctx.send([(ap, shared)], ctrl_frame_duration_ns(MU_RTS_TXS_BYTES, phy), "mu_rts_txs",
                              nav_end=window_end)
    if not txs.delivered(ap, shared) or not ctx.accept_grant(shared, window_end):
        yield phy.sifs_ns
        return None
    yield phy.sifs_ns
    cts = yield from ctx.send([(shared, ap)], ctrl_frame_duration_ns(CTS_BYTES, phy), "cts", nav_end=window_end)
    if not cts.delivered(shared, ap):
        ctx.release_grant(shared)
        yield phy.sifs_ns
        return None
    yield phy.sifs_ns
    window_start = ctx.now()
    grant = SharedTxopGrant(ap, shared, window_start / float(NS_PER_US), grant_plan.shared_ns / float(NS_PER_US),
                            grant_plan.candidate.dl_ll_backlog_bytes, grant_plan.candidate.ul_ll_backlog_bytes)
    ctx.begin_window(grant, window_start, window_end)
    back = min(window_start - phy.sifs_ns + phy.pifs_ns, window_end)
    gap = 0
    while True:
        budget = window_end - ctx.now() - gap
        exchange = ctx.plan_dl(shared, list(AccessCategory), budget, ll_only=True)
        if exchange is None:
            exchange = ctx.plan_ul(shared, budget, ll_only=True)
        if exchange is None:
            break
        if gap:
            yield gap
        ok = yield from ctx.run_exchange(exchange, in_window=True)
        if not ok:
            back = ctx.now()
            break
        back = min(ctx.now() + phy.pifs_ns, window_end)
        gap = phy.sifs_ns
    if back > ctx.now():
        yield back - ctx.now()
    ctx.end_window(grant)
    return grant
