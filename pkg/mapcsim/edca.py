"""EDCA channel access of one device and the frame builders of a TXOP holder.

DeviceState is a state machine: advance() takes a trigger and the current
instant and returns the actions the simulation has to carry out. backoff
counting is analytic, idle slots between an idle instant and the next busy
instant are counted as floor((t_busy - t_idle - AIFS) / slot).
"""

from __future__ import absolute_import

import logging
from collections import deque, namedtuple
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from itertools import islice
from typing import Dict, Optional

from .phy import (BLOCK_ACK_BYTES, CF_END_BYTES, DATA_SUBCARRIERS, MAX_AMPDU_MPDUS, MAX_RUS,
                  RU242_SUBCARRIERS, FrameClass, OversizeError, Ppdu, ctrl_frame_duration_ns,
                  multi_sta_block_ack_bytes, ppdu_duration_ns, trigger_bytes)
from .utils.process_utils import NS_PER_US

logger = logging.getLogger(__name__)

# MPDUs from the head of a queue the frame builders look at
SCHED_LOOKAHEAD = 1024


class AccessCategory(IntEnum):
    """higher value, higher priority"""
    BE = 0
    VI = 1
    VO = 2


class Role(Enum):
    AP = "AP"
    STA = "STA"


class Trigger(Enum):
    ENQUEUE = "enqueue"
    MEDIUM_IDLE = "medium_idle"
    MEDIUM_BUSY = "medium_busy"
    TIMER = "timer"
    TX_COMPLETE = "tx_complete"


StartTx = namedtuple("StartTx", ["ac"])
SetTimer = namedtuple("SetTimer", ["fire_time"])
CancelTimer = namedtuple("CancelTimer", [])
Yield = namedtuple("Yield", [])


def _is_pow2_minus_1(x):
    return x >= 1 and (x + 1) & x == 0


@dataclass
class AcParams:
    aifsn: int
    cw_min: int
    cw_max: int
    txop_limit_us: int


def default_ac_params():
    return {
        AccessCategory.VO: AcParams(2, 3, 7, 2080),
        AccessCategory.VI: AcParams(2, 7, 15, 4096),
        AccessCategory.BE: AcParams(3, 15, 1023, 2528),
    }


@dataclass
class EdcaParams:
    ac: Dict[AccessCategory, AcParams] = field(default_factory=default_ac_params)
    slot_us: int = 9
    sifs_us: int = 16
    retry_limit: int = 7
    queue_limit: int = 100000

    def validate(self):
        for ac, p in self.ac.items():
            if not (_is_pow2_minus_1(p.cw_min) and _is_pow2_minus_1(p.cw_max)):
                raise ValueError("edca.{}: cw_min/cw_max must be of the form 2^k-1, got {}/{}".format(
                    ac.name, p.cw_min, p.cw_max))
            if p.cw_min > p.cw_max:
                raise ValueError("edca.{}: cw_min {} > cw_max {}".format(ac.name, p.cw_min, p.cw_max))
            if p.aifsn < 1:
                raise ValueError("edca.{}: aifsn must be >= 1, got {}".format(ac.name, p.aifsn))
            if p.txop_limit_us < 0:
                raise ValueError("edca.{}: txop_limit_us must be >= 0, got {}".format(ac.name, p.txop_limit_us))
        if self.retry_limit < 0:
            raise ValueError("edca.retry_limit must be >= 0")
        return self

    def aifs_ns(self, ac):
        return (self.sifs_us + self.ac[ac].aifsn * self.slot_us) * NS_PER_US

    @property
    def slot_ns(self):
        return self.slot_us * NS_PER_US

    def txop_limit_ns(self, ac):
        return self.ac[ac].txop_limit_us * NS_PER_US


class AcState(object):
    __slots__ = ("ac", "queue", "backoff", "cw", "ref_ns", "n_drops", "n_buffer_drops", "n_draws")

    def __init__(self, ac, cw_min):
        self.ac = ac
        self.queue = deque()
        self.backoff = None
        self.cw = cw_min
        self.ref_ns = 0
        self.n_drops = 0
        self.n_buffer_drops = 0
        self.n_draws = 0


@dataclass
class Txop:
    txop_id: int
    ac: AccessCategory
    start_ns: int
    end_ns: int
    shared: bool = False
    n_success: int = 0

    def remaining_ns(self, now):
        return max(0, self.end_ns - now)


class DeviceState(object):
    def __init__(self, device_id, role, bss_id, params, rng, contend_acs=None):
        self.device_id = device_id
        self.role = role
        self.bss_id = bss_id
        self.params = params
        self.rng = rng
        acs = contend_acs if contend_acs is not None else list(AccessCategory)
        self.acs = {ac: AcState(ac, params.ac[ac].cw_min) for ac in acs}
        self.txop = None
        self.busy = False
        self.timer_time = None
        self.backoff_log = None

    @property
    def is_ap(self):
        return self.role is Role.AP

    def queue(self, ac):
        return self.acs[ac].queue

    def has_traffic(self, ac=None):
        if ac is not None:
            return ac in self.acs and len(self.acs[ac].queue) > 0
        return any(len(s.queue) for s in self.acs.values())

    def backlog_bytes(self, ac, ll_only=False):
        return sum(m.size_bytes for m in self.acs[ac].queue if m.is_ll or not ll_only)

    def enqueue(self, mpdu):
        state = self.acs[mpdu.ac]
        if len(state.queue) >= self.params.queue_limit:
            state.n_buffer_drops += 1
            return False
        state.queue.append(mpdu)
        return True

    def draw_backoff(self, ac):
        state = self.acs[ac]
        state.backoff = self.rng.uniform_int(0, state.cw)
        state.n_draws += 1
        if self.backoff_log is not None:
            self.backoff_log.append((ac, state.cw, state.backoff))
        return state.backoff

    def double_cw(self, ac):
        state = self.acs[ac]
        state.cw = min(2 * (state.cw + 1) - 1, self.params.ac[ac].cw_max)

    def reset_cw(self, ac):
        self.acs[ac].cw = self.params.ac[ac].cw_min

    def _expiry(self, ac, now):
        state = self.acs[ac]
        t = state.ref_ns + self.params.aifs_ns(ac) + state.backoff * self.params.slot_ns
        return max(t, now)

    def _next_timer(self, now):
        times = [self._expiry(ac, now) for ac, s in self.acs.items()
                 if s.backoff is not None and len(s.queue)]
        if not times:
            self.timer_time = None
            return [CancelTimer()]
        self.timer_time = min(times)
        return [SetTimer(self.timer_time)]

    def advance(self, trigger, now, **kwargs):
        """
        :param trigger: Trigger
        :param now: current instant in ns
        :param kwargs: ac for ENQUEUE/TX_COMPLETE, success for TX_COMPLETE
        :return: list of actions, StartTx / SetTimer / CancelTimer / Yield
        """
        if trigger is Trigger.ENQUEUE:
            return self._on_enqueue(kwargs["ac"], now)
        if trigger is Trigger.MEDIUM_BUSY:
            return self._on_busy(now)
        if trigger is Trigger.MEDIUM_IDLE:
            return self._on_idle(now)
        if trigger is Trigger.TIMER:
            return self._on_timer(now)
        if trigger is Trigger.TX_COMPLETE:
            return self._on_tx_complete(kwargs["ac"], kwargs.get("success", True), now)
        raise ValueError("unknown trigger {}".format(trigger))

    def _on_enqueue(self, ac, now):
        state = self.acs[ac]
        if state.backoff is not None or len(state.queue) == 0:
            return [Yield()]
        self.draw_backoff(ac)
        state.ref_ns = now
        if self.txop is not None or self.busy:
            return [Yield()]
        return self._next_timer(now)

    def _on_busy(self, now):
        self.busy = True
        expired = self.timer_time is not None and self.timer_time <= now
        slot = self.params.slot_ns
        for ac, state in self.acs.items():
            if state.backoff is None:
                continue
            elapsed = (now - state.ref_ns - self.params.aifs_ns(ac)) // slot
            if elapsed > 0:
                state.backoff -= min(elapsed, state.backoff)
            if expired and elapsed >= 0:
                # the timer still fires at this instant: frozen counters expire from here
                state.ref_ns = now - self.params.aifs_ns(ac)
        if expired:
            # expiry at the busy instant still transmits
            return [Yield()]
        self.timer_time = None
        return [CancelTimer()]

    def _on_idle(self, now):
        self.busy = False
        for state in self.acs.values():
            if state.backoff is not None:
                state.ref_ns = now
        if self.txop is not None:
            return [Yield()]
        return self._next_timer(now)

    def _on_timer(self, now):
        self.timer_time = None
        if self.txop is not None:
            return [Yield()]
        due = [ac for ac, s in self.acs.items()
               if s.backoff is not None and len(s.queue) and self._expiry(ac, now) <= now]
        for ac, s in self.acs.items():
            if s.backoff is not None and not len(s.queue):
                s.backoff = None
        if not due:
            return [Yield()] if self.busy else self._next_timer(now)
        winner = max(due)
        for ac in due:
            if ac == winner:
                continue
            # internal collision
            self.double_cw(ac)
            self.draw_backoff(ac)
            self.acs[ac].ref_ns = now
        self.acs[winner].backoff = None
        return [StartTx(winner)]

    def _on_tx_complete(self, ac, success, now):
        self.txop = None
        if success:
            self.reset_cw(ac)
        else:
            self.double_cw(ac)
        state = self.acs[ac]
        state.backoff = None
        if len(state.queue):
            self.draw_backoff(ac)
            state.ref_ns = now
        for other, s in self.acs.items():
            if other != ac and s.backoff is None and len(s.queue):
                self.draw_backoff(other)
                s.ref_ns = now
        if self.busy:
            return [Yield()]
        return self._next_timer(now)

    def resume(self, now):
        """contention restarts after a TXOP that was not won through EDCA (a shared window)."""
        self.txop = None
        for state in self.acs.values():
            if state.backoff is None and len(state.queue):
                self.draw_backoff(state.ac)
                state.ref_ns = now
            elif state.backoff is not None and not self.busy:
                state.ref_ns = max(state.ref_ns, now)
        if self.busy:
            return [Yield()]
        return self._next_timer(now)

    def on_rx_result(self, ac, results):
        """
        apply the outcome of one data PPDU to its MPDUs.
        :param results: list of (mpdu, delivered) in transmission order
        :return: (delivered mpdus, dropped mpdus); failed MPDUs below the
            retry limit are back at the head of the queue in their order
        """
        delivered, dropped, retry = [], [], []
        for mpdu, ok in results:
            if ok:
                delivered.append(mpdu)
            elif mpdu.retries >= self.params.retry_limit:
                dropped.append(mpdu)
            else:
                mpdu.retries += 1
                retry.append(mpdu)
        state = self.acs[ac]
        state.queue.extendleft(reversed(retry))
        state.n_drops += len(dropped)
        return delivered, dropped

    def __repr__(self):
        return "DeviceState({}, {}, bss={})".format(self.device_id, self.role.value, self.bss_id)


def eligible_acs(winning_ac):
    """ACs a TXOP holder may serve: the winning AC and every higher one, highest first."""
    return sorted((ac for ac in AccessCategory if ac >= winning_ac), reverse=True)


def _pick_ampdu(queue, budget_ns, config, receiver=None, ll_only=False, n_subcarriers=None):
    """
    MPDUs build_ampdu() would take, without dequeuing them.
    :return: (receiver, picked mpdus, payload octets, index of the last picked)
    """
    if budget_ns <= 0:
        return receiver, [], 0, -1
    budget_ns = min(budget_ns, config.max_ppdu_ns)
    picked, octets, last = [], 0, -1
    for index, mpdu in enumerate(queue):
        if index >= SCHED_LOOKAHEAD:
            break
        if ll_only and not mpdu.is_ll:
            continue
        if receiver is None:
            receiver = mpdu.destination
        elif mpdu.destination != receiver:
            continue
        try:
            duration = ppdu_duration_ns(octets + mpdu.size_bytes, config.data_mcs, len(picked) + 1, config,
                                        n_subcarriers=n_subcarriers)
        except OversizeError:
            break
        if duration > budget_ns:
            break
        picked.append(mpdu)
        octets += mpdu.size_bytes
        last = index
        if len(picked) == MAX_AMPDU_MPDUS:
            break
    return receiver, picked, octets, last


def _take(queue, picked, last):
    chosen = set(id(m) for m in picked)
    head = [queue.popleft() for _ in range(last + 1)]
    queue.extendleft(reversed([m for m in head if id(m) not in chosen]))


def build_ampdu(queue, ac, budget_ns, config, receiver=None, ll_only=False, n_subcarriers=None,
                tx_device=None):
    """
    dequeue up to 64 MPDUs to one receiver, FIFO, while the PPDU fits the budget.
    :param queue: deque of Mpdu of access category ac
    :param budget_ns: airtime budget of the PPDU, already bounded by the TXOP remaining
    :param receiver: destination to serve, None for the destination of the first eligible MPDU
    :return: Ppdu, or None when the first MPDU alone does not fit
    """
    receiver, picked, octets, last = _pick_ampdu(queue, budget_ns, config, receiver, ll_only, n_subcarriers)
    if not picked:
        return None
    _take(queue, picked, last)
    duration = ppdu_duration_ns(octets, config.data_mcs, len(picked), config, n_subcarriers=n_subcarriers)
    return Ppdu(tx_device, FrameClass.DATA, duration, mpdus={receiver: picked})


def _destinations(device, acs, ll_only=False):
    order = []
    for ac in acs:
        if ac not in device.acs:
            continue
        for index, mpdu in enumerate(device.acs[ac].queue):
            if index >= SCHED_LOOKAHEAD:
                break
            if ll_only and not mpdu.is_ll:
                continue
            if mpdu.destination not in order:
                order.append(mpdu.destination)
    return order


def _has_dest(queue, dest, ll_only):
    return any(m.destination == dest and (m.is_ll or not ll_only) for m in islice(queue, SCHED_LOOKAHEAD))


def dl_mu_allocate(ap, budget_ns, config, acs=None, ll_only=False):
    """
    DL PPDU of an AP holding a TXOP: up to 4 destinations, one 242-tone RU
    each; one destination degenerates to SU full band.

    The lowest AC in acs with traffic is the primary AC. Its destinations
    come first in head-of-queue order, higher ACs fill the remaining RUs,
    and no RU of a higher AC extends the PPDU past the primary AC's RUs.
    When a single RU ends up holding MPDUs, that destination is served SU
    full band instead.
    :param acs: ACs to serve, highest first (default: all)
    :return: (Ppdu, {destination: ac}) or (None, {}) when nothing fits
    """
    acs = [ac for ac in (acs if acs is not None else sorted(ap.acs, reverse=True)) if ac in ap.acs]
    primary = next((ac for ac in reversed(acs) if _destinations(ap, [ac], ll_only)), None)
    if primary is None:
        raise ValueError("AP {} has no queued DL traffic".format(ap.device_id))
    full_band = DATA_SUBCARRIERS[config.bandwidth_mhz]
    chosen = _destinations(ap, [primary] + [ac for ac in acs if ac != primary], ll_only)[:MAX_RUS]
    n_subcarriers = full_band if len(chosen) == 1 else RU242_SUBCARRIERS

    picks, duration = {}, 0
    for dest in chosen:
        if _has_dest(ap.acs[primary].queue, dest, ll_only):
            ac, ru_budget = primary, budget_ns
        else:
            ac = next(a for a in acs if _has_dest(ap.acs[a].queue, dest, ll_only))
            ru_budget = min(budget_ns, duration) if duration else budget_ns
        _, picked, octets, last = _pick_ampdu(ap.acs[ac].queue, ru_budget, config, dest, ll_only, n_subcarriers)
        if picked:
            picks[dest] = (ac, picked, octets, last)
            duration = max(duration, ppdu_duration_ns(octets, config.data_mcs, len(picked), config,
                                                      n_subcarriers=n_subcarriers))
    if not picks:
        return None, {}
    if len(picks) == 1 and n_subcarriers != full_band:
        dest, (ac, _, _, _) = next(iter(picks.items()))
        _, picked, octets, last = _pick_ampdu(ap.acs[ac].queue, budget_ns, config, dest, ll_only, full_band)
        picks = {dest: (ac, picked, octets, last)}
        n_subcarriers = full_band
        duration = ppdu_duration_ns(octets, config.data_mcs, len(picked), config, n_subcarriers=full_band)

    mpdus, acs_used, taken = {}, {}, {}
    for dest, (ac, picked, _, last) in picks.items():
        mpdus[dest] = picked
        acs_used[dest] = ac
        ac_picked, ac_last = taken.get(ac, ([], -1))
        taken[ac] = (ac_picked + picked, max(ac_last, last))
    for ac, (picked, last) in taken.items():
        _take(ap.acs[ac].queue, picked, last)
    if n_subcarriers == full_band:
        return Ppdu(ap.device_id, FrameClass.DATA, duration, mpdus=mpdus), acs_used
    ru_map = {dest: chosen.index(dest) for dest in mpdus}
    return Ppdu(ap.device_id, FrameClass.DATA, duration, mpdus=mpdus, ru_map=ru_map), acs_used


@dataclass
class UlMuPlan:
    """a trigger-based UL MU exchange: trigger, SIFS, TB PPDU, SIFS, multi-STA block-ack.
    tb.mpdus is keyed by the transmitting STA."""
    ap: int
    trigger: Optional[Ppdu] = None
    tb: Optional[Ppdu] = None
    block_ack: Optional[Ppdu] = None
    acs: Dict[int, AccessCategory] = field(default_factory=dict)

    @property
    def empty(self):
        return self.tb is None

    def total_ns(self, config):
        if self.empty:
            return 0
        return self.trigger.duration_ns + self.tb.duration_ns + self.block_ack.duration_ns + 2 * config.sifs_ns


def trigger_ul_mu(ap, stations, ll_only, budget_ns, config):
    """
    plan a trigger-based UL MU exchange over at most 4 STAs with backlog,
    oldest head-of-queue first. the STAs' MPDUs are dequeued into the plan.
    :param stations: DeviceState of the AP's associated STAs
    :return: UlMuPlan, empty when no STA is eligible or nothing fits
    """
    plan = UlMuPlan(ap.device_id)
    candidates = []
    for sta in stations:
        for ac in sorted(sta.acs, reverse=True):
            head = next((m for m in islice(sta.acs[ac].queue, SCHED_LOOKAHEAD) if m.is_ll or not ll_only), None)
            if head is not None:
                candidates.append((head.arrival_ns, sta.device_id, sta, ac))
                break
    if not candidates:
        return plan
    candidates.sort(key=lambda c: (c[0], c[1]))
    chosen = candidates[:MAX_RUS]
    trig = Ppdu(ap.device_id, FrameClass.TRIGGER,
                ctrl_frame_duration_ns(trigger_bytes(len(chosen)), config))
    back = Ppdu(ap.device_id, FrameClass.BLOCK_ACK,
                ctrl_frame_duration_ns(multi_sta_block_ack_bytes(len(chosen)), config))
    tb_budget = budget_ns - trig.duration_ns - back.duration_ns - 2 * config.sifs_ns
    mpdus, duration = {}, 0
    for _, _, sta, ac in chosen:
        ppdu = build_ampdu(sta.acs[ac].queue, ac, tb_budget, config, receiver=ap.device_id,
                           ll_only=ll_only, n_subcarriers=RU242_SUBCARRIERS, tx_device=sta.device_id)
        if ppdu is None:
            continue
        mpdus[sta.device_id] = ppdu.mpdus[ap.device_id]
        plan.acs[sta.device_id] = ac
        duration = max(duration, ppdu.duration_ns)
    if not mpdus:
        return plan
    if len(mpdus) != len(chosen):
        trig.duration_ns = ctrl_frame_duration_ns(trigger_bytes(len(mpdus)), config)
        back.duration_ns = ctrl_frame_duration_ns(multi_sta_block_ack_bytes(len(mpdus)), config)
    plan.trigger = trig
    plan.block_ack = back
    plan.tb = Ppdu(ap.device_id, FrameClass.DATA, duration, mpdus=mpdus,
                   ru_map={sta: ru for ru, sta in enumerate(mpdus)})
    return plan


def block_ack_ns(config):
    return ctrl_frame_duration_ns(BLOCK_ACK_BYTES, config)


def cf_end_ns(config):
    return ctrl_frame_duration_ns(CF_END_BYTES, config)


def truncate_txop(device, now, config):
    """
    CF-End of a TXOP holder with unused time left.
    :return: CF-End Ppdu, or None without an active TXOP or when it does not fit
    """
    if device.txop is None:
        return None
    duration = cf_end_ns(config)
    if device.txop.remaining_ns(now) < duration:
        return None
    return Ppdu(device.device_id, FrameClass.CONTROL, duration)
