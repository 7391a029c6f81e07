"""the shared wireless channel.

one Medium per simulation run: a received-power matrix (tx -> rx, dBm),
the set of active transmissions, per-device busy views (physical carrier
sense, own transmission and NAV) and the reception outcome of every link
of a transmission when it ends.
"""

from __future__ import absolute_import

import itertools
import logging
from enum import Enum

import numpy as np

from .engine import EventKind
from .phy import captured, dbm_to_mw, path_loss_db

logger = logging.getLogger(__name__)


class ChannelState(Enum):
    IDLE = "idle"
    BUSY = "busy"


class Outcome(Enum):
    DELIVERED = "delivered"
    COLLIDED = "collided"


def resolve_reception(signals, config):
    """
    outcome of every addressed signal overlapping at one receiver.
    a signal is delivered when it is above PD and leads the sum of the
    signals of other groups by the capture margin; everything else collides.
    :param signals: list of (key, rx_dbm, addressed, group); signals of one
        group (one composite transmission) never interfere with each other
    :param config: PhyConfig
    :return: dict key -> Outcome, for addressed signals only
    """
    outcomes = {}
    for key, power, addressed, group in signals:
        if not addressed:
            continue
        others = [p for _, p, _, g in signals if g != group]
        outcomes[key] = Outcome.DELIVERED if captured(power, others, config) else Outcome.COLLIDED
    return outcomes


def rx_power_matrix(positions, tx_power_dbm, walls=None, wall_loss_db=7.0):
    """
    received power in dBm of every (tx, rx) pair, diagonal is nan.
    :param positions: (n, 2) array of coordinates in meters
    :param walls: optional (n, n) integer array of wall counts
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    rx = np.full((n, n), np.nan)
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            d = float(np.hypot(*(positions[a] - positions[b])))
            n_walls = 0 if walls is None else int(walls[a][b])
            rx[a, b] = tx_power_dbm - path_loss_db(max(d, 1e-3), n_walls, wall_loss_db)
    return rx


class Transmission(object):
    """one over-the-air transmission, possibly from several sources (TB PPDU,
    multi-STA block-ack). links are (source, receiver) pairs."""

    __slots__ = ("tx_id", "links", "sources", "start", "end", "kind", "nav_end",
                 "resets_nav", "payload", "overlaps", "outcome", "cancelled")

    def __init__(self, tx_id, links, start, end, kind, nav_end=None, resets_nav=False, payload=None, sources=None):
        self.tx_id = tx_id
        self.links = list(links)
        self.sources = tuple(sorted(set(sources if sources is not None else (s for s, _ in self.links))))
        self.start = start
        self.end = end
        self.kind = kind
        self.nav_end = nav_end
        self.resets_nav = resets_nav
        self.payload = payload
        self.overlaps = []
        self.outcome = None
        self.cancelled = False

    def delivered(self, source, receiver):
        if self.outcome is None:
            raise ValueError("transmission {} has not ended".format(self.tx_id))
        return self.outcome.get((source, receiver)) is Outcome.DELIVERED

    def n_delivered(self):
        return sum(1 for o in self.outcome.values() if o is Outcome.DELIVERED)

    def __repr__(self):
        return "Transmission({}, {}, {}->{})".format(self.tx_id, self.kind, self.start, self.end)


class Medium(object):
    def __init__(self, sim, rx_dbm, config):
        self._sim = sim
        self.config = config
        self.rx_dbm = np.asarray(rx_dbm, dtype=float)
        self.n_devices = self.rx_dbm.shape[0]
        self._rx_mw = np.nan_to_num(dbm_to_mw(self.rx_dbm), nan=0.0)
        self._ids = itertools.count()
        self.active = []
        self._listeners = [None] * self.n_devices
        self._busy = [False] * self.n_devices
        self._nav = [0] * self.n_devices
        self._nav_handles = [None] * self.n_devices
        self._sensed = [False] * self.n_devices
        self._sensed_since = [0] * self.n_devices
        self._sensed_total = [0] * self.n_devices
        self._record_intervals = frozenset()
        self._intervals = [[] for _ in range(self.n_devices)]
        self.n_transmissions = 0

    def attach(self, device_id, listener):
        """listener gets medium_busy(t) and medium_idle(t) on busy-view transitions."""
        self._listeners[device_id] = listener

    def record_intervals(self, enable=True, devices=None):
        """keep the sensed busy periods of devices (all by default) for sensed_intervals()."""
        if not enable:
            self._record_intervals = frozenset()
        else:
            self._record_intervals = frozenset(range(self.n_devices) if devices is None else devices)

    # carrier sense
    def can_decode(self, source, receiver):
        return self.rx_dbm[source, receiver] >= self.config.pd_threshold_dbm

    def _phys_busy(self, device):
        energy_mw = 0.0
        for tx in self.active:
            if device in tx.sources:
                continue
            powers = [self.rx_dbm[s, device] for s in tx.sources]
            if max(powers) >= self.config.pd_threshold_dbm:
                return True
            energy_mw += sum(self._rx_mw[s, device] for s in tx.sources)
        if energy_mw <= 0.0:
            return False
        return 10.0 * np.log10(energy_mw) >= self.config.ed_threshold_dbm

    def _transmitting(self, device):
        return any(device in tx.sources for tx in self.active)

    def channel_state(self, device, time=None):
        """physical carrier sense of device at the current instant."""
        if not 0 <= device < self.n_devices:
            raise KeyError("unknown device {}".format(device))
        if time is not None and int(time) != self._sim.now():
            raise ValueError("channel_state is only defined at the current instant")
        return ChannelState.BUSY if self._phys_busy(device) else ChannelState.IDLE

    def is_busy(self, device):
        """busy view used for channel access: carrier sense, own transmission or NAV."""
        return self._busy[device]

    def nav(self, device):
        return self._nav[device]

    def sensed_busy_ns(self, device):
        total = self._sensed_total[device]
        if self._sensed[device]:
            total += self._sim.now() - self._sensed_since[device]
        return total

    def sensed_intervals(self, device):
        return list(self._intervals[device])

    # transmissions
    def start_tx(self, links, duration_ns, kind, nav_end=None, resets_nav=False, payload=None, on_end=None,
                 sources=None):
        """
        put a transmission on the air now; outcomes are resolved at its end,
        before any other event scheduled for the same instant after this call.
        """
        now = self._sim.now()
        tx = Transmission(next(self._ids), links, now, now + int(duration_ns), kind,
                          nav_end=nav_end, resets_nav=resets_nav, payload=payload, sources=sources)
        for other in self.active:
            other.overlaps.append(tx)
            tx.overlaps.append(other)
        self.active.append(tx)
        self.n_transmissions += 1
        self._refresh(now)

        def end():
            self._end_tx(tx)
            if on_end is not None:
                on_end(tx)

        self._sim.schedule(tx.end, EventKind.TX_END, tx.sources, end, tx)
        return tx

    def _end_tx(self, tx):
        now = self._sim.now()
        self.active.remove(tx)
        tx.outcome = self._resolve(tx)
        self._apply_nav(tx, now)
        self._refresh(now)

    def _resolve(self, tx):
        outcome = {}
        for source, receiver in tx.links:
            if any(receiver in other.sources for other in tx.overlaps) or receiver in tx.sources:
                outcome[(source, receiver)] = Outcome.COLLIDED
                continue
            signals = [((source, receiver), self.rx_dbm[source, receiver], True, tx.tx_id)]
            for other in tx.overlaps:
                for s in other.sources:
                    if s != receiver:
                        signals.append(((s, other.tx_id), self.rx_dbm[s, receiver], False, other.tx_id))
            outcome[(source, receiver)] = resolve_reception(signals, self.config)[(source, receiver)]
        return outcome

    def _decodes(self, tx, device):
        if device in tx.sources:
            return False
        if any(device in other.sources for other in tx.overlaps):
            return False
        best = max(tx.sources, key=lambda s: self.rx_dbm[s, device])
        interferers = [self.rx_dbm[s, device] for other in tx.overlaps for s in other.sources]
        return captured(self.rx_dbm[best, device], interferers, self.config)

    def _apply_nav(self, tx, now):
        receivers = set(r for _, r in tx.links)
        for device in range(self.n_devices):
            if not self._decodes(tx, device):
                continue
            if tx.resets_nav:
                self._nav[device] = 0
                self._sim.cancel(self._nav_handles[device])
                self._nav_handles[device] = None
            elif tx.nav_end is not None and device not in receivers and tx.nav_end > max(now, self._nav[device]):
                self._nav[device] = tx.nav_end
                self._sim.cancel(self._nav_handles[device])
                self._nav_handles[device] = self._sim.schedule(tx.nav_end, EventKind.TIMER, device,
                                                               self._nav_expired)

    def _nav_expired(self):
        self._refresh(self._sim.now())

    def _refresh(self, now):
        changed = []
        for device in range(self.n_devices):
            sensed = self._phys_busy(device)
            if sensed != self._sensed[device]:
                if sensed:
                    self._sensed_since[device] = now
                else:
                    self._sensed_total[device] += now - self._sensed_since[device]
                    if device in self._record_intervals:
                        self._intervals[device].append((self._sensed_since[device], now))
                self._sensed[device] = sensed
            busy = sensed or self._nav[device] > now or self._transmitting(device)
            if busy != self._busy[device]:
                self._busy[device] = busy
                changed.append((device, busy))
        for device, busy in changed:
            listener = self._listeners[device]
            if listener is None:
                continue
            if busy:
                listener.medium_busy(now)
            else:
                listener.medium_idle(now)
