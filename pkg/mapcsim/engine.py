"""the discrete-event kernel of mapcsim.
virtual clock in integer nanoseconds, a heap of events ordered by
(fire_time, sequence), cancellable handles and seeded random streams.
"""

from __future__ import absolute_import

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)


class CausalityError(ValueError):
    pass


class EventKind(IntEnum):
    ARRIVAL = 0
    TX_START = 1
    TX_END = 2
    BACKOFF = 3
    TIMER = 4


@dataclass(order=True)
class Event:
    fire_time: int
    sequence: int
    kind: EventKind = field(compare=False)
    target: Any = field(compare=False, default=None)
    action: Optional[Callable[[], None]] = field(compare=False, default=None, repr=False)
    payload: Any = field(compare=False, default=None, repr=False)


class EventHandle(object):
    __slots__ = ("event", "_state")

    _PENDING, _FIRED, _CANCELLED = 0, 1, 2

    def __init__(self, event):
        self.event = event
        self._state = EventHandle._PENDING

    @property
    def fire_time(self):
        return self.event.fire_time

    @property
    def pending(self):
        return self._state == EventHandle._PENDING


class Simulator(object):
    def __init__(self):
        self._now = 0
        self._queue = []
        self._sequence = itertools.count()
        self._fired = 0

    def now(self):
        return self._now

    def schedule(self, fire_time, kind=EventKind.TIMER, target=None, action=None, payload=None):
        """
        put an event in the queue.
        :param fire_time: absolute simulated time in ns, must not be before now()
        :return: EventHandle, pass it to cancel()
        """
        fire_time = int(fire_time)
        if fire_time < self._now:
            raise CausalityError("event at {} ns is before the clock ({} ns)".format(fire_time, self._now))
        event = Event(fire_time, next(self._sequence), kind, target, action, payload)
        handle = EventHandle(event)
        heapq.heappush(self._queue, (event.fire_time, event.sequence, handle))
        return handle

    def schedule_in(self, delay, kind=EventKind.TIMER, target=None, action=None, payload=None):
        return self.schedule(self._now + int(delay), kind, target, action, payload)

    def cancel(self, handle):
        if handle is None or handle._state != EventHandle._PENDING:
            return False
        handle._state = EventHandle._CANCELLED
        return True

    def pending(self):
        return sum(1 for _, _, h in self._queue if h._state == EventHandle._PENDING)

    def peek_time(self):
        while self._queue and self._queue[0][2]._state != EventHandle._PENDING:
            heapq.heappop(self._queue)
        if not self._queue:
            return None
        return self._queue[0][0]

    def run_until(self, t_end):
        """
        fire every pending event with fire_time <= t_end, in (fire_time, sequence) order.
        the clock ends at t_end.
        :return: number of events fired by this call
        """
        t_end = int(t_end)
        if t_end < self._now:
            raise CausalityError("run_until({}) is before the clock ({} ns)".format(t_end, self._now))
        fired = 0
        queue = self._queue
        while queue:
            fire_time, _, handle = queue[0]
            if fire_time > t_end:
                break
            heapq.heappop(queue)
            if handle._state != EventHandle._PENDING:
                continue
            handle._state = EventHandle._FIRED
            self._now = fire_time
            fired += 1
            if handle.event.action is not None:
                handle.event.action()
        self._now = t_end
        self._fired += fired
        return fired

    @property
    def fired_total(self):
        return self._fired


class Process(object):
    """drive a generator that yields delays in ns.
    the value sent back into the generator after a delay is None; a process
    finishes when its generator returns, and on_done (if set) gets the return value.
    """

    def __init__(self, sim, generator, on_done=None, target=None):
        self._sim = sim
        self._gen = generator
        self._on_done = on_done
        self._target = target
        self.finished = False
        self.result = None

    def start(self):
        self._step()
        return self

    def _step(self):
        try:
            delay = next(self._gen)
        except StopIteration as e:
            self.finished = True
            self.result = e.value
            if self._on_done is not None:
                self._on_done(e.value)
            return
        if delay is None or delay < 0:
            raise CausalityError("process yielded a bad delay: {}".format(delay))
        self._sim.schedule_in(delay, EventKind.TIMER, self._target, self._step)


# stream kinds
STREAM_PLACEMENT = 1
STREAM_BACKOFF = 2
STREAM_TRAFFIC = 3


def make_stream_id(kind, bss=0, index=0, sub=0):
    """pack (kind, bss, index, sub) into one stable integer stream id."""
    if not (0 <= bss < 1000 and 0 <= index < 1000 and 0 <= sub < 1000):
        raise ValueError("stream id fields out of range: {}".format((kind, bss, index, sub)))
    return ((kind * 1000 + bss) * 1000 + index) * 1000 + sub


class RngStream(object):
    """one independent random stream, derived from (seed, stream_id)."""

    def __init__(self, seed, stream_id):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def uniform_int(self, low, high):
        """uniform integer in [low, high], both inclusive."""
        return int(self.generator.integers(low, high + 1))

    def random(self):
        return float(self.generator.random())

    def __repr__(self):
        return "RngStream(seed={}, stream_id={})".format(self.seed, self.stream_id)
