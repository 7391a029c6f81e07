"""channel-access-delay gain of Co-TDMA.

the access interval of AP i runs from the start of one successful channel
access to the start of the next. an access is a successful TXOP of i or, in
the coordinated system, a shared window that j grants to i. in both systems
the interval is split into frame exchange time of i and j, overhead,
Co-TDMA time, busy time and idle time:

    u: overhead_u + fe_u,i + fe_u,j + busy_u,j + busy_u,i + idle_u
    c: overhead_c + fe_c,i + fe_c,j + busy_c,j + cotdma + idle_c

frame exchange, overhead and Co-TDMA time come from the TXOP records
labelled while the simulation runs. busy time is what the waiting AP
senses from other devices between the records: busy_j until the last TXOP
of j in the interval starts, busy_i after it ends. the unsensed rest of
those gaps is idle time (AIFS and backoff slots).
"""

from __future__ import absolute_import

import csv
import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .utils.process_utils import NS_PER_US

logger = logging.getLogger(__name__)

SYSTEMS = ("u", "c")
APS = ("i", "j")

GAIN_COLUMNS = ["congestion_level", "gain_exact_us", "gain_lower_bound_us", "gain_approx_us",
                "gain_measured_us", "gain_idle_us", "n_pairs", "n_bound_violations", "n_shared_intervals"]


@dataclass
class TxopRecord:
    ap: int
    txop_id: int
    start_ns: int
    end_ns: int = 0
    success: bool = True
    polling_ns: int = 0
    control_ns: int = 0
    cf_end_ns: int = 0
    shared_ns: int = 0
    fe_ns: int = 0
    shared_ap: Optional[int] = None
    shared_start_ns: int = 0

    @property
    def overhead_ns(self):
        return self.polling_ns + self.control_ns + self.cf_end_ns

    @property
    def shared_end_ns(self):
        return self.shared_start_ns + self.shared_ns

    @property
    def pre_share_fe_ns(self):
        """own frame exchanges of the holder before its shared window."""
        if not self.shared_ns:
            return self.fe_ns
        return max(0, self.shared_start_ns - self.start_ns - self.polling_ns - self.control_ns)


class SensedBusy(object):
    """busy periods one device sensed from other devices, with overlap queries."""

    def __init__(self, intervals=()):
        spans = sorted(intervals)
        self.starts = np.array([s for s, _ in spans], dtype=np.int64)
        self.ends = np.array([e for _, e in spans], dtype=np.int64)
        self._cum = np.concatenate([[0], np.cumsum(self.ends - self.starts)])

    def overlap_ns(self, lo, hi):
        if hi <= lo or not len(self.starts):
            return 0
        k0 = int(np.searchsorted(self.ends, lo, side="right"))
        k1 = int(np.searchsorted(self.starts, hi, side="left"))
        if k1 <= k0:
            return 0
        total = int(self._cum[k1] - self._cum[k0])
        total -= max(0, lo - int(self.starts[k0]))
        total -= max(0, int(self.ends[k1 - 1]) - hi)
        return max(0, total)


@dataclass
class AccessIntervalMeasurement:
    system: str
    ap: int
    first_access_start_us: float
    second_access_start_us: float

    def __post_init__(self):
        if not self.second_access_start_us > self.first_access_start_us:
            raise ValueError("access interval must be positive: {} -> {}".format(
                self.first_access_start_us, self.second_access_start_us))

    @property
    def interval_us(self):
        return self.second_access_start_us - self.first_access_start_us


@dataclass
class IntervalComponents:
    """one access interval of AP i, split into components (us)."""
    system: str
    interval_us: float
    fe_i: float = 0.0
    fe_j: float = 0.0
    overhead: float = 0.0
    cotdma: float = 0.0
    busy_j: float = 0.0
    busy_i: float = 0.0
    idle: float = 0.0
    closed_by_share: bool = False
    j_accesses: int = 0

    def total_us(self):
        return self.fe_i + self.fe_j + self.overhead + self.cotdma + self.busy_j + self.busy_i + self.idle


@dataclass
class GainComponents:
    t_fe: Dict[Tuple[str, str], float] = field(default_factory=dict)
    t_overhead_u: float = None
    t_overhead_c: float = None
    t_busy: Dict[Tuple[str, str], float] = field(default_factory=dict)
    t_cotdma: float = None

    @classmethod
    def zeros(cls):
        return cls({(s, k): 0.0 for s in SYSTEMS for k in APS}, 0.0, 0.0,
                   {("u", "i"): 0.0, ("u", "j"): 0.0, ("c", "j"): 0.0, ("c", "i"): 0.0}, 0.0)

    def validate(self):
        needed = [("t_fe", (s, k)) for s in SYSTEMS for k in APS]
        needed += [("t_busy", ("u", "i")), ("t_busy", ("u", "j")), ("t_busy", ("c", "j"))]
        for name, key in needed:
            if key not in getattr(self, name):
                raise KeyError("missing gain component {}{}".format(name, key))
        for name in ("t_overhead_u", "t_overhead_c", "t_cotdma"):
            if getattr(self, name) is None:
                raise KeyError("missing gain component {}".format(name))
        values = list(self.t_fe.values()) + list(self.t_busy.values())
        values += [self.t_overhead_u, self.t_overhead_c, self.t_cotdma]
        if min(values) < 0:
            raise ValueError("gain components must be >= 0")
        return self

    @property
    def busy_ci(self):
        # zero when i's next access is a shared window
        return self.t_busy.get(("c", "i"), 0.0)


def access_delay_gain(c):
    c.validate()
    uncoordinated = (c.t_overhead_u + c.t_fe[("u", "i")] + c.t_fe[("u", "j")]
                     + c.t_busy[("u", "j")] + c.t_busy[("u", "i")])
    coordinated = (c.t_overhead_c + c.t_fe[("c", "i")] + c.t_fe[("c", "j")]
                   + c.t_busy[("c", "j")] + c.busy_ci + c.t_cotdma)
    return uncoordinated - coordinated


def access_delay_gain_lower_bound(c):
    """the gain with equal frame-exchange times in both systems."""
    c.validate()
    return (c.t_overhead_u + c.t_busy[("u", "j")] + c.t_busy[("u", "i")]
            - (c.t_overhead_c + c.t_busy[("c", "j")] + c.busy_ci + c.t_cotdma))


def access_delay_gain_approx(t_busy_ui, t_cotdma):
    if t_busy_ui < 0 or t_cotdma < 0:
        raise ValueError("busy and Co-TDMA times must be >= 0, got {} and {}".format(t_busy_ui, t_cotdma))
    return t_busy_ui - t_cotdma


@dataclass
class _Access:
    start_ns: int
    record: TxopRecord
    shared: bool


def _accesses(records_i, records_j, ap_i):
    accesses = [_Access(r.start_ns, r, False) for r in records_i if r.success]
    accesses += [_Access(r.shared_start_ns, r, True) for r in records_j
                 if r.shared_ns > 0 and r.shared_ap == ap_i]
    accesses.sort(key=lambda acc: acc.start_ns)
    return accesses


def access_intervals(records_i, system, records_j=()):
    if not records_i:
        return []
    ap = records_i[0].ap
    starts = [acc.start_ns for acc in _accesses(records_i, records_j, ap)]
    return [AccessIntervalMeasurement(system, ap, a / float(NS_PER_US), b / float(NS_PER_US))
            for a, b in zip(starts, starts[1:])]


def _union(spans):
    merged = []
    for s, e in sorted(spans):
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return merged


def _sensed(busy):
    if busy is None:
        return SensedBusy()
    return busy if isinstance(busy, SensedBusy) else SensedBusy(busy)


def extract_interval_components(records_i, records_j, system, busy_i=None, busy_j=None):
    """
    split every access interval of AP i exactly into its components.

    a shared window granted to i closes the interval it ends and opens the
    next one, with the window as i's frame exchange. failed TXOPs in the
    interval are overhead.
    :param records_i: TxopRecord of AP i in start order
    :param records_j: TxopRecord of AP j in start order
    :param system: "u" or "c"
    :param busy_i: sensed busy periods of AP i, (start_ns, end_ns) pairs or SensedBusy
    :param busy_j: sensed busy periods of AP j
    :return: list of IntervalComponents
    """
    if system not in SYSTEMS:
        raise ValueError("system must be one of {}, got {!r}".format(SYSTEMS, system))
    if not records_i:
        return []
    ap_i = records_i[0].ap
    sensed_i, sensed_j = _sensed(busy_i), _sensed(busy_j)
    accesses = _accesses(records_i, records_j, ap_i)
    j_starts = [r.start_ns for r in records_j]
    i_failed = [r for r in records_i if not r.success]
    failed_starts = [r.start_ns for r in i_failed]
    us = float(NS_PER_US)
    rows = []
    for first, second in zip(accesses, accesses[1:]):
        a, b = first.start_ns, second.start_ns
        fe_i = fe_j = overhead = cotdma = 0
        rec = first.record
        if first.shared:
            first_end = min(rec.end_ns, b)
            fe_i = rec.shared_ns
            tail = max(0, first_end - rec.shared_end_ns)
            tail_fe = min(tail, max(0, rec.fe_ns - rec.pre_share_fe_ns))
            fe_j += tail_fe
            overhead += tail - tail_fe
        else:
            first_end = min(rec.end_ns, b)
            fe_i, cotdma = rec.fe_ns, rec.shared_ns
            overhead += max(0, first_end - a - fe_i - cotdma)
        labelled = [(a, first_end)]
        last_j, n_j = None, 0
        k = bisect_left(j_starts, first_end)
        while k < len(records_j) and records_j[k].start_ns < b:
            rj = records_j[k]
            k += 1
            if not rj.success:
                continue
            if rj.shared_ns > 0 and rj.shared_ap == ap_i and rj.shared_start_ns == b:
                end = b
                fe = rj.pre_share_fe_ns
            else:
                end = min(rj.end_ns, b)
                fe = min(rj.fe_ns, end - rj.start_ns)
            fe_j += fe
            overhead += end - rj.start_ns - fe
            labelled.append((rj.start_ns, end))
            last_j = (rj.start_ns, end)
            n_j += 1
        failed = [(r.start_ns, min(r.end_ns, b)) for r in i_failed[bisect_left(failed_starts, first_end):]
                  if r.start_ns < b]
        failed += [(r.start_ns, min(r.end_ns, b)) for r in records_j[bisect_left(j_starts, first_end):]
                   if r.start_ns < b and not r.success]
        covered = _union(labelled + failed)
        overhead += sum(e - s for s, e in covered) - sum(e - s for s, e in labelled)
        busy_i_ns = busy_j_ns = idle = 0
        cursor = a
        for s, e in covered + [[b, b]]:
            if s > cursor:
                if last_j is not None and s <= last_j[0]:
                    busy = sensed_j.overlap_ns(cursor, s)
                    busy_j_ns += busy
                else:
                    busy = sensed_i.overlap_ns(cursor, s)
                    busy_i_ns += busy
                idle += s - cursor - busy
            cursor = max(cursor, e)
        rows.append(IntervalComponents(system, (b - a) / us, fe_i / us, fe_j / us, overhead / us, cotdma / us,
                                       busy_j_ns / us, busy_i_ns / us, idle / us, second.shared, n_j))
    return rows


def _fe_total(row):
    return row.fe_i + row.fe_j


def _components(u_rows, c_rows, reduce):
    return GainComponents(
        t_fe={("u", "i"): reduce([r.fe_i for r in u_rows]), ("u", "j"): reduce([r.fe_j for r in u_rows]),
              ("c", "i"): reduce([r.fe_i for r in c_rows]), ("c", "j"): reduce([r.fe_j for r in c_rows])},
        t_overhead_u=reduce([r.overhead for r in u_rows]),
        t_overhead_c=reduce([r.overhead for r in c_rows]),
        t_busy={("u", "i"): reduce([r.busy_i for r in u_rows]), ("u", "j"): reduce([r.busy_j for r in u_rows]),
                ("c", "j"): reduce([r.busy_j for r in c_rows]), ("c", "i"): reduce([r.busy_i for r in c_rows])},
        t_cotdma=reduce([r.cotdma for r in c_rows]),
    )


def mean_components(u_rows, c_rows):
    if not u_rows or not c_rows:
        raise ValueError("need intervals of both systems, got {} and {}".format(len(u_rows), len(c_rows)))
    return _components(u_rows, c_rows, lambda xs: float(np.mean(xs)))


def measured_gain(u_rows, c_rows):
    return float(np.mean([r.interval_us for r in u_rows]) - np.mean([r.interval_us for r in c_rows]))


def idle_gain(u_rows, c_rows):
    return float(np.mean([r.idle for r in u_rows]) - np.mean([r.idle for r in c_rows]))


def _conditional(rows, keep, what):
    kept = [r for r in rows if keep(r)]
    if not kept and rows:
        logger.warning("no access interval %s, using all %d", what, len(rows))
        return list(rows)
    return kept


def shared_access_intervals(c_rows):
    """coordinated intervals ending in a shared window granted to i; all of them when none does."""
    return _conditional(c_rows, lambda r: r.closed_by_share, "ends in a shared window")


def contended_access_intervals(u_rows):
    """uncoordinated intervals with a TXOP of j between the two accesses of i; all of them when none has one."""
    return _conditional(u_rows, lambda r: r.j_accesses > 0, "holds a TXOP of j")


def paired_gain_rows(u_rows, c_rows):
    """
    couple the intervals of both systems by quantile of their frame-exchange
    time and evaluate the exact gain and its lower bound on every pair.
    the bound exceeds the exact gain exactly when the uncoordinated member of
    a pair spent less time in frame exchanges than the coordinated one.
    """
    n = min(len(u_rows), len(c_rows))
    if n == 0:
        return []
    u_sorted, c_sorted = sorted(u_rows, key=_fe_total), sorted(c_rows, key=_fe_total)
    rows = []
    for k in range(n):
        q = k / float(n - 1) if n > 1 else 0.0
        u = u_sorted[int(round(q * (len(u_sorted) - 1)))]
        c = c_sorted[int(round(q * (len(c_sorted) - 1)))]
        comp = _components([u], [c], lambda xs: xs[0])
        exact = access_delay_gain(comp)
        bound = access_delay_gain_lower_bound(comp)
        rows.append({"index": k, "exact_us": exact, "lower_bound_us": bound,
                     "measured_us": u.interval_us - c.interval_us, "violation": bound > exact + 1e-6})
    return rows


def gain_report_rows(congestion_level, u_rows, c_rows):
    """
    gain of the accesses i gains through Co-TDMA: uncoordinated intervals in
    which j held a TXOP against coordinated intervals closed by a shared
    window. measured gain = exact gain + idle gain.
    """
    u_used, c_used = contended_access_intervals(u_rows), shared_access_intervals(c_rows)
    comp = mean_components(u_used, c_used)
    pairs = paired_gain_rows(u_used, c_used)
    return {
        "congestion_level": congestion_level,
        "gain_exact_us": access_delay_gain(comp),
        "gain_lower_bound_us": access_delay_gain_lower_bound(comp),
        "gain_approx_us": access_delay_gain_approx(comp.t_busy[("u", "i")], comp.t_cotdma),
        "gain_measured_us": measured_gain(u_used, c_used),
        "gain_idle_us": idle_gain(u_used, c_used),
        "n_pairs": len(pairs),
        "n_bound_violations": sum(1 for p in pairs if p["violation"]),
        "n_shared_intervals": sum(1 for r in c_rows if r.closed_by_share),
    }


def write_gain_report(path, rows):
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=GAIN_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("{:.3f}".format(v) if isinstance(v, float) else v) for k, v in row.items()})
