"""frame, grant and arrival traces of one simulation run, their text
writers and the protocol checker that replays a frame trace.
"""

from __future__ import absolute_import

import bisect
import csv
import logging
from collections import defaultdict, namedtuple

logger = logging.getLogger(__name__)

FRAME_COLUMNS = ["time_us", "device", "event", "ac", "n_mpdus", "airtime_us", "outcome", "txop_id", "ll_only"]
GRANT_COLUMNS = ["time_us", "sharing_ap", "shared_ap", "duration_us", "dl_ll_bytes", "ul_ll_bytes"]
ARRIVAL_COLUMNS = ["time_us", "flow_id", "model", "direction", "size_bytes"]

FrameRecord = namedtuple("FrameRecord", FRAME_COLUMNS)
GrantRecord = namedtuple("GrantRecord", GRANT_COLUMNS)
ArrivalRecord = namedtuple("ArrivalRecord", ARRIVAL_COLUMNS)

COORDINATION_EVENTS = ("icf", "icr", "mu_rts_txs")
SHARED_DATA_EVENTS = ("shared_dl_data", "shared_ul_tb")


def _fmt(value):
    if isinstance(value, float):
        return "{:.3f}".format(value)
    if value is None:
        return ""
    return str(value)


class _TextWriter(object):
    def __init__(self, path, columns):
        self.path = path
        self._fp = open(path, "w")
        self._fp.write(",".join(columns) + "\n")
        self.n_lines = 0

    def write(self, record):
        self._fp.write(",".join(_fmt(v) for v in record) + "\n")
        self.n_lines += 1

    def close(self):
        if self._fp is not None:
            self._fp.close()
            self._fp = None


class ArrivalTraceWriter(_TextWriter):
    """one line per application packet arrival."""

    def __init__(self, path):
        super(ArrivalTraceWriter, self).__init__(path, ARRIVAL_COLUMNS)


class FrameTraceWriter(_TextWriter):
    def __init__(self, path):
        super(FrameTraceWriter, self).__init__(path, FRAME_COLUMNS)


class GrantTraceWriter(_TextWriter):
    def __init__(self, path):
        super(GrantTraceWriter, self).__init__(path, GRANT_COLUMNS)


class TraceRecorder(object):
    """
    collects trace records of one run. records are kept in memory when
    keep=True, and streamed to the writers that are set.
    """

    def __init__(self, frames=None, grants=None, arrivals=None, keep=False):
        self.frame_writer = frames
        self.grant_writer = grants
        self.arrival_writer = arrivals
        self.keep = keep
        self.frames = []
        self.grants = []
        self.arrivals = []

    @property
    def wants_frames(self):
        return self.keep or self.frame_writer is not None

    @property
    def wants_arrivals(self):
        return self.keep or self.arrival_writer is not None

    def frame(self, record):
        if self.keep:
            self.frames.append(record)
        if self.frame_writer is not None:
            self.frame_writer.write(record)

    def grant(self, record):
        if self.keep:
            self.grants.append(record)
        if self.grant_writer is not None:
            self.grant_writer.write(record)

    def arrival(self, record):
        if self.keep:
            self.arrivals.append(record)
        if self.arrival_writer is not None:
            self.arrival_writer.write(record)

    def close(self):
        for w in (self.frame_writer, self.grant_writer, self.arrival_writer):
            if w is not None:
                w.close()


def read_frame_trace(path):
    with open(path) as fp:
        return [FrameRecord(float(r["time_us"]), r["device"], r["event"], r["ac"], int(r["n_mpdus"]),
                            float(r["airtime_us"]), r["outcome"], int(r["txop_id"]), r["ll_only"])
                for r in csv.DictReader(fp)]


def read_grant_trace(path):
    with open(path) as fp:
        return [GrantRecord(float(r["time_us"]), int(r["sharing_ap"]), int(r["shared_ap"]),
                            float(r["duration_us"]), int(r["dl_ll_bytes"]), int(r["ul_ll_bytes"]))
                for r in csv.DictReader(fp)]


def check_trace(frames, grants, coordinated=True, tol_us=1e-3):
    """
    replay a frame trace and its grant trace against the protocol rules.
    :return: dict rule -> list of violation messages (empty lists when clean)
    """
    violations = defaultdict(list)
    frames = sorted(frames, key=lambda r: (float(r.time_us), int(r.txop_id)))

    if not coordinated:
        for r in frames:
            if r.event in COORDINATION_EVENTS:
                violations["baseline_purity"].append("{} at {} us in an uncoordinated run".format(r.event, r.time_us))

    txs_per_txop = defaultdict(int)
    txop_window = {}
    for r in frames:
        if r.event == "mu_rts_txs":
            txs_per_txop[r.txop_id] += 1
        elif r.event == "txop_start":
            txop_window[r.txop_id] = (float(r.time_us), float(r.time_us) + float(r.airtime_us), r.device)
        elif r.event == "plan" and r.ac == "COTDMA_SHARE" and r.outcome != "dl:0|ul:0":
            violations["priority_soundness"].append(
                "share at {} us with an unserved opportunity ({})".format(r.time_us, r.outcome))
    for txop_id, n in txs_per_txop.items():
        if n > 1:
            violations["single_share"].append("txop {} issued {} grants".format(txop_id, n))

    shared = [r for r in frames if r.event.startswith("shared_")]
    shared_times = [float(r.time_us) for r in shared]
    for g in grants:
        start, end = float(g.time_us), float(g.time_us) + float(g.duration_us)
        owner = [w for w in txop_window.values() if w[2] == str(g.sharing_ap) and w[0] <= start <= w[1]]
        if not owner:
            violations["containment"].append("grant at {} us outside any TXOP of AP {}".format(start, g.sharing_ap))
        elif end > owner[0][1] + tol_us:
            violations["containment"].append("grant at {} us ends after the TXOP limit".format(start))
        lo = bisect.bisect_left(shared_times, start - tol_us)
        hi = bisect.bisect_right(shared_times, end + tol_us)
        for r in shared[lo:hi]:
            t = float(r.time_us)
            if t + float(r.airtime_us) > end + tol_us:
                violations["containment"].append("{} at {} us ends after the window".format(r.event, t))
            if r.event in SHARED_DATA_EVENTS and r.ll_only != "1":
                violations["role_legality"].append("{} at {} us carries non-LL traffic".format(r.event, t))
    for rule in ("single_share", "containment", "role_legality", "priority_soundness", "baseline_purity"):
        violations.setdefault(rule, [])
    return dict(violations)
