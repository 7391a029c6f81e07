"""latency, jitter and throughput of one run, and their aggregation over runs."""

from __future__ import absolute_import

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from statsmodels.stats.weightstats import DescrStatsW

from .utils.process_utils import NS_PER_US

logger = logging.getLogger(__name__)

# a cell is (bss, co_bss, ll, direction, model); groups are unions of cells
GROUPS = {
    "co_bss_ll": lambda co, ll, d, m: co and ll,
    "co_bss_ll_dl": lambda co, ll, d, m: co and ll and d == "DL",
    "co_bss_ll_ul": lambda co, ll, d, m: co and ll and d == "UL",
    "non_co_bss_ll": lambda co, ll, d, m: not co and ll,
    "co_bss_vc": lambda co, ll, d, m: co and m == "VC",
    "co_bss_non_ll": lambda co, ll, d, m: co and not ll,
    "non_co_bss_non_ll": lambda co, ll, d, m: not co and not ll,
    "all_ll": lambda co, ll, d, m: ll,
    "all": lambda co, ll, d, m: True,
}

METRICS = ("p95_latency_us", "p50_latency_us", "p5_latency_us", "mean_latency_us", "jitter_us",
           "n_samples", "throughput_bps", "mpdu_loss_count", "buffer_drop_count")

SUMMARY_COLUMNS = ["scenario", "system", "vc_stas", "group", "metric", "mean", "ci_low", "ci_high", "n_iter"]
RAW_COLUMNS = ["scenario", "system", "vc_stas", "seed", "bss", "co_bss", "ll", "direction", "model", "latency_us"]


def percentile(samples, p):
    """nearest-rank percentile: the value at rank ceil(p * n) of the ascending sort."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("percentile of an empty sample set")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1], got {}".format(p))
    rank = int(math.ceil(p * samples.size))
    return float(np.partition(samples, rank - 1)[rank - 1])


def jitter(samples):
    """population standard deviation of the latencies."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ValueError("jitter needs at least 2 samples, got {}".format(samples.size))
    return float(np.std(samples))


def throughput_bps(delivered_bytes, window_us):
    """
    :param delivered_bytes: iterable of MAC payload sizes of delivered MPDUs, or their sum
    """
    if window_us <= 0:
        raise ValueError("window_us must be > 0, got {}".format(window_us))
    total = delivered_bytes if np.isscalar(delivered_bytes) else sum(delivered_bytes)
    return 8.0 * total / (window_us * 1e-6)


@dataclass
class LatencySample:
    flow_id: int
    bss_id: int
    is_co_bss: bool
    is_ll: bool
    direction: str
    enqueue_time_us: float
    delivery_time_us: float

    def __post_init__(self):
        if self.delivery_time_us < self.enqueue_time_us:
            raise ValueError("delivery before enqueue: {} < {}".format(self.delivery_time_us, self.enqueue_time_us))

    @property
    def latency_us(self):
        return self.delivery_time_us - self.enqueue_time_us


@dataclass
class GroupStats:
    p95_latency_us: float = float("nan")
    p50_latency_us: float = float("nan")
    p5_latency_us: float = float("nan")
    mean_latency_us: float = float("nan")
    jitter_us: float = float("nan")
    n_samples: int = 0
    throughput_bps: float = 0.0
    mpdu_loss_count: int = 0
    buffer_drop_count: int = 0


@dataclass
class RunReport:
    scenario: str
    system: str
    n_vc_stas: int
    seed: int
    groups: Dict[str, GroupStats] = field(default_factory=dict)
    network_throughput_bps: float = 0.0
    samples: Dict[tuple, np.ndarray] = field(default_factory=dict, repr=False)
    counters: Dict[str, int] = field(default_factory=dict)
    txop_records: Dict[int, list] = field(default_factory=dict, repr=False)
    busy_intervals: Dict[int, list] = field(default_factory=dict, repr=False)

    def group_samples(self, group):
        pred = GROUPS[group]
        parts = [v for k, v in sorted(self.samples.items()) if pred(*k[1:])]
        return np.concatenate(parts) if parts else np.empty(0)


def _cell(flow, co_bss):
    return (flow.bss, flow.bss in co_bss, flow.is_ll, flow.direction.value, flow.spec.model.value)


class MetricsCollector(object):
    """per-run collection of delivered MPDUs, application-packet latencies and losses."""

    def __init__(self, co_bss=(), warmup_ns=0):
        self.co_bss = set(co_bss)
        self.warmup_ns = int(warmup_ns)
        self._latencies = defaultdict(list)
        self._bytes = defaultdict(int)
        self._losses = defaultdict(int)
        self._buffer_drops = defaultdict(int)

    def delivered(self, mpdus, t_ns):
        for mpdu in mpdus:
            packet = mpdu.packet
            cell = _cell(packet.flow, self.co_bss)
            if t_ns >= self.warmup_ns:
                self._bytes[cell] += mpdu.size_bytes
            packet.delivered += 1
            if packet.complete and not packet.lost and packet.arrival_ns >= self.warmup_ns:
                self._latencies[cell].append((t_ns - packet.arrival_ns) / float(NS_PER_US))

    def dropped(self, mpdus):
        for mpdu in mpdus:
            mpdu.packet.lost = True
            if mpdu.arrival_ns >= self.warmup_ns:
                self._losses[_cell(mpdu.packet.flow, self.co_bss)] += 1

    def buffer_drop(self, flow, packet, n=1):
        packet.lost = True
        if packet.arrival_ns >= self.warmup_ns:
            self._buffer_drops[_cell(flow, self.co_bss)] += n

    def n_samples(self):
        return sum(len(v) for v in self._latencies.values())

    def report(self, scenario, system, n_vc_stas, seed, sim_end_ns, keep_samples=True):
        window_us = (sim_end_ns - self.warmup_ns) / float(NS_PER_US)
        samples = {k: np.asarray(v, dtype=float) for k, v in self._latencies.items()}
        cells = set(samples) | set(self._bytes) | set(self._losses) | set(self._buffer_drops)
        report = RunReport(scenario, system, n_vc_stas, seed, samples=samples)
        for name, pred in GROUPS.items():
            members = sorted(c for c in cells if pred(*c[1:]))
            stats = GroupStats()
            parts = [samples[c] for c in members if c in samples]
            values = np.concatenate(parts) if parts else np.empty(0)
            stats.n_samples = int(values.size)
            if values.size:
                stats.p95_latency_us = percentile(values, 0.95)
                stats.p50_latency_us = percentile(values, 0.50)
                stats.p5_latency_us = percentile(values, 0.05)
                stats.mean_latency_us = float(np.mean(values))
            if values.size >= 2:
                stats.jitter_us = jitter(values)
            if window_us > 0:
                stats.throughput_bps = throughput_bps(sum(self._bytes[c] for c in members), window_us)
            stats.mpdu_loss_count = sum(self._losses[c] for c in members)
            stats.buffer_drop_count = sum(self._buffer_drops[c] for c in members)
            report.groups[name] = stats
        report.network_throughput_bps = report.groups["all"].throughput_bps
        if not keep_samples:
            report.samples = {}
        return report


@dataclass
class SummaryRow:
    scenario: str
    system: str
    vc_stas: int
    group: str
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    n_iter: int


def mean_ci(values, alpha=0.05):
    """mean and Student-t confidence interval; the interval is nan with fewer than 2 values."""
    values = np.asarray([v for v in values if not np.isnan(v)], dtype=float)
    if values.size == 0:
        return float("nan"), float("nan"), float("nan"), 0
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, float("nan"), float("nan"), 1
    if np.all(values == values[0]):
        return mean, mean, mean, int(values.size)
    low, high = DescrStatsW(values).tconfint_mean(alpha=alpha)
    return mean, float(low), float(high), int(values.size)


def aggregate(reports, pooled=False, alpha=0.05):
    """
    per (scenario, system, vc_stas, group, metric): mean over runs and its CI.
    with pooled=True the latency percentiles and jitter come from the samples
    of all runs together and carry no CI.
    :return: list of SummaryRow in a fixed order
    """
    if not reports:
        raise ValueError("aggregate needs at least one report")
    buckets = defaultdict(list)
    for r in reports:
        buckets[(r.scenario, r.system, r.n_vc_stas)].append(r)
    rows = []
    for (scenario, system, vc), runs in sorted(buckets.items()):
        runs = sorted(runs, key=lambda r: r.seed)
        for group in GROUPS:
            pooled_values = None
            if pooled:
                parts = [r.group_samples(group) for r in runs]
                pooled_values = np.concatenate(parts) if parts else np.empty(0)
            for metric in METRICS:
                if pooled and metric in ("p95_latency_us", "p50_latency_us", "p5_latency_us",
                                         "mean_latency_us", "jitter_us"):
                    value = _pooled_metric(pooled_values, metric)
                    rows.append(SummaryRow(scenario, system, vc, group, metric, value,
                                           float("nan"), float("nan"), len(runs)))
                    continue
                mean, low, high, n = mean_ci([float(getattr(r.groups[group], metric)) for r in runs], alpha)
                rows.append(SummaryRow(scenario, system, vc, group, metric, mean, low, high, n))
    return rows


def _pooled_metric(values, metric):
    if metric == "jitter_us":
        return jitter(values) if values.size >= 2 else float("nan")
    if values.size == 0:
        return float("nan")
    if metric == "mean_latency_us":
        return float(np.mean(values))
    p = {"p95_latency_us": 0.95, "p50_latency_us": 0.50, "p5_latency_us": 0.05}[metric]
    return percentile(values, p)


def write_raw_samples(path, reports):
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(RAW_COLUMNS)
        for r in sorted(reports, key=lambda r: (r.scenario, r.system, r.n_vc_stas, r.seed)):
            for (bss, co, ll, direction, model), values in sorted(r.samples.items()):
                for v in values:
                    writer.writerow([r.scenario, r.system, r.n_vc_stas, r.seed, bss, int(co), int(ll),
                                     direction, model, "{:.3f}".format(v)])

