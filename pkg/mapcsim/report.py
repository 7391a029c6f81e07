"""summary output: csv, json and the per-panel plot-data series."""

from __future__ import absolute_import

import csv
import json
import logging
import math
import os
from collections import defaultdict

from .metrics import SUMMARY_COLUMNS, SummaryRow

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "plot-data")

# panel -> (group, metric)
PLOT_PANELS = {
    "co_bss_ll_latency": ("co_bss_ll", "p95_latency_us"),
    "co_bss_ll_dl_latency": ("co_bss_ll_dl", "p95_latency_us"),
    "co_bss_ll_ul_latency": ("co_bss_ll_ul", "p95_latency_us"),
    "non_co_bss_ll_latency": ("non_co_bss_ll", "p95_latency_us"),
    "co_bss_vc_latency": ("co_bss_vc", "p95_latency_us"),
    "network_throughput": ("all", "throughput_bps"),
}
PLOT_COLUMNS = ["vc_stas", "coordinated", "uncoordinated"]


def _num(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else "{:.3f}".format(v)
    return str(v)


def write_summary_csv(path, summary):
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(SUMMARY_COLUMNS)
        for row in summary:
            writer.writerow([_num(getattr(row, c)) for c in SUMMARY_COLUMNS])
    return path


def summary_to_json(summary, meta=None):
    rows = [[getattr(row, c) for c in SUMMARY_COLUMNS] for row in summary]
    return json.dumps({"columns": SUMMARY_COLUMNS, "rows": rows, "meta": meta or {}}, indent=1, sort_keys=True)


def summary_from_json(text):
    data = json.loads(text)
    if data.get("columns") != SUMMARY_COLUMNS:
        raise ValueError("unexpected summary columns {}".format(data.get("columns")))
    return [SummaryRow(*values) for values in data["rows"]]


def plot_series(summary):
    """
    :return: dict (scenario, panel) -> sorted list of (vc_stas, coordinated, uncoordinated)
    """
    cells = defaultdict(dict)
    for row in summary:
        for panel, (group, metric) in PLOT_PANELS.items():
            if row.group == group and row.metric == metric:
                cells[(row.scenario, panel, row.vc_stas)][row.system] = row.mean
    series = defaultdict(list)
    for (scenario, panel, vc), values in sorted(cells.items()):
        series[(scenario, panel)].append((vc, values.get("coordinated", float("nan")),
                                          values.get("uncoordinated", float("nan"))))
    return dict(series)


def emit_report(summary, fmt, out_dir, meta=None):
    """
    write the summary in one of FORMATS into out_dir.
    :return: list of written paths
    """
    if not summary:
        raise ValueError("empty summary, nothing to report")
    if fmt not in FORMATS:
        raise ValueError("unknown report format {!r}, expected one of {}".format(fmt, FORMATS))
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    paths = []
    if fmt == "csv":
        paths.append(write_summary_csv(os.path.join(out_dir, "summary.csv"), summary))
    elif fmt == "json":
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w") as fp:
            fp.write(summary_to_json(summary, meta))
        paths.append(path)
    else:
        for (scenario, panel), points in sorted(plot_series(summary).items()):
            path = os.path.join(out_dir, "{}_{}.csv".format(scenario, panel))
            with open(path, "w", newline="") as fp:
                writer = csv.writer(fp)
                writer.writerow(PLOT_COLUMNS)
                for point in points:
                    writer.writerow([_num(v) for v in point])
            paths.append(path)
    logger.info("wrote %d report file(s) to %s", len(paths), out_dir)
    return paths
