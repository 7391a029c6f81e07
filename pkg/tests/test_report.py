import csv
import math

import pytest

from mapcsim.metrics import SUMMARY_COLUMNS, SummaryRow
from mapcsim.report import PLOT_COLUMNS, emit_report, plot_series, summary_from_json, summary_to_json


def _summary():
    rows = []
    for system, base in (("coordinated", 1000.0), ("uncoordinated", 3000.0)):
        for vc in (2, 3):
            rows.append(SummaryRow("RTMG", system, vc, "co_bss_ll", "p95_latency_us", base * vc, base, base * 2, 5))
            rows.append(SummaryRow("RTMG", system, vc, "all", "throughput_bps", 1e8 / vc, float("nan"),
                                   float("nan"), 1))
    return rows


def test_json_round_trip():
    summary = _summary()
    back = summary_from_json(summary_to_json(summary, {"seeds": [1, 2]}))
    assert [r.metric for r in back] == [r.metric for r in summary]
    assert back[0] == summary[0]
    assert math.isnan(back[1].ci_low)


def test_json_with_other_columns_is_rejected():
    with pytest.raises(ValueError):
        summary_from_json('{"columns": ["a"], "rows": []}')


def test_empty_summary_is_an_error(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], "csv", str(tmp_path))
    with pytest.raises(ValueError):
        emit_report(_summary(), "xml", str(tmp_path))


def test_csv_summary(tmp_path):
    paths = emit_report(_summary(), "csv", str(tmp_path / "out"))
    with open(paths[0]) as fp:
        lines = list(csv.reader(fp))
    assert lines[0] == SUMMARY_COLUMNS
    assert len(lines) == 1 + 8
    assert lines[1][:5] == ["RTMG", "coordinated", "2", "co_bss_ll", "p95_latency_us"]
    assert lines[2][6] == "nan"


def test_plot_series():
    series = plot_series(_summary())
    assert series[("RTMG", "co_bss_ll_latency")] == [(2, 2000.0, 6000.0), (3, 3000.0, 9000.0)]
    assert series[("RTMG", "network_throughput")][0][0] == 2
    assert ("RTMG", "co_bss_vc_latency") not in series


def test_plot_data_files(tmp_path):
    paths = emit_report(_summary(), "plot-data", str(tmp_path))
    names = sorted(p.rsplit("/", 1)[-1] for p in paths)
    assert names == ["RTMG_co_bss_ll_latency.csv", "RTMG_network_throughput.csv"]
    with open(str(tmp_path / "RTMG_co_bss_ll_latency.csv")) as fp:
        lines = list(csv.reader(fp))
    assert lines == [PLOT_COLUMNS, ["2", "2000.000", "6000.000"], ["3", "3000.000", "9000.000"]]
