from mapcsim.trace import (FRAME_COLUMNS, FrameRecord, FrameTraceWriter, GrantRecord, GrantTraceWriter,
                           TraceRecorder, check_trace, read_frame_trace, read_grant_trace)


def _frame(t, event, device="0", ac="", airtime=50.0, outcome="ok", txop=1, ll=""):
    return FrameRecord(t, device, event, ac, 0, airtime, outcome, txop, ll)


def _clean_txop():
    return [
        _frame(0.0, "txop_start", ac="VO", airtime=2080.0),
        _frame(0.0, "icf", airtime=72.0),
        _frame(88.0, "icr", device="1", airtime=44.0),
        _frame(148.0, "plan", ac="COTDMA_SHARE", airtime=0.0, outcome="dl:0|ul:0"),
        _frame(148.0, "mu_rts_txs", airtime=72.0),
        _frame(236.0, "cts", device="1", airtime=44.0),
        _frame(296.0, "shared_dl_data", device="1", airtime=57.6, ll="1"),
        _frame(369.6, "shared_block_ack", device="7", airtime=68.0),
    ]


def _grant(start=296.0, duration=141.6):
    return GrantRecord(start, 0, 1, duration, 80, 0)


def _count(violations):
    return {rule: len(v) for rule, v in violations.items() if v}


def test_clean_trace():
    assert _count(check_trace(_clean_txop(), [_grant()])) == {}


def test_two_grants_in_one_txop():
    frames = _clean_txop() + [_frame(500.0, "mu_rts_txs", airtime=72.0)]
    assert _count(check_trace(frames, [_grant()])) == {"single_share": 1}


def test_window_past_the_txop():
    assert _count(check_trace(_clean_txop(), [_grant(duration=2000.0)])) == {"containment": 1}
    assert _count(check_trace(_clean_txop(), [_grant(start=3000.0)])) == {"containment": 1}


def test_frame_past_the_window():
    assert _count(check_trace(_clean_txop(), [_grant(duration=100.0)])) == {"containment": 1}


def test_non_ll_data_in_a_shared_window():
    frames = [f._replace(ll_only="0") if f.event == "shared_dl_data" else f for f in _clean_txop()]
    assert _count(check_trace(frames, [_grant()])) == {"role_legality": 1}


def test_share_before_serving_own_traffic():
    frames = [f._replace(outcome="dl:1|ul:0") if f.event == "plan" else f for f in _clean_txop()]
    assert _count(check_trace(frames, [_grant()])) == {"priority_soundness": 1}


def test_baseline_purity():
    violations = check_trace(_clean_txop(), [], coordinated=False)
    assert len(violations["baseline_purity"]) == 3
    assert set(violations) == {"single_share", "containment", "role_legality", "priority_soundness",
                               "baseline_purity"}


def test_written_traces_read_back(tmp_path):
    frames_path, grants_path = str(tmp_path / "f.csv"), str(tmp_path / "g.csv")
    recorder = TraceRecorder(FrameTraceWriter(frames_path), GrantTraceWriter(grants_path), keep=True)
    for f in _clean_txop():
        recorder.frame(f)
    recorder.grant(_grant())
    recorder.close()
    with open(frames_path) as fp:
        assert fp.readline().strip() == ",".join(FRAME_COLUMNS)
    frames = read_frame_trace(frames_path)
    grants = read_grant_trace(grants_path)
    assert len(frames) == len(recorder.frames) == 8
    assert frames[6].ll_only == "1"
    assert frames[0].airtime_us == 2080.0
    assert grants == [_grant()]
    assert _count(check_trace(frames, grants)) == {}
