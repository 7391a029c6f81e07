import pytest

from mapcsim.cotdma import (Action, CandidateInfo, MapcPair, Plan, TxopState, compute_shared_duration, execute_txs,
                            handshake_ns, polling_ns, polling_phase, room_to_share, shared_duration_ns,
                            snapshot_candidate, txop_action_plan)
from mapcsim.edca import AccessCategory, DeviceState, EdcaParams, Role, Txop, cf_end_ns
from mapcsim.phy import PhyConfig
from mapcsim.traffic import Direction, Mpdu

VO = AccessCategory.VO

# one 80-octet LL MPDU: 57.6 us PPDU, SIFS, 68 us block-ack
ONE_MPDU_EXCHANGE_NS = 57600 + 16000 + 68000


@pytest.fixture
def phy():
    return PhyConfig()


def _ap(device_id=0, txop=True):
    ap = DeviceState(device_id, Role.AP, device_id, EdcaParams(), None)
    if txop:
        ap.txop = Txop(1, VO, 0, 2080000)
    return ap


def _info(dl_bytes=80, n_dl=1, ul_bytes=0, n_ul=0, ul_stas=0, responded=True):
    return CandidateInfo(1, dl_bytes, ul_bytes, responded, n_dl, n_ul, ul_stas)


class _Tx(object):
    def __init__(self, ok):
        self.ok = ok

    def delivered(self, source, receiver):
        return self.ok


class _Ctx(object):
    """stands in for the TXOP context of a running network."""

    def __init__(self, phy, lost=(), exchanges=0, exchange_ns=100000):
        self.phy = phy
        self.clock = 0
        self.lost = set(lost)
        self.sent = []
        self.exchanges = exchanges
        self.exchange_ns = exchange_ns
        self.calls = []

    def now(self):
        return self.clock

    def available(self, device_id):
        return True

    def send(self, links, duration_ns, event, nav_end=None, **kwargs):
        self.sent.append((self.clock, event, nav_end))
        yield duration_ns
        return _Tx(event not in self.lost)

    def candidate_info(self, ap_id, responded):
        return _info(responded=responded)

    def accept_grant(self, shared_ap, window_end):
        self.calls.append(("accept", shared_ap, window_end))
        return True

    def release_grant(self, shared_ap):
        self.calls.append(("release", shared_ap))

    def begin_window(self, grant, start_ns, end_ns):
        self.calls.append(("begin", start_ns, end_ns))

    def end_window(self, grant):
        self.calls.append(("end", self.clock))

    def plan_dl(self, device_id, acs, budget_ns, ll_only=False):
        assert ll_only
        if self.exchanges == 0:
            return None
        self.exchanges -= 1
        return "exchange"

    def plan_ul(self, ap_id, budget_ns, ll_only=True):
        return None

    def run_exchange(self, exchange, in_window=False):
        assert in_window
        yield self.exchange_ns
        return True


def _drive(program, ctx):
    """run a frame-exchange program to its end, advancing the fake clock."""
    try:
        while True:
            ctx.clock += next(program)
    except StopIteration as e:
        return e.value


def test_pair():
    pair = MapcPair(0, 1)
    assert pair.partner(0) == 1 and pair.partner(1) == 0
    assert 1 in pair and 2 not in pair
    with pytest.raises(KeyError):
        pair.partner(2)
    with pytest.raises(ValueError):
        MapcPair(3, 3)


def test_control_frame_sequences(phy):
    assert handshake_ns(phy) == 72000 + 44000 + 2 * 16000
    assert polling_ns(phy) == 72000 + 44000 + 2 * 16000


def test_shared_duration_of_one_mpdu(phy):
    assert shared_duration_ns(_info(), 2080000, phy) == ONE_MPDU_EXCHANGE_NS
    assert compute_shared_duration(_info(), 2080.0, phy) == pytest.approx(ONE_MPDU_EXCHANGE_NS / 1000.0)


def test_shared_duration_is_clipped_to_the_txop(phy):
    info = _info(dl_bytes=800, n_dl=10)
    assert shared_duration_ns(info, 2080000, phy) == 155200
    assert shared_duration_ns(info, handshake_ns(phy) + 150000, phy) == 150000


def test_no_room_for_one_exchange(phy):
    assert shared_duration_ns(_info(), handshake_ns(phy) + ONE_MPDU_EXCHANGE_NS - 1, phy) == 0


def test_shared_duration_without_backlog(phy):
    assert shared_duration_ns(_info(dl_bytes=0, n_dl=0), 2080000, phy) == 0
    with pytest.raises(ValueError):
        shared_duration_ns(_info(responded=False), 2080000, phy)


def test_shared_duration_covers_ul_backlog(phy):
    dl_only = shared_duration_ns(_info(), 2080000, phy)
    both = shared_duration_ns(_info(ul_bytes=100, n_ul=2, ul_stas=2), 2080000, phy)
    assert both > dl_only + phy.sifs_ns


def test_plan_priority(phy):
    ap = _ap()
    full = TxopState(2000000, has_dl=True, dl_fits=True, ul_ll_bytes=100, ul_fits=True)
    assert txop_action_plan(ap, full, [_info()], phy).action is Action.DL_TX

    ul = TxopState(2000000, has_dl=True, dl_fits=False, ul_ll_bytes=100, ul_fits=True)
    assert txop_action_plan(ap, ul, [_info()], phy).action is Action.UL_MU_TX

    share = TxopState(2000000)
    plan = txop_action_plan(ap, share, [_info()], phy)
    assert plan.action is Action.COTDMA_SHARE
    assert plan.shared_ns == ONE_MPDU_EXCHANGE_NS
    assert plan.candidate.ap_id == 1

    assert txop_action_plan(ap, share, [], phy).action is Action.CF_END
    assert txop_action_plan(ap, TxopState(cf_end_ns(phy) - 1), [], phy).action is Action.NONE


def test_ul_mu_is_skipped_when_not_allowed(phy):
    state = TxopState(2000000, ul_ll_bytes=100, ul_fits=True, allow_ul_mu=False)
    assert txop_action_plan(_ap(), state, [], phy).action is Action.CF_END


def test_a_txop_is_shared_once(phy):
    state = TxopState(2000000, shared=True)
    assert txop_action_plan(_ap(), state, [_info()], phy).action is Action.CF_END


def test_silent_candidates_are_never_granted(phy):
    state = TxopState(2000000)
    assert txop_action_plan(_ap(), state, [_info(responded=False)], phy).action is Action.CF_END


def test_plan_needs_a_txop(phy):
    with pytest.raises(ValueError):
        txop_action_plan(_ap(txop=False), TxopState(2000000), [], phy)


def _mpdu(dest, ll, size=100, source=0):
    return Mpdu(1, size, 0, Direction.DL, source, dest, ll, VO)


def test_snapshot_candidate():
    ap = _ap(1, txop=False)
    ap.enqueue(_mpdu(5, True, 80))
    ap.enqueue(_mpdu(5, False, 1000))
    stas = []
    for sta_id, n_ll in ((5, 2), (6, 0), (7, 1)):
        sta = DeviceState(sta_id, Role.STA, 1, EdcaParams(), None)
        for _ in range(n_ll):
            sta.enqueue(_mpdu(1, True, 50, source=sta_id))
        sta.enqueue(_mpdu(1, False, 500, source=sta_id))
        stas.append(sta)
    info = snapshot_candidate(ap, stas)
    assert (info.dl_ll_backlog_bytes, info.n_dl_ll_mpdus) == (80, 1)
    assert (info.ul_ll_backlog_bytes, info.n_ul_ll_mpdus, info.ul_ll_stas) == (150, 3, 2)
    assert snapshot_candidate(ap, stas, acs=[AccessCategory.VI]).dl_ll_backlog_bytes == 0


def test_polling_with_a_response(phy):
    ctx = _Ctx(phy)
    candidates = _drive(polling_phase(ctx, _ap(0), MapcPair(0, 1)), ctx)
    assert [c.responded for c in candidates] == [True]
    assert [e for _, e, _ in ctx.sent] == ["icf", "icr"]
    assert ctx.clock == polling_ns(phy)


def test_polling_without_a_response(phy):
    ctx = _Ctx(phy, lost={"icf"})
    candidates = _drive(polling_phase(ctx, _ap(0), MapcPair(0, 1)), ctx)
    assert [c.responded for c in candidates] == [False]
    assert [e for _, e, _ in ctx.sent] == ["icf"]


def test_shared_window(phy):
    ctx = _Ctx(phy, exchanges=1, exchange_ns=100000)
    plan = Plan(Action.COTDMA_SHARE, _info(), 500000)
    grant = _drive(execute_txs(ctx, plan, _ap(0)), ctx)
    window_start = handshake_ns(phy)
    window_end = window_start + 500000
    assert [e for _, e, _ in ctx.sent] == ["mu_rts_txs", "cts"]
    assert all(nav == window_end for _, _, nav in ctx.sent)
    assert (grant.sharing_ap, grant.shared_ap) == (0, 1)
    assert grant.start_time_us == pytest.approx(window_start / 1000.0)
    assert grant.duration_us == pytest.approx(500.0)
    # control comes back one PIFS after the last exchange
    assert ctx.clock == window_start + 100000 + phy.pifs_ns
    assert ctx.calls[-1] == ("end", ctx.clock)
    assert ("begin", window_start, window_end) in ctx.calls


def test_idle_shared_window_returns_after_pifs(phy):
    ctx = _Ctx(phy, exchanges=0)
    _drive(execute_txs(ctx, Plan(Action.COTDMA_SHARE, _info(), 500000), _ap(0)), ctx)
    assert ctx.clock == handshake_ns(phy) + phy.pifs_ns - phy.sifs_ns


def test_missing_cts_releases_the_grant(phy):
    ctx = _Ctx(phy, lost={"cts"})
    grant = _drive(execute_txs(ctx, Plan(Action.COTDMA_SHARE, _info(), 500000), _ap(0)), ctx)
    assert grant is None
    assert ("release", 1) in ctx.calls
    assert not any(c[0] == "begin" for c in ctx.calls)
    assert ctx.clock == handshake_ns(phy)


def test_lost_txs_ends_the_attempt(phy):
    ctx = _Ctx(phy, lost={"mu_rts_txs"})
    grant = _drive(execute_txs(ctx, Plan(Action.COTDMA_SHARE, _info(), 500000), _ap(0)), ctx)
    assert grant is None
    assert [e for _, e, _ in ctx.sent] == ["mu_rts_txs"]
    assert ctx.calls == []


def _filled(ap, n, size=1500, ac=VO):
    for _ in range(n):
        ap.enqueue(Mpdu(1, size, 0, Direction.DL, ap.device_id, 5, False, ac))
    return ap


def test_room_to_share_with_a_light_backlog(phy):
    ap = _filled(_ap(0), 1, size=80)
    # polling, one exchange and the handshake leave most of 2080 us
    assert room_to_share(ap, [VO], 2080000, phy)
    assert room_to_share(_ap(0), [VO], 2080000, phy)
    assert not room_to_share(ap, [VO], polling_ns(phy) + ONE_MPDU_EXCHANGE_NS + handshake_ns(phy), phy)


@pytest.mark.parametrize("n_mpdus", [55, 70, 500])
def test_no_room_to_share_when_the_backlog_fills_the_txop(phy, n_mpdus):
    assert not room_to_share(_filled(_ap(0), n_mpdus), [VO], 2080000, phy)


def test_room_to_share_counts_only_eligible_acs(phy):
    ap = _filled(_ap(0), 70, ac=AccessCategory.BE)
    assert room_to_share(ap, [VO], 2080000, phy)
    assert not room_to_share(ap, [VO, AccessCategory.BE], 2080000, phy)
