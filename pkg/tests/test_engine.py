import pytest

from mapcsim.engine import (STREAM_BACKOFF, STREAM_TRAFFIC, CausalityError, EventKind, Process, RngStream,
                            Simulator, make_stream_id)


def test_events_fire_in_time_order():
    sim = Simulator()
    fired = []
    for t in (30, 10, 20):
        sim.schedule(t, action=lambda t=t: fired.append((t, sim.now())))
    assert sim.run_until(100) == 3
    assert fired == [(10, 10), (20, 20), (30, 30)]
    assert sim.now() == 100


def test_equal_times_fire_in_scheduling_order():
    sim = Simulator()
    fired = []
    for name in "abcd":
        sim.schedule(50, EventKind.ARRIVAL, action=lambda name=name: fired.append(name))
    sim.run_until(50)
    assert fired == list("abcd")


def test_cancelled_event_never_fires():
    sim = Simulator()
    fired = []
    keep = sim.schedule(10, action=lambda: fired.append("keep"))
    drop = sim.schedule(5, action=lambda: fired.append("drop"))
    assert sim.cancel(drop)
    assert not sim.cancel(drop)
    assert sim.pending() == 1
    assert sim.peek_time() == 10
    sim.run_until(20)
    assert fired == ["keep"]
    assert not keep.pending
    assert not sim.cancel(keep)


def test_events_beyond_the_horizon_stay_queued():
    sim = Simulator()
    fired = []
    sim.schedule(10, action=lambda: fired.append(10))
    sim.schedule(200, action=lambda: fired.append(200))
    sim.run_until(100)
    assert fired == [10]
    assert sim.pending() == 1
    sim.run_until(300)
    assert fired == [10, 200]
    assert sim.fired_total == 2


def test_schedule_in_the_past_is_rejected():
    sim = Simulator()
    sim.run_until(100)
    with pytest.raises(CausalityError):
        sim.schedule(99)
    with pytest.raises(CausalityError):
        sim.run_until(50)
    sim.schedule(100)
    assert sim.schedule_in(0).fire_time == 100


def test_an_action_may_schedule_at_the_current_instant():
    sim = Simulator()
    order = []

    def first():
        order.append("first")
        sim.schedule_in(0, action=lambda: order.append("same instant"))

    sim.schedule(10, action=first)
    sim.schedule(10, action=lambda: order.append("second"))
    sim.run_until(10)
    assert order == ["first", "second", "same instant"]


def test_process_resumes_after_each_delay():
    sim = Simulator()
    seen = []

    def program():
        seen.append(sim.now())
        yield 5
        seen.append(sim.now())
        yield 0
        seen.append(sim.now())
        yield 7
        seen.append(sim.now())
        return "done"

    results = []
    proc = Process(sim, program(), results.append).start()
    sim.run_until(100)
    assert seen == [0, 5, 5, 12]
    assert proc.finished
    assert results == ["done"]
    assert proc.result == "done"


def test_process_rejects_negative_delays():
    sim = Simulator()

    def program():
        yield -1

    with pytest.raises(CausalityError):
        Process(sim, program()).start()


def test_same_seed_same_stream():
    a = RngStream(42, make_stream_id(STREAM_BACKOFF, 1, 2))
    b = RngStream(42, make_stream_id(STREAM_BACKOFF, 1, 2))
    assert [a.uniform_int(0, 1023) for _ in range(50)] == [b.uniform_int(0, 1023) for _ in range(50)]


def test_streams_are_independent():
    a = RngStream(42, make_stream_id(STREAM_BACKOFF, 1, 2))
    b = RngStream(42, make_stream_id(STREAM_TRAFFIC, 1, 2))
    c = RngStream(43, make_stream_id(STREAM_BACKOFF, 1, 2))
    xs = [a.random() for _ in range(20)]
    assert xs != [b.random() for _ in range(20)]
    assert xs != [c.random() for _ in range(20)]


def test_uniform_int_bounds_are_inclusive():
    rng = RngStream(7, 0)
    draws = {rng.uniform_int(0, 3) for _ in range(2000)}
    assert draws == {0, 1, 2, 3}


def test_stream_id_fields_are_bounded():
    assert make_stream_id(1, 0, 0, 0) != make_stream_id(1, 0, 0, 1)
    with pytest.raises(ValueError):
        make_stream_id(STREAM_TRAFFIC, 1000, 0, 0)
