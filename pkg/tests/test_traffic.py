import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mapcsim.edca import AccessCategory
from mapcsim.engine import STREAM_TRAFFIC, RngStream, make_stream_id
from mapcsim.traffic import (DEFAULT_FLOWS, FRAGMENT_THRESHOLD, Direction, TrafficModel, default_flow_spec,
                             fragment, make_flow, mean_offered_load_bps, next_arrival, packet_to_mpdus)

N_DRAWS = 100000


def _draws(model, direction, n=N_DRAWS, seed=1):
    flow = make_flow(default_flow_spec(model, direction), RngStream(seed, make_stream_id(STREAM_TRAFFIC, 0, 1)))
    sizes, iats = np.empty(n), np.empty(n)
    for k in range(n):
        sizes[k], iats[k] = next_arrival(flow)
    return sizes, iats


@pytest.mark.parametrize("model,direction", sorted(DEFAULT_FLOWS, key=lambda k: (k[0].value, k[1].value)))
def test_sample_means_match_the_table(model, direction):
    mean_size, mean_iat = DEFAULT_FLOWS[(model, direction)][:2]
    sizes, iats = _draws(model, direction)
    assert math.isclose(np.mean(sizes), mean_size, rel_tol=0.02)
    assert math.isclose(np.mean(iats), mean_iat, rel_tol=0.02)


def test_truncated_normal_stays_within_three_sigma():
    sizes, iats = _draws(TrafficModel.RTMG, Direction.DL, n=20000)
    assert iats.min() >= 23060.0 * (1 - 3 * 0.25) - 1e-6
    assert iats.max() <= 23060.0 * (1 + 3 * 0.25) + 1e-6
    assert np.std(iats) > 0


def test_periodic_flows_have_a_fixed_interval():
    _, iats = _draws(TrafficModel.VC, Direction.UL, n=1000)
    assert np.all(iats == 33330.0)


def test_same_stream_same_arrivals():
    a = _draws(TrafficModel.VR, Direction.DL, n=500, seed=9)
    b = _draws(TrafficModel.VR, Direction.DL, n=500, seed=9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_access_categories():
    assert default_flow_spec("RTMG", "DL").ac is AccessCategory.VO
    assert default_flow_spec("VR", "UL").ac is AccessCategory.VO
    assert default_flow_spec("VC", "DL").ac is AccessCategory.VI
    assert default_flow_spec("BACKGROUND", "UL").ac is AccessCategory.BE
    assert default_flow_spec("VR", "DL").is_ll
    assert not default_flow_spec("VC", "DL").is_ll


def test_offered_load():
    spec = default_flow_spec(TrafficModel.BACKGROUND, Direction.DL)
    assert mean_offered_load_bps(spec) == pytest.approx(200e6)


def test_bad_flow_specs_are_rejected():
    rng = RngStream(1, 0)
    with pytest.raises(ValueError):
        make_flow(default_flow_spec("VC", "DL", {"mean_iat_us": 0}), rng)
    with pytest.raises(ValueError):
        make_flow(default_flow_spec("VC", "DL", {"size_dist": {"kind": "pareto"}}), rng)
    with pytest.raises(ValueError):
        make_flow(default_flow_spec("VC", "DL", {"size_dist": {"kind": "lognormal"}}), rng)
    with pytest.raises(ValueError):
        default_flow_spec("XR", "DL")


def test_first_arrival_is_within_one_interval():
    flow = make_flow(default_flow_spec("VC", "DL"), RngStream(3, 0))
    phases = [flow.first_arrival_us() for _ in range(1000)]
    assert 0 <= min(phases) and max(phases) < 33330.0


def test_fragmentation():
    assert fragment(166660) == [FRAGMENT_THRESHOLD] * 14 + [166660 - 14 * FRAGMENT_THRESHOLD]
    assert fragment(80) == [80]
    assert fragment(FRAGMENT_THRESHOLD) == [FRAGMENT_THRESHOLD]
    with pytest.raises(ValueError):
        fragment(0)


@given(st.integers(min_value=1, max_value=10 ** 6), st.integers(min_value=1, max_value=20000))
def test_fragments_conserve_the_packet(size, threshold):
    parts = fragment(size, threshold)
    assert sum(parts) == size
    assert all(0 < p <= threshold for p in parts)
    assert len(parts) == -(-size // threshold)


def test_packet_to_mpdus_shares_one_packet():
    flow = make_flow(default_flow_spec("VR", "DL"), RngStream(1, 0), flow_id=4, source=0, destination=7)
    packet, mpdus = packet_to_mpdus(flow, 30000, 1234)
    assert packet.n_fragments == len(mpdus) == 3
    assert all(m.packet is packet for m in mpdus)
    assert all(m.destination == 7 and m.is_ll and m.ac is AccessCategory.VO for m in mpdus)
    assert not packet.complete
