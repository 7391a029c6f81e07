import json
from collections import Counter

import numpy as np
import pytest

from mapcsim.cotdma import InfoChannel
from mapcsim.edca import AccessCategory, Role
from mapcsim.scenario import DEFAULT_CONFIG, ConfigError, build_scenario, load_config, parse_config
from mapcsim.traffic import TrafficModel


def test_defaults():
    config = parse_config("")
    assert config.scenario == "RTMG" and config.system == "coordinated"
    assert config.mapc_pair == [0, 1]
    assert config.phy_config().bandwidth_mhz == 80
    assert config.edca_params().ac[AccessCategory.VO].txop_limit_us == 2080
    assert load_config(None) == config


def test_nested_override(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"scenario": "VR", "edca": {"VO": {"txop_limit_us": 0}},
                                "traffic": {"VR": {"UL": {"mean_iat_us": 5000.0}}}}))
    config = load_config(str(path))
    assert config.scenario == "VR"
    assert config.edca_params().ac[AccessCategory.VO].txop_limit_us == 0
    assert config.edca_params().ac[AccessCategory.VO].cw_min == 3
    assert config.flow_spec("VR", "UL").mean_iat_us == 5000.0
    assert config.flow_spec("VR", "DL").mean_iat_us == 33330.0
    # the defaults stay untouched
    assert DEFAULT_CONFIG["edca"]["VO"]["txop_limit_us"] == 2080


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as e:
        parse_config(json.dumps({"phy": {"mcs": 9}}))
    assert e.value.key == "phy.mcs"
    assert "phy.mcs" in str(e.value)


@pytest.mark.parametrize("raw,key", [
    ({"scenario": "XR"}, "scenario"),
    ({"system": "uncoordinated", "mapc_pair": [0, 1]}, "mapc_pair"),
    ({"mapc_pair": [0, 2], "co_bss": [0, 1]}, "mapc_pair"),
    ({"co_bss": [1, 1]}, "co_bss"),
    ({"co_bss": [0, 4]}, "co_bss"),
    ({"n_bss": 1, "co_bss": [0, 0]}, "n_bss"),
    ({"n_vc_stas": -1}, "n_vc_stas"),
    ({"warmup_us": 5000000}, "warmup_us"),
    ({"info_channel": "radio"}, "info_channel"),
    ({"topology": {"cluster_radius_m": 11.0}}, "topology.cluster_radius_m"),
    ({"metrics": {"alpha": 1.0}}, "metrics.alpha"),
    ({"phy": {"bandwidth_mhz": 30}}, "phy"),
    ({"edca": {"BE": {"cw_min": 10}}}, "edca"),
    ({"traffic": {"VC": {"DL": {"mean_pkt_bytes": 0}}}}, "traffic.VC.DL"),
    ({"topology": "big"}, "topology"),
])
def test_invalid_configs(raw, key):
    with pytest.raises(ConfigError) as e:
        parse_config(json.dumps(raw))
    assert e.value.key == key


def test_bad_json():
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_mapc_pair_sets_the_co_bss():
    config = parse_config(json.dumps({"mapc_pair": [2, 3]}))
    assert config.co_bss == [2, 3]
    assert config.with_overrides(system="uncoordinated").mapc_pair is None
    assert config.with_overrides(system="uncoordinated").with_overrides(system="coordinated").mapc_pair == [2, 3]


def test_population():
    scenario = build_scenario(parse_config(""), seed=1)
    assert len(scenario.aps) == 4
    assert len(scenario.stas) == 16
    assert len(scenario.flows) == 32
    models = Counter(f.spec.model for f in scenario.flows)
    assert models == {TrafficModel.VC: 16, TrafficModel.RTMG: 8, TrafficModel.BACKGROUND: 8}
    assert all(f.source == f.bss or f.destination == f.bss for f in scenario.flows)
    assert [f.flow_id for f in scenario.flows] == list(range(32))
    assert scenario.pair.info_channel is InfoChannel.BACKHAUL
    assert scenario.co_bss == (0, 1)
    assert all(n.role is Role.AP for n in scenario.nodes[:4])


def test_stas_are_in_the_cluster_disc():
    config = parse_config("")
    scenario = build_scenario(config, seed=5)
    for sta in scenario.stas:
        ap = scenario.nodes[sta.bss].position
        assert np.hypot(sta.position[0] - ap[0], sta.position[1] - ap[1]) <= 5.0 + 1e-9


def test_placement_is_deterministic():
    config = parse_config("")
    a = build_scenario(config, seed=3)
    b = build_scenario(config, seed=3)
    c = build_scenario(config, seed=4)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)
    fixed = config.with_overrides(topology=dict(config.topology, placement_seed=9))
    assert np.array_equal(build_scenario(fixed, 1).positions, build_scenario(fixed, 2).positions)


def test_adding_vc_stas_keeps_the_other_positions():
    config = parse_config("")
    two = build_scenario(config, seed=1)
    three = build_scenario(config.with_overrides(n_vc_stas=3), seed=1)
    bg_two = [n.position for n in two.stas if n.index == 1]
    bg_three = [n.position for n in three.stas if n.index == 1]
    assert bg_two == bg_three


def test_uncoordinated_has_no_pair():
    scenario = build_scenario(parse_config(json.dumps({"system": "uncoordinated"})), seed=1)
    assert scenario.pair is None
    assert scenario.allow_ul_mu
    no_ul = parse_config(json.dumps({"system": "uncoordinated", "ul_mu_in_baseline": False}))
    assert not build_scenario(no_ul, seed=1).allow_ul_mu


def test_explicit_positions():
    positions = [[float(k), 0.0] for k in range(4 * 4)]
    config = parse_config(json.dumps({"n_vc_stas": 1, "topology": {"positions": positions}}))
    scenario = build_scenario(config, seed=1)
    assert scenario.positions[7].tolist() == [7.0, 0.0]
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"topology": {"positions": positions}}))


def test_walls_between_rooms():
    config = parse_config(json.dumps({"topology": {"walls_between_rooms": 1}}))
    scenario = build_scenario(config, seed=1)
    assert scenario.walls[0, 1] == 1
    assert scenario.walls[0, 3] == 3
    assert scenario.walls[0, 0] == 0
