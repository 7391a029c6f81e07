import json

import pytest

from mapcsim.scenario import parse_config

SHORT_RUN = {"sim_time_us": 300000, "warmup_us": 50000, "n_iterations": 2}


@pytest.fixture
def short_config():
    return parse_config(json.dumps(SHORT_RUN))


@pytest.fixture
def short_config_file(tmp_path):
    path = tmp_path / "short.json"
    path.write_text(json.dumps(SHORT_RUN))
    return str(path)
