import json

import numpy as np
import pytest

from uavbc.errors import ConfigurationError
from uavbc.scenario import generate_scenario
from uavbc.scenario_io import (load_scenario, parse_power, save_scenario,
                               scenario_from_dict, scenario_to_dict)


def test_round_trip_preserves_fields(tmp_path):
    sc = generate_scenario(4)
    path = tmp_path / "scenario.json"
    save_scenario(sc, str(path))
    back = load_scenario(str(path))
    assert np.array_equal(back.bd_positions, sc.bd_positions)
    assert np.array_equal(back.ce_positions, sc.ce_positions)
    assert np.array_equal(back.association, sc.association)
    assert back.noise_power == pytest.approx(sc.noise_power, rel=1e-9)
    assert back.p_max == sc.p_max
    assert back.mission_time == sc.mission_time
    assert back.uav == sc.uav


def test_save_is_deterministic(tmp_path):
    sc = generate_scenario(4)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_scenario(sc, str(p1))
    save_scenario(sc, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_power_fields_carry_unit_suffix(tmp_path):
    sc = generate_scenario(0)
    doc = scenario_to_dict(sc)
    assert doc["p_max"].endswith(" W")
    assert doc["noise"].endswith(" W")


def test_parse_power_units():
    assert parse_power("6 W") == 6.0
    assert parse_power("250 mW") == pytest.approx(0.25)
    assert parse_power("30 dBm") == pytest.approx(1.0)
    assert parse_power(2.5) == 2.5


def test_parse_power_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        parse_power("6")          # missing unit
    with pytest.raises(ConfigurationError):
        parse_power("6 kW")
    with pytest.raises(ConfigurationError):
        parse_power("six W")


def test_loader_rejects_foreign_documents():
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"format": "something-else"})


def test_dbm_noise_round_trips(tmp_path):
    sc = generate_scenario(0)
    path = tmp_path / "s.json"
    save_scenario(sc, str(path))
    doc = json.loads(path.read_text())
    doc["noise"] = "-144 dBm"
    path.write_text(json.dumps(doc))
    back = load_scenario(str(path))
    assert back.noise_power == pytest.approx(sc.noise_power, rel=1e-6)
