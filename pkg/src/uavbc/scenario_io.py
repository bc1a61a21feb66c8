"""Scenario (de)serialization: a human-readable JSON document.

Positions are plain numbers in meters and times plain numbers in seconds;
power-valued fields carry an explicit unit suffix ("6 W", "250 mW",
"-144 dBm") and are converted to watts once at load. The UAV physics
parameters are a sub-section with airframe defaults filled in when
omitted.
"""

import dataclasses
import json
import os
import tempfile

import numpy as np

from .errors import ConfigurationError
from .scenario import Scenario, dbm_to_watts
from .uav_power import UavPhysics

FORMAT = "uavbc-scenario"
FORMAT_VERSION = 1


def format_power(watts: float) -> str:
    return f"{watts:.9g} W"


def parse_power(value) -> float:
    """Power in watts from a number or a unit-suffixed string."""
    if isinstance(value, (int, float)):
        return float(value)
    parts = str(value).split()
    if len(parts) != 2:
        raise ConfigurationError(
            f"power value {value!r} needs a unit suffix (W, mW or dBm)")
    try:
        number = float(parts[0])
    except ValueError:
        raise ConfigurationError(f"unparseable power value {value!r}")
    unit = parts[1]
    if unit == "W":
        return number
    if unit == "mW":
        return number * 1e-3
    if unit == "dBm":
        return dbm_to_watts(number)
    raise ConfigurationError(f"unknown power unit {unit!r} in {value!r}")


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "ce_positions_m": scenario.ce_positions.tolist(),
        "bd_positions_m": scenario.bd_positions.tolist(),
        "association": scenario.association.tolist(),
        "altitude_m": scenario.altitude,
        "mission_time_s": scenario.mission_time,
        "num_slots": scenario.num_slots,
        "beta0": scenario.beta0,
        "noise": format_power(scenario.noise_power),
        "eta": scenario.eta.tolist(),
        "qbar_bits_per_hz": scenario.qbar.tolist(),
        "ebar_joules": scenario.ebar.tolist(),
        "p_max": format_power(scenario.p_max),
        "v_max_mps": scenario.v_max,
        "carrier_freq_hz": scenario.carrier_freq,
        "uav": dataclasses.asdict(scenario.uav),
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if doc.get("format") != FORMAT:
        raise ConfigurationError("not a scenario document")
    uav = UavPhysics(**doc.get("uav", {}))
    return Scenario(
        ce_positions=np.asarray(doc["ce_positions_m"], dtype=float),
        bd_positions=np.asarray(doc["bd_positions_m"], dtype=float),
        association=np.asarray(doc["association"], dtype=int),
        altitude=float(doc["altitude_m"]),
        mission_time=float(doc["mission_time_s"]),
        num_slots=int(doc["num_slots"]),
        beta0=float(doc["beta0"]),
        noise_power=parse_power(doc["noise"]),
        eta=np.asarray(doc["eta"], dtype=float),
        qbar=np.asarray(doc["qbar_bits_per_hz"], dtype=float),
        ebar=np.asarray(doc["ebar_joules"], dtype=float),
        p_max=parse_power(doc["p_max"]),
        v_max=float(doc["v_max_mps"]),
        uav=uav,
        carrier_freq=float(doc.get("carrier_freq_hz", 900e6)),
    )


def atomic_write_text(path: str, text: str):
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_scenario(scenario: Scenario, path: str):
    atomic_write_text(path, json.dumps(scenario_to_dict(scenario),
                                       indent=2, sort_keys=True) + "\n")


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        doc = json.load(fh)
    return scenario_from_dict(doc)
