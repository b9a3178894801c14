"""Scenario files shipped with the package."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..model import ScenarioConfig, validate_scenario

FIXTURES = ("single_node", "two_node_fixed", "tiny_oracle")


def fixture_path(name: str) -> Path:
    """Path of a bundled JSON file, e.g. ``fixture_path("single_node")``."""
    stem = name[:-5] if name.endswith(".json") else name
    return Path(str(resources.files(__name__).joinpath(stem + ".json")))


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    return validate_scenario(load_json(path))


def load_fixture(name: str) -> ScenarioConfig:
    return load_scenario(fixture_path(name))


def calibrated_gain() -> float:
    return float(load_json(fixture_path("calibration"))["antenna_gain_product"])
