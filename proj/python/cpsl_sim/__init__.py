"""Split learning latency simulator and resource optimizer.

Every function takes a scenario as a dict of overrides on the defaults (the
same shape as the JSON scenario files) and returns plain Python data.
"""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    DomainError,
    Error,
    GuardError,
    InfeasibleError,
    ShapeError,
    ValidationError,
    acceptance_probability,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "GuardError",
    "InfeasibleError",
    "ShapeError",
    "ValidationError",
    "acceptance_probability",
    "default_scenario",
    "load_scenario",
    "optimize",
    "profiles",
    "round_latency",
    "scenario_hash",
    "sweep",
    "train",
]


def _doc(scenario):
    return _json.dumps(scenario or {})


def default_scenario():
    return _json.loads(_core.default_scenario())


def load_scenario(path):
    with open(path) as f:
        return _json.load(f)


def scenario_hash(scenario=None, base_dir="."):
    return _core.scenario_hash(_doc(scenario), base_dir)


def profiles(scenario=None, source="override", base_dir="."):
    return _json.loads(_core.profiles(_doc(scenario), base_dir, source))


def round_latency(scenario=None, base_dir="."):
    return _json.loads(_core.round_latency(_doc(scenario), base_dir))


def optimize(scenario=None, base_dir="."):
    return _json.loads(_core.optimize(_doc(scenario), base_dir))


def sweep(scenario=None, jobs=1, base_dir="."):
    return _json.loads(_core.sweep(_doc(scenario), base_dir, jobs))


def train(scenario=None, scheme="CPSL", base_dir="."):
    return _json.loads(_core.train(_doc(scenario), base_dir, scheme))
