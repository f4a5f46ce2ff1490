"""Distributed (SCDMPC) and centralized (CMPC) MPC for multi-vehicle formations."""

import json
from os import PathLike
from typing import Union

from ._core import (
    SyncDmpcError,
    default_config,
    dubins,
    has_spanning_tree,
    normalize_config,
    vehicle_step,
)
from . import _core

__all__ = [
    "SyncDmpcError",
    "compare",
    "default_config",
    "dubins",
    "has_spanning_tree",
    "load_config",
    "normalize_config",
    "run",
    "vehicle_step",
]

Config = Union[dict, str, PathLike]


def load_config(config: Config) -> str:
    """JSON text for a dict, a JSON string or a path to a JSON file."""
    if isinstance(config, dict):
        return json.dumps(config)
    text = str(config)
    if text.lstrip().startswith("{"):
        return text
    with open(config, encoding="utf-8") as f:
        return f.read()


def run(config: Config = None, **overrides) -> dict:
    """Closed-loop run; keyword overrides replace top-level config keys."""
    cfg = json.loads(load_config(config)) if config is not None else {}
    cfg.update(overrides)
    return _core.run(json.dumps(cfg))


def compare(config: Config = None, agents=(2, 3, 4), seeds=(1, 2)) -> dict:
    cfg = load_config(config) if config is not None else "{}"
    return _core.compare(cfg, list(agents), list(seeds))
