"""Gated two-hop communication for multi-agent reinforcement learning.

Thin Python layer over the C++ core: configuration, topology and cost
queries, environments, training and evaluation.
"""

from ._core import (
    Config,
    ConfigError,
    Environment,
    Error,
    IoError,
    ShapeError,
    Topology,
    build_topology,
    config_keys,
    cost_round1,
    cost_round2,
    evaluate,
    inspect_topology,
    make_environment,
    plotdata,
    train,
)

__all__ = [
    "Config",
    "ConfigError",
    "Environment",
    "Error",
    "IoError",
    "ShapeError",
    "Topology",
    "build_topology",
    "config_keys",
    "cost_round1",
    "cost_round2",
    "evaluate",
    "inspect_topology",
    "make_environment",
    "plotdata",
    "train",
]
