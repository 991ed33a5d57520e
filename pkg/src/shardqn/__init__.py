"""Throughput model of sharded blockchains as queueing networks with signals."""
from .errors import (ConfigError, EnumerationTooLarge, NonConvergence, ShardqnError,
                     SingularChain, TruncationTooSmall, UnstableInput)
from .model import SimConfig, SimReport, ShardingParams, TrafficSolution, validate

__version__ = "0.1.0"
