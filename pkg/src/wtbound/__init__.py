"""Transient end-to-end delay and backlog bounds for multi-hop fading links."""

from .arrivals import ArrivalProcess, CompositeArrival, Envelope, burst, train
from .bounds import FAMILIES, BoundResult, Scenario, bound, bound_backlog
from .channel import ConstantChannel, RayleighChannel
from .optimize import OptimizerConfig, delay_for_epsilon, minimize_convex, snr_for_epsilon
from .sim import SimConfig, SimEstimate, estimate_backlog_violation, estimate_violation, run_trial, virtual_delay

__version__ = "0.1.0"

__all__ = [
    "ArrivalProcess",
    "CompositeArrival",
    "Envelope",
    "burst",
    "train",
    "FAMILIES",
    "BoundResult",
    "Scenario",
    "bound",
    "bound_backlog",
    "ConstantChannel",
    "RayleighChannel",
    "OptimizerConfig",
    "delay_for_epsilon",
    "minimize_convex",
    "snr_for_epsilon",
    "SimConfig",
    "SimEstimate",
    "estimate_violation",
    "estimate_backlog_violation",
    "run_trial",
    "virtual_delay",
]
