"""Hybrid quantum-classical reinforcement learning for vehicle routing."""

from .env import VrpInstance, generate_instance, route_cost
from .sim import GateOp, StateVector, ZZHamiltonian, circuit_metrics
from .training import RunConfig, evaluate, finetune, train
from .warmstart import optimize_angles

__all__ = [
    "GateOp",
    "RunConfig",
    "StateVector",
    "VrpInstance",
    "ZZHamiltonian",
    "circuit_metrics",
    "evaluate",
    "finetune",
    "generate_instance",
    "optimize_angles",
    "route_cost",
    "train",
]

__version__ = "0.1.0"
