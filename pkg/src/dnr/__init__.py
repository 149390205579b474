"""Loss-minimizing reconfiguration of radial distribution networks.

Candidate switch states are filtered by a spanning-tree test before any
power flow is run; a genetic algorithm searches the surviving trees and an
exhaustive enumerator certifies the answer on benchmark-sized feeders.
"""

from .ga import GAConfig, GAResult, run
from .network import CaseError, NetworkCase, load_case
from .oracle import exhaustive_optimum, search_space_size
from .powerflow import PowerFlowResult, solve
from .topology import Configuration, is_spanning_tree

__all__ = [
    "CaseError",
    "Configuration",
    "GAConfig",
    "GAResult",
    "NetworkCase",
    "PowerFlowResult",
    "exhaustive_optimum",
    "is_spanning_tree",
    "load_case",
    "run",
    "search_space_size",
    "solve",
]
