"""Decentralized learning in serial-dictatorship matching markets."""

from .market import (Instance, classify_osb, gaps, gen_hard_lb, gen_osb, gen_spaced,
                     load_instance, save_instance, stable_match, validate_instance)
from .protocol import UcbD3Agent
from .simulate import AgentSpec, run_centralized, run_profile, run_strategies

__all__ = [
    "AgentSpec", "Instance", "UcbD3Agent", "classify_osb", "gaps", "gen_hard_lb", "gen_osb",
    "gen_spaced", "load_instance", "run_centralized", "run_profile", "run_strategies",
    "save_instance", "stable_match", "validate_instance",
]
__version__ = "0.1.0"
