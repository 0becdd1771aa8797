"""Reinforcement-learning test prioritization and selection for CI pipelines, with a replay harness."""

from .agent import AgentConfig, DQNAgent
from .dataset import CycleSeries, ScenarioSpec, filter_cycles, generate_synthetic, load_dataset
from .harness import ReplayConfig, ReplayReport, budget_sweep, run_replay, select_under_budget
from .metrics import napfd, nfr, nttf

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "CycleSeries", "DQNAgent", "ReplayConfig", "ReplayReport", "ScenarioSpec",
    "budget_sweep", "filter_cycles", "generate_synthetic", "load_dataset", "napfd", "nfr", "nttf",
    "run_replay", "select_under_budget",
]
