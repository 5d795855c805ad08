"""Desk-scale simulation of a hierarchical humanoid agent.

A slow general-purpose model plans; a fast grounding layer turns plans
into locomotion and head commands; a deterministic 2D world executes
them. The harness sweeps ablation matrices and writes replayable traces.
"""

from .errors import DeskbotError
from .harness import EpisodeConfig, EpisodeTrace, compute_metrics, run_episode
from .scenario import Scenario, load_scenario

__version__ = "1.0.0"

__all__ = [
    "DeskbotError",
    "EpisodeConfig",
    "EpisodeTrace",
    "Scenario",
    "__version__",
    "compute_metrics",
    "load_scenario",
    "run_episode",
]
