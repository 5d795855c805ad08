"""Experiment harness: tasks, episode runner, metrics, ablation grids."""

from .episode import (DEFAULT_EPISODES_PER_CELL, OBSTACLE_REGION, EpisodeConfig,
                      EpisodeTrace, TraceEvent, derive_seed, run_episode)
from .experiment import (CellMetrics, MetricsReport, aggregate_cell, build_matrix,
                         MATRIX_BUILDERS, report_from_traces, run_experiment)
from .metrics import (EpisodeMetrics, average_speed_cm_s, compute_metrics,
                      total_path_length, verify_ledger, walking_segments)
from .tasks import (ObjectPlacement, ProgressTracker, Subprocess, TaskSpec,
                    get_task, task_names)

__all__ = [
    "DEFAULT_EPISODES_PER_CELL", "OBSTACLE_REGION", "EpisodeConfig",
    "EpisodeTrace", "TraceEvent", "derive_seed", "run_episode",
    "CellMetrics", "MetricsReport", "aggregate_cell", "build_matrix",
    "MATRIX_BUILDERS", "report_from_traces", "run_experiment",
    "EpisodeMetrics", "average_speed_cm_s", "compute_metrics",
    "total_path_length", "verify_ledger", "walking_segments",
    "ObjectPlacement", "ProgressTracker", "Subprocess", "TaskSpec",
    "get_task", "task_names",
]
