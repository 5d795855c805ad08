"""Experiment grids: run cells of (task, config) over seeded episodes.

A matrix is a list of EpisodeConfig cells. Each cell runs a fixed number of
episodes whose seeds derive from (master_seed, task, config signature,
episode index), so two machines running the same grid produce the same
traces. Aggregation only ever reads traces, which is what lets a report be
regenerated from disk and match the original.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import DeskbotError
from .episode import (DEFAULT_EPISODES_PER_CELL, EpisodeConfig, EpisodeTrace,
                      derive_seed, run_episode)
from .metrics import EpisodeMetrics, compute_metrics


@dataclass(frozen=True)
class CellMetrics:
    task: str
    label: str
    signature: str
    episodes: int
    errors: int
    overall_rate: float | None
    subprocess_rates: tuple[tuple[str, float], ...]
    avg_speed_cm_s: float | None
    mean_fm_queries: float | None
    mean_sim_seconds: float | None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "label": self.label,
            "signature": self.signature,
            "episodes": self.episodes,
            "errors": self.errors,
            "overall_rate": self.overall_rate,
            "subprocess_rates": [
                {"description": d, "rate": r} for d, r in self.subprocess_rates],
            "avg_speed_cm_s": self.avg_speed_cm_s,
            "mean_fm_queries": self.mean_fm_queries,
            "mean_sim_seconds": self.mean_sim_seconds,
        }


@dataclass
class MetricsReport:
    episodes_per_cell: int
    master_seed: int
    cells: list[CellMetrics]

    def to_dict(self) -> dict:
        return {
            "episodes_per_cell": self.episodes_per_cell,
            "master_seed": self.master_seed,
            "cells": [c.to_dict() for c in self.cells],
        }

    def render_text(self) -> str:
        lines = [
            f"{'cell':<24} {'task':<26} {'n':>3} {'err':>3} "
            f"{'success':>8} {'cm/s':>7} {'queries':>8} {'sim s':>9}",
            "-" * 95,
        ]
        for c in self.cells:
            lines.append(
                f"{c.label:<24} {c.task:<26} {c.episodes:>3} {c.errors:>3} "
                f"{_fmt(c.overall_rate, '{:.2f}'):>8} "
                f"{_fmt(c.avg_speed_cm_s, '{:.1f}'):>7} "
                f"{_fmt(c.mean_fm_queries, '{:.1f}'):>8} "
                f"{_fmt(c.mean_sim_seconds, '{:.1f}'):>9}")
            for desc, rate in c.subprocess_rates:
                lines.append(f"    {desc:<68} {rate:>6.2f}")
        return "\n".join(lines) + "\n"


def _fmt(value, spec: str) -> str:
    return "NA" if value is None else spec.format(value)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def aggregate_cell(task: str, label: str, signature: str,
                   episodes: list[EpisodeMetrics], errors: int) -> CellMetrics:
    n = len(episodes)
    sub_rates: tuple[tuple[str, float], ...] = ()
    if n:
        names = episodes[0].subprocess_names
        sub_rates = tuple(
            (name, sum(m.subprocess_done[i] for m in episodes) / n)
            for i, name in enumerate(names))
    speeds = [m.avg_speed_cm_s for m in episodes if m.avg_speed_cm_s is not None]
    return CellMetrics(
        task=task, label=label, signature=signature,
        episodes=n, errors=errors,
        overall_rate=(sum(m.success for m in episodes) / n) if n else None,
        subprocess_rates=sub_rates,
        avg_speed_cm_s=_mean(speeds),
        mean_fm_queries=_mean([float(m.fm_queries) for m in episodes]),
        mean_sim_seconds=_mean([m.sim_seconds for m in episodes]),
    )


def run_experiment(matrix: list[EpisodeConfig],
                   episodes_per_cell: int = DEFAULT_EPISODES_PER_CELL,
                   master_seed: int = 0,
                   trace_sink=None) -> MetricsReport:
    """Run every cell; per-episode failures become error counts, not aborts."""
    cells = []
    for cfg in matrix:
        episodes: list[EpisodeMetrics] = []
        errors = 0
        for index in range(episodes_per_cell):
            seed = derive_seed(master_seed, cfg.task, cfg.signature(), index)
            try:
                trace = run_episode(cfg.task, replace(cfg, seed=seed))
                episodes.append(compute_metrics(trace))
            except DeskbotError:
                errors += 1
                continue
            if trace_sink is not None:
                trace_sink(cfg, index, trace)
        cells.append(aggregate_cell(cfg.task, cfg.describe(), cfg.signature(),
                                    episodes, errors))
    cells.sort(key=lambda c: (c.task, c.label, c.signature))
    return MetricsReport(episodes_per_cell=episodes_per_cell,
                         master_seed=master_seed, cells=cells)


def report_from_traces(traces: list[EpisodeTrace],
                       episodes_per_cell: int = DEFAULT_EPISODES_PER_CELL,
                       master_seed: int = 0) -> MetricsReport:
    """Rebuild the report purely from stored traces.

    Cells are keyed by (task, label, signature) from trace meta; an episode
    missing from a cell (it errored before producing a trace) shows up as
    the difference against episodes_per_cell.
    """
    groups: dict[tuple[str, str, str], list[EpisodeMetrics]] = {}
    for trace in traces:
        key = (trace.meta.get("task", "?"), trace.meta.get("label", ""),
               trace.meta.get("signature", ""))
        groups.setdefault(key, []).append(compute_metrics(trace))
    cells = []
    for (task, label, signature), episodes in groups.items():
        errors = max(0, episodes_per_cell - len(episodes))
        cells.append(aggregate_cell(task, label, signature, episodes, errors))
    cells.sort(key=lambda c: (c.task, c.label, c.signature))
    return MetricsReport(episodes_per_cell=episodes_per_cell,
                         master_seed=master_seed, cells=cells)


# Ablation grids. Labels are stable strings used in filenames and reports.

CONNECTOR_TASKS = ("fetch_bottle", "deliver_basket", "prepare_coffee",
                   "make_coffee", "deliver_coffee")
ADJUSTMENT_TASKS = ("fetch_bottle", "deliver_basket", "grasp_coffee",
                    "place_coffee_table", "place_coffee_machine")
CAMERA_NAV_TASKS = ("navigate_to_table", "navigate_to_machine")
CAMERA_MANIP_TASKS = ("grasp_cup_near", "place_machine_near")
CAMERA_MODES = ("fixed:0.3", "fixed:0.6", "fixed:0.9", "active")


def connector_matrix() -> list[EpisodeConfig]:
    cells = []
    for task in CONNECTOR_TASKS:
        cells.append(EpisodeConfig(task=task, label="connector"))
        cells.append(EpisodeConfig(task=task, connector_enabled=False,
                                   label="no_connector"))
    return cells


def adjustment_matrix() -> list[EpisodeConfig]:
    cells = []
    for task in ADJUSTMENT_TASKS:
        cells.append(EpisodeConfig(task=task, label="adjust_on"))
        cells.append(EpisodeConfig(task=task, adjustment_enabled=False,
                                   label="adjust_off"))
    return cells


def camera_matrix() -> list[EpisodeConfig]:
    cells = []
    for task in CAMERA_NAV_TASKS + CAMERA_MANIP_TASKS:
        for mode in CAMERA_MODES:
            cells.append(EpisodeConfig(task=task, camera_mode=mode,
                                       label=mode.replace(":", "_")))
    return cells


def efficiency_matrix() -> list[EpisodeConfig]:
    task = "navigate_to_table"
    return [
        EpisodeConfig(task=task, connector_enabled=False, label="no_connector"),
        EpisodeConfig(task=task, camera_mode="fixed:0.3", label="fixed_0.3"),
        EpisodeConfig(task=task, label="active"),
    ]


def robustness_matrix() -> list[EpisodeConfig]:
    return [
        EpisodeConfig(task="navigate_to_table", label="in_room"),
        EpisodeConfig(task="navigate_to_table", obstacle_count=3,
                      label="obstacles3"),
        EpisodeConfig(task="navigate_to_reception_desk", label="cross_room"),
    ]


MATRIX_BUILDERS = {
    "connector": connector_matrix,
    "adjustment": adjustment_matrix,
    "camera": camera_matrix,
    "efficiency": efficiency_matrix,
    "robustness": robustness_matrix,
}


def build_matrix(name: str) -> list[EpisodeConfig]:
    if name == "all":
        cells = []
        for builder in MATRIX_BUILDERS.values():
            cells.extend(builder())
        return cells
    try:
        return MATRIX_BUILDERS[name]()
    except KeyError:
        raise DeskbotError(
            f"unknown matrix {name!r}; pick from "
            f"{', '.join([*MATRIX_BUILDERS, 'all'])}") from None
