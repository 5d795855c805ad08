"""Per-episode metrics recomputed from traces, plus the ledger check.

The speed metric matches how a stopwatch would score the robot: path length
covered by locomotion divided by the wall time of the walking stretches,
where a stretch runs from the first motion command to the last one before a
manipulation attempt (or the end of the episode). Model queries and grounded
decisions that interleave a stretch count against it; thinking while
standing around is slow walking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InconsistentTrace
from ..skills import LOCOMOTION_KINDS, MOTION_KINDS

SPEED_SCALE_CM = 100.0


def _positions(events, start_xy):
    """Yield (event, displacement_since_previous_skill_event)."""
    prev = tuple(start_xy)
    for ev in events:
        if ev.kind != "skill":
            continue
        pos = (ev.payload["x"], ev.payload["y"])
        yield ev, math.dist(prev, pos)
        prev = pos


def total_path_length(events, start_xy) -> float:
    """Ground covered across every skill event, noise wiggle included."""
    return sum(d for _, d in _positions(events, start_xy))


def walking_segments(events, start_xy) -> list[tuple[float, float]]:
    """(path_length_m, elapsed_s) per walking stretch.

    A stretch opens at a motion-skill event and is extended by later motion
    events; a manipulation attempt closes it. Head moves and no_action leave
    it open but add no distance. Elapsed time spans first motion start to
    last motion end, so interleaved queries and decisions are charged.
    """
    segments: list[tuple[float, float]] = []
    seg_start = None
    seg_end = 0.0
    seg_dist = 0.0
    for ev, disp in _positions(events, start_xy):
        name = ev.payload["skill"]
        if name in MOTION_KINDS:
            if seg_start is None:
                seg_start = ev.sim_time - ev.duration_s
                seg_dist = 0.0
            seg_dist += disp
            seg_end = ev.sim_time
        elif name not in LOCOMOTION_KINDS:
            if seg_start is not None:
                segments.append((seg_dist, seg_end - seg_start))
                seg_start = None
    if seg_start is not None:
        segments.append((seg_dist, seg_end - seg_start))
    return segments


def average_speed_cm_s(events, start_xy) -> float | None:
    """Mean walking speed in cm/s, or None if the robot never walked."""
    segments = walking_segments(events, start_xy)
    dist = sum(d for d, _ in segments)
    secs = sum(t for _, t in segments)
    if secs <= 0.0:
        return None
    return SPEED_SCALE_CM * dist / secs


def verify_ledger(trace) -> None:
    """Every trace must account for its clock, queries, and distance exactly.

    Durations are summed in event order so the float result reproduces the
    simulator's own accumulation bit for bit.
    """
    clock = 0.0
    last_t = 0.0
    queries = 0
    for ev in trace.events:
        if ev.duration_s < 0:
            raise InconsistentTrace(f"negative duration at t={ev.sim_time}")
        if ev.sim_time < last_t:
            raise InconsistentTrace(
                f"time went backwards: {ev.sim_time} after {last_t}")
        last_t = ev.sim_time
        clock += ev.duration_s
        if ev.kind == "fm_query":
            queries += 1
    totals = trace.totals
    if clock != totals.get("sim_seconds"):
        raise InconsistentTrace(
            f"durations sum to {clock!r} but totals say {totals.get('sim_seconds')!r}")
    if queries != totals.get("fm_queries"):
        raise InconsistentTrace(
            f"{queries} fm_query events but totals say {totals.get('fm_queries')!r}")
    start = trace.meta.get("start_pose", (0.0, 0.0, 0.0))
    dist = total_path_length(trace.events, (start[0], start[1]))
    if dist != totals.get("distance_m"):
        raise InconsistentTrace(
            f"path length {dist!r} but totals say {totals.get('distance_m')!r}")
    flags = [sp["done"] for sp in totals.get("subprocesses", [])]
    if totals.get("success") != all(flags):
        raise InconsistentTrace("success flag disagrees with subprocess list")
    done_events = {ev.payload["index"] for ev in trace.events
                   if ev.kind == "subprocess_done"}
    latched = {i for i, ok in enumerate(flags) if ok}
    if done_events != latched:
        raise InconsistentTrace(
            f"subprocess_done events {sorted(done_events)} disagree with "
            f"totals {sorted(latched)}")


@dataclass(frozen=True)
class EpisodeMetrics:
    task: str
    label: str
    success: bool
    outcome: str
    subprocess_done: tuple[bool, ...]
    subprocess_names: tuple[str, ...]
    avg_speed_cm_s: float | None
    fm_queries: int
    sim_seconds: float
    distance_m: float
    steps: int
    trace_hash: str = ""


def compute_metrics(trace) -> EpisodeMetrics:
    """Recompute an episode's scorecard from its trace, checking the ledger."""
    verify_ledger(trace)
    totals = trace.totals
    start = trace.meta.get("start_pose", (0.0, 0.0, 0.0))
    subs = totals.get("subprocesses", [])
    return EpisodeMetrics(
        task=trace.meta.get("task", "?"),
        label=trace.meta.get("label", ""),
        success=bool(totals.get("success")),
        outcome=totals.get("outcome", "?"),
        subprocess_done=tuple(bool(sp["done"]) for sp in subs),
        subprocess_names=tuple(sp["description"] for sp in subs),
        avg_speed_cm_s=average_speed_cm_s(trace.events, (start[0], start[1])),
        fm_queries=int(totals.get("fm_queries", 0)),
        sim_seconds=float(totals.get("sim_seconds", 0.0)),
        distance_m=float(totals.get("distance_m", 0.0)),
        steps=int(totals.get("steps", 0)),
        trace_hash=trace.trace_hash(),
    )
