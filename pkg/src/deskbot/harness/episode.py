"""Episode runner: build a world and an agent from a config, run, trace.

Everything an episode does lands in an EpisodeTrace: one event per skill,
detection, model query, connector decision, subprocess latch, collision,
and the final terminate marker. Identical (task, config, seed) inputs
produce byte-identical traces; the trace hash is the determinism witness.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace

from ..agent import AgentRunner, ConnectorLink, RemoteBackend, ScriptedOracle
from ..connector import NavigationParams
from ..errors import GatewayError, InconsistentTrace
from ..gateway import GatewayConfig
from ..geometry import wrap_angle
from ..scenario import Scenario, add_obstacles, load_scenario
from ..skills import SkillRegistry
from ..world import NoiseModel, RobotState, SimWorld
from .metrics import total_path_length
from .tasks import ProgressTracker, TaskSpec, get_task

DEFAULT_EPISODES_PER_CELL = 20
OBSTACLE_REGION = (3.0, 8.0, 9.0, 13.0)   # between the default start and the table
TRACE_FORMAT = 1


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labeled parts."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


@dataclass(frozen=True)
class EpisodeConfig:
    """One cell of the ablation grid, minus the episode index."""

    task: str
    seed: int = 0
    connector_enabled: bool = True
    adjustment_enabled: bool = True
    camera_mode: str = "active"            # "active" or "fixed:<pitch>"
    backend: str = "oracle"                # "oracle" or "remote"
    endpoint: str | None = None
    auth_token_env: str | None = None
    sigma_pos: float | None = None         # None: scenario default
    sigma_heading: float | None = None
    fm_latency_s: float = 8.0
    connector_latency_s: float = 1.0
    p_err: float = 0.42
    step_budget: int = 120
    obstacle_count: int = 0
    scenario_path: str | None = None
    label: str = ""

    def __post_init__(self):
        self.camera()  # validates
        if self.backend not in ("oracle", "remote"):
            raise ValueError(f"backend must be oracle or remote, got {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise ValueError("remote backend needs an endpoint")

    def camera(self) -> tuple[str, float | None]:
        """(mode, fixed_pitch); raises ValueError on a bad spec."""
        if self.camera_mode == "active":
            return "active", None
        if self.camera_mode.startswith("fixed:"):
            pitch = float(self.camera_mode.split(":", 1)[1])
            if not 0.0 <= pitch <= 1.2:
                raise ValueError(f"fixed camera pitch {pitch} outside [0, 1.2]")
            return "fixed", pitch
        raise ValueError(f"camera_mode must be active or fixed:<pitch>, got {self.camera_mode!r}")

    def signature(self) -> str:
        """Canonical axes string: everything that shapes behavior except the seed."""
        return "|".join(str(v) for v in (
            self.task, self.connector_enabled, self.adjustment_enabled,
            self.camera_mode, self.backend, self.sigma_pos, self.sigma_heading,
            self.fm_latency_s, self.connector_latency_s, self.p_err,
            self.step_budget, self.obstacle_count, self.scenario_path,
        ))

    def describe(self) -> str:
        if self.label:
            return self.label
        bits = ["connector" if self.connector_enabled else "no_connector"]
        if not self.adjustment_enabled:
            bits.append("no_adjust")
        if self.camera_mode != "active":
            bits.append(self.camera_mode.replace(":", "_"))
        if self.obstacle_count:
            bits.append(f"obstacles{self.obstacle_count}")
        return "+".join(bits)


@dataclass(frozen=True)
class TraceEvent:
    sim_time: float
    kind: str
    duration_s: float
    payload: dict


@dataclass
class EpisodeTrace:
    meta: dict
    events: list[TraceEvent] = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"meta": self.meta}, sort_keys=True)]
        for ev in self.events:
            lines.append(json.dumps(
                {"t": ev.sim_time, "kind": ev.kind,
                 "duration_s": ev.duration_s, "payload": ev.payload},
                sort_keys=True))
        lines.append(json.dumps({"totals": self.totals}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def trace_hash(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) < 2:
            raise InconsistentTrace("trace file needs at least meta and totals lines")
        head = json.loads(lines[0])
        tail = json.loads(lines[-1])
        if "meta" not in head or "totals" not in tail:
            raise InconsistentTrace("trace file must start with meta and end with totals")
        trace = cls(meta=head["meta"], totals=tail["totals"])
        for ln in lines[1:-1]:
            raw = json.loads(ln)
            trace.append(TraceEvent(sim_time=raw["t"], kind=raw["kind"],
                                    duration_s=raw["duration_s"], payload=raw["payload"]))
        return trace


def run_episode(task: TaskSpec | str, cfg: EpisodeConfig,
                scenario: Scenario | None = None) -> EpisodeTrace:
    """Run one episode to success, budget exhaustion, or abort."""
    if isinstance(task, str):
        task = get_task(task)
    if scenario is None:
        scenario = load_scenario(cfg.scenario_path)
    if cfg.obstacle_count:
        scenario = add_obstacles(
            scenario, cfg.obstacle_count,
            random.Random(derive_seed(cfg.seed, "obstacles")), OBSTACLE_REGION)

    mode, fixed_pitch = cfg.camera()
    sigma_pos = scenario.sigma_pos if cfg.sigma_pos is None else cfg.sigma_pos
    sigma_heading = scenario.sigma_heading if cfg.sigma_heading is None else cfg.sigma_heading
    start = task.start_pose or scenario.start_pose
    state = RobotState(x=start[0], y=start[1], heading=wrap_angle(start[2]))
    noise = NoiseModel(sigma_pos=sigma_pos, sigma_heading=sigma_heading,
                       seed=derive_seed(cfg.seed, "noise"))

    meta = {
        "trace_format": TRACE_FORMAT,
        "task": task.name,
        "instruction": task.instruction,
        "scenario": scenario.name,
        "start_pose": [state.x, state.y, state.heading],
        "label": cfg.describe(),
        "signature": cfg.signature(),
        "seed": cfg.seed,
        "config": {
            "connector_enabled": cfg.connector_enabled,
            "adjustment_enabled": cfg.adjustment_enabled,
            "camera_mode": cfg.camera_mode,
            "backend": cfg.backend,
            "sigma_pos": sigma_pos,
            "sigma_heading": sigma_heading,
            "fm_latency_s": cfg.fm_latency_s,
            "connector_latency_s": cfg.connector_latency_s,
            "p_err": cfg.p_err,
            "step_budget": cfg.step_budget,
            "obstacle_count": cfg.obstacle_count,
        },
        "subprocesses": [sp.description for sp in task.subprocesses],
    }
    trace = EpisodeTrace(meta=meta)
    tracker_slot: list[ProgressTracker] = []

    def sink(sim_time: float, kind: str, duration_s: float, payload: dict) -> None:
        trace.append(TraceEvent(sim_time, kind, duration_s, dict(payload)))
        if tracker_slot and kind == "skill":
            for idx in tracker_slot[0].evaluate():
                sp = task.subprocesses[idx]
                trace.append(TraceEvent(sim_time, "subprocess_done", 0.0,
                                        {"index": idx, "description": sp.description}))

    world = SimWorld(scenario.scene, state, noise, scenario.camera,
                     camera_mode=mode, fixed_pitch=fixed_pitch, sink=sink)
    for mv in task.object_moves:
        obj = world.remove_object(mv.name)
        world.add_object(replace(
            obj,
            position=tuple(mv.position),
            surface_height=(obj.surface_height if mv.surface_height is None
                            else mv.surface_height),
            alignment_direction=(obj.alignment_direction if mv.alignment_direction is None
                                 else tuple(mv.alignment_direction)),
        ))
    if task.held_item is not None:
        world.grasp(task.held_item)

    registry = SkillRegistry()
    for spec in scenario.skills:
        registry.register(spec)

    tracker = ProgressTracker(world, task)
    tracker_slot.append(tracker)
    for idx in tracker.evaluate():  # goals satisfied before the first action
        sp = task.subprocesses[idx]
        trace.append(TraceEvent(0.0, "subprocess_done", 0.0,
                                {"index": idx, "description": sp.description}))

    params = NavigationParams(connector_latency_s=cfg.connector_latency_s)
    connector = (ConnectorLink(params=params, adjustment_enabled=cfg.adjustment_enabled)
                 if cfg.connector_enabled else None)
    if cfg.backend == "oracle":
        backend = ScriptedOracle(
            world, task, tracker, registry, params,
            seed=derive_seed(cfg.seed, "oracle"),
            connector_enabled=cfg.connector_enabled,
            adjustment_enabled=cfg.adjustment_enabled,
            p_err=cfg.p_err, latency_s=cfg.fm_latency_s)
    else:
        backend = RemoteBackend(GatewayConfig(
            endpoint=cfg.endpoint, auth_token_env=cfg.auth_token_env))

    runner = AgentRunner(
        world=world, backend=backend, registry=registry, connector=connector,
        task_description=task.instruction,
        rng=random.Random(derive_seed(cfg.seed, "manip")),
        fm_latency_s=cfg.fm_latency_s, step_budget=cfg.step_budget)

    abort_error: str | None = None
    steps = 0
    try:
        result = runner.run()
        steps = result.steps
        planner_outcome = result.outcome
    except GatewayError as exc:
        abort_error = str(exc)
        planner_outcome = "aborted"

    success = tracker.all_done()
    outcome = "aborted" if abort_error else ("success" if success else planner_outcome)
    world.emit("terminate", 0.0, {
        "outcome": outcome, "success": success, "steps": steps,
        "planner_outcome": planner_outcome, "error": abort_error,
    })

    trace.totals = {
        "sim_seconds": world.sim_time,
        "distance_m": total_path_length(trace.events, (meta["start_pose"][0],
                                                       meta["start_pose"][1])),
        "fm_queries": runner.memory.fm_query_count,
        "outcome": outcome,
        "success": success,
        "steps": steps,
        "subprocesses": [
            {"description": sp.description, "done": done}
            for sp, done in zip(task.subprocesses, tracker.statuses())
        ],
    }
    return trace
