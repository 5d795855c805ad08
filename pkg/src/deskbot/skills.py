"""Modular skill library: locomotion primitives and manipulation skills.

Locomotion skills decompose into whole 0.2 s joystick ticks so the noise
model sees one draw per tick regardless of how skills are batched.
Manipulation skills are data (ManipulationSkillSpec): preconditions gate the
attempt, then success is a single seeded Bernoulli draw whose probability
decays with facing error. Precondition rejections consume no randomness.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import geometry as geo
from .errors import DuplicateSkill, UnknownObject, UnknownSkill
from .world import (
    SIM_TICK_S,
    JoystickCommand,
    SimWorld,
    project_detections,
)

# The nine locomotion primitives.
NO_ACTION = "no_action"
GO_STRAIGHT = "go_straight"
WALK_BACKWARDS = "walk_backwards"
TURN_LEFT = "turn_left"
TURN_RIGHT = "turn_right"
SIDESTEP_LEFT = "sidestep_left"
SIDESTEP_RIGHT = "sidestep_right"
TILT_HEAD = "tilt_head"
TURN_HEAD = "turn_head"

MOTION_KINDS = frozenset({GO_STRAIGHT, WALK_BACKWARDS, TURN_LEFT, TURN_RIGHT,
                          SIDESTEP_LEFT, SIDESTEP_RIGHT})
HEAD_KINDS = frozenset({TILT_HEAD, TURN_HEAD})
LOCOMOTION_KINDS = MOTION_KINDS | HEAD_KINDS | {NO_ACTION}

# Per-invocation step sizes.
TURN_STEP_RAD = {"small": 0.15, "large": 0.45}
MOVE_STEP_M = {"small": 0.3, "large": 0.9}

# Operating velocities, chosen so every step is a whole number of ticks
# (and so the reproduced efficiency numbers land; see the experiment suite).
FORWARD_MPS = 0.125   # 0.3 m -> 12 ticks, 0.9 m -> 36 ticks
LATERAL_MPS = 0.15    # 0.3 m -> 10 ticks, 0.9 m -> 30 ticks
TURN_RPS = 0.375      # 0.15 rad -> 2 ticks, 0.45 rad -> 6 ticks

HEAD_MOVE_DURATION_S = SIM_TICK_S

_LOCOMOTION_DESCRIPTIONS = {
    NO_ACTION: "stand still for one tick",
    GO_STRAIGHT: "walk forward by the given magnitude",
    WALK_BACKWARDS: "walk backward by the given magnitude",
    TURN_LEFT: "rotate left (CCW) by the given magnitude",
    TURN_RIGHT: "rotate right (CW) by the given magnitude",
    SIDESTEP_LEFT: "step left by the given magnitude without turning",
    SIDESTEP_RIGHT: "step right by the given magnitude without turning",
    TILT_HEAD: "set the head pitch (radians, downward-positive)",
    TURN_HEAD: "set the head yaw (radians, left-positive)",
}

STATUS_SUCCESS = "success"
STATUS_FAILURE = "failure"
STATUS_PRECONDITION_UNMET = "precondition_unmet"


@dataclass(frozen=True)
class LocomotionSkill:
    """One locomotion primitive invocation.

    Motion kinds take a magnitude ("small"/"large"); head kinds take a
    (yaw, pitch) target where None leaves that axis alone; no_action takes
    neither.
    """

    kind: str
    magnitude: str | None = None
    head_target: tuple[float | None, float | None] | None = None

    def __post_init__(self):
        if self.kind not in LOCOMOTION_KINDS:
            raise UnknownSkill(self.kind)
        if self.kind in MOTION_KINDS:
            if self.magnitude not in ("small", "large"):
                raise ValueError(f"{self.kind} needs magnitude small|large")
            if self.head_target is not None:
                raise ValueError(f"{self.kind} takes no head_target")
        elif self.kind in HEAD_KINDS:
            if self.head_target is None:
                raise ValueError(f"{self.kind} needs a head_target")
            if self.magnitude is not None:
                raise ValueError(f"{self.kind} takes no magnitude")
        else:  # no_action
            if self.magnitude is not None or self.head_target is not None:
                raise ValueError("no_action takes no arguments")

    def duration_s(self) -> float:
        if self.kind in HEAD_KINDS:
            return HEAD_MOVE_DURATION_S
        if self.kind == NO_ACTION:
            return SIM_TICK_S
        if self.kind in (TURN_LEFT, TURN_RIGHT):
            return TURN_STEP_RAD[self.magnitude] / TURN_RPS
        if self.kind in (SIDESTEP_LEFT, SIDESTEP_RIGHT):
            return MOVE_STEP_M[self.magnitude] / LATERAL_MPS
        return MOVE_STEP_M[self.magnitude] / FORWARD_MPS

    def tick_commands(self) -> list[JoystickCommand]:
        """The whole-tick joystick decomposition of this skill."""
        if self.kind in HEAD_KINDS:
            return []
        if self.kind == NO_ACTION:
            return [JoystickCommand()]
        n_ticks = round(self.duration_s() / SIM_TICK_S)
        if self.kind == GO_STRAIGHT:
            cmd = JoystickCommand(v_forward=FORWARD_MPS)
        elif self.kind == WALK_BACKWARDS:
            cmd = JoystickCommand(v_forward=-FORWARD_MPS)
        elif self.kind == SIDESTEP_LEFT:
            cmd = JoystickCommand(v_lateral=LATERAL_MPS)
        elif self.kind == SIDESTEP_RIGHT:
            cmd = JoystickCommand(v_lateral=-LATERAL_MPS)
        elif self.kind == TURN_LEFT:
            cmd = JoystickCommand(omega=TURN_RPS)
        else:
            cmd = JoystickCommand(omega=-TURN_RPS)
        return [cmd] * n_ticks


@dataclass(frozen=True)
class WorldDelta:
    """The state change a successful manipulation applied."""

    grasped: str | None = None
    placed: str | None = None
    placed_at: geo.Point | None = None
    fact_added: str | None = None


@dataclass(frozen=True)
class SkillOutcome:
    status: str
    reason: str | None = None
    duration_s: float = 0.0
    world_delta: WorldDelta | None = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_SUCCESS


@dataclass(frozen=True)
class ManipulationSkillSpec:
    """Declarative manipulation skill.

    effect_kind is one of "grasp" (pick up `target`), "place" (put the held
    item down on `target`; rest_height is the new surface height), or
    "press" (toggle `fact` on the world, e.g. a machine button).
    """

    name: str
    description: str
    target: str
    effect_kind: str
    base_success: float
    max_distance: float = 0.7
    max_facing_error: float = 0.35
    pitch_range: tuple[float, float] = (0.6, 1.1)
    requires_target_visible: bool = True
    requires_held: str | None = None
    facing_sensitivity: float = 2.0
    duration_s: float = 8.0
    rest_height: float | None = None
    fact: str | None = None

    def __post_init__(self):
        if self.effect_kind not in ("grasp", "place", "press"):
            raise ValueError(f"{self.name}: unknown effect_kind {self.effect_kind!r}")
        if not (0.0 <= self.base_success <= 1.0):
            raise ValueError(f"{self.name}: base_success outside [0, 1]")
        if self.effect_kind == "place" and self.rest_height is None:
            raise ValueError(f"{self.name}: place skills need rest_height")
        if self.effect_kind == "press" and not self.fact:
            raise ValueError(f"{self.name}: press skills need a fact")


# Precondition reason strings, checked in this fixed order.
REASON_OUT_OF_RANGE = "OutOfRange"
REASON_MISALIGNED = "Misaligned"
REASON_BAD_PITCH = "BadCameraPitch"
REASON_NOT_VISIBLE = "TargetNotVisible"
REASON_WRONG_HELD = "WrongHeldItem"


def unmet_preconditions(spec: ManipulationSkillSpec, world: SimWorld) -> list[str]:
    """All gate violations for attempting `spec` right now, in check order.

    Shared by the executor and the grounding logic so they can never
    disagree about whether an attempt is admissible.
    """
    state = world.state
    target = world.object(spec.target)  # raises UnknownObject if absent
    unmet: list[str] = []
    dist = geo.distance(state.position, target.position)
    if dist > spec.max_distance:
        unmet.append(REASON_OUT_OF_RANGE)
    facing_err = abs(geo.wrap_angle(state.heading - target.alignment_heading))
    if facing_err > spec.max_facing_error:
        unmet.append(REASON_MISALIGNED)
    lo, hi = spec.pitch_range
    if not (lo <= state.head_pitch <= hi):
        unmet.append(REASON_BAD_PITCH)
    if spec.requires_target_visible:
        dets = project_detections(state, world.scene, world.camera)
        if not any(d.label == spec.target for d in dets):
            unmet.append(REASON_NOT_VISIBLE)
    if spec.requires_held != state.held_item:
        unmet.append(REASON_WRONG_HELD)
    return unmet


def facing_error(spec: ManipulationSkillSpec, world: SimWorld) -> float:
    target = world.object(spec.target)
    return abs(geo.wrap_angle(world.state.heading - target.alignment_heading))


def execute_locomotion_skill(world: SimWorld, skill: LocomotionSkill) -> SkillOutcome:
    """Run one locomotion primitive to completion on the world.

    Emits a single "skill" event carrying the whole duration; per-tick
    collisions emit their own zero-duration events.
    """
    collided = False
    if skill.kind in HEAD_KINDS:
        yaw, pitch = skill.head_target
        world.set_head(yaw=yaw, pitch=pitch)
    else:
        for cmd in skill.tick_commands():
            if world.step_tick(cmd) is not None:
                collided = True
    duration = skill.duration_s()
    outcome = SkillOutcome(
        status=STATUS_SUCCESS,
        reason="clamped at wall" if collided else None,
        duration_s=duration,
    )
    world.advance("skill", duration, {
        "skill": skill.kind,
        "magnitude": skill.magnitude,
        "head_target": list(skill.head_target) if skill.head_target else None,
        "outcome": outcome.status,
        "collided": collided,
        "x": world.state.x, "y": world.state.y,
        "heading": world.state.heading,
        "mode": world.state.mode,
    })
    return outcome


def execute_manipulation_skill(
    spec: ManipulationSkillSpec, world: SimWorld, rng: random.Random
) -> SkillOutcome:
    """Attempt one manipulation skill.

    Precondition violations return immediately (first reason in check
    order), take no time, and consume no randomness. Admissible attempts
    take spec.duration_s and succeed with probability
    base_success * exp(-facing_sensitivity * facing_error^2).
    """
    try:
        unmet = unmet_preconditions(spec, world)
    except UnknownObject:
        return SkillOutcome(status=STATUS_PRECONDITION_UNMET, reason=REASON_NOT_VISIBLE)
    if unmet:
        world.advance("skill", 0.0, {
            "skill": spec.name, "outcome": STATUS_PRECONDITION_UNMET,
            "reason": unmet[0],
            "x": world.state.x, "y": world.state.y,
            "heading": world.state.heading, "mode": world.state.mode,
        })
        return SkillOutcome(status=STATUS_PRECONDITION_UNMET, reason=unmet[0])

    err = facing_error(spec, world)
    p = spec.base_success * math.exp(-spec.facing_sensitivity * err * err)
    success = rng.random() < p
    delta = None
    if success:
        target = world.object(spec.target)
        if spec.effect_kind == "grasp":
            world.grasp(spec.target)
            delta = WorldDelta(grasped=spec.target)
        elif spec.effect_kind == "place":
            # The item lands on the target, nudged toward the robot's side.
            away = geo.sub(world.state.position, target.position)
            n = geo.norm(away)
            offset = geo.scale(away, min(0.3, target.footprint_radius) / n) if n > 1e-9 else (0.0, 0.0)
            pos = geo.add(target.position, offset)
            placed = world.place_held(pos, spec.rest_height, target.alignment_direction)
            delta = WorldDelta(placed=placed, placed_at=pos)
        else:
            world.facts.add(spec.fact)
            delta = WorldDelta(fact_added=spec.fact)
    outcome = SkillOutcome(
        status=STATUS_SUCCESS if success else STATUS_FAILURE,
        reason=None if success else "SkillExecutionFailed",
        duration_s=spec.duration_s,
        world_delta=delta,
    )
    world.advance("skill", spec.duration_s, {
        "skill": spec.name, "outcome": outcome.status, "reason": outcome.reason,
        "x": world.state.x, "y": world.state.y,
        "heading": world.state.heading, "mode": world.state.mode,
    })
    return outcome


@dataclass
class SkillRegistry:
    """Name -> spec table for manipulation skills, plus the fixed locomotion set.

    chunk sizes record the skill policies' action-chunk metadata
    (transformer policies trained on 30-step chunks, deployed re-planning
    every 10).
    """

    chunk_train: int = 30
    chunk_deploy: int = 10
    _manipulation: dict[str, ManipulationSkillSpec] = field(default_factory=dict)

    def register(self, spec: ManipulationSkillSpec) -> None:
        if spec.name in self._manipulation or spec.name in LOCOMOTION_KINDS:
            raise DuplicateSkill(spec.name)
        self._manipulation[spec.name] = spec

    def lookup(self, query: str) -> ManipulationSkillSpec:
        """Find a skill by exact name, else by description containment."""
        if query in self._manipulation:
            return self._manipulation[query]
        q = query.strip().lower()
        matches = [
            s for s in self._manipulation.values()
            if s.description.lower() in q or q in s.description.lower()
        ]
        if len(matches) == 1:
            return matches[0]
        raise UnknownSkill(query)

    def has(self, name: str) -> bool:
        return name in self._manipulation

    def get(self, name: str) -> ManipulationSkillSpec:
        try:
            return self._manipulation[name]
        except KeyError:
            raise UnknownSkill(name) from None

    @property
    def manipulation_names(self) -> list[str]:
        return sorted(self._manipulation)

    def manipulation_specs(self) -> list[ManipulationSkillSpec]:
        return [self._manipulation[n] for n in self.manipulation_names]

    def execute(self, name: str, world: SimWorld, rng: random.Random) -> SkillOutcome:
        return execute_manipulation_skill(self.get(name), world, rng)

    def render_action_set(self) -> str:
        """Human/FM-readable action list: nine locomotion kinds + skills, sorted."""
        lines = []
        entries: list[tuple[str, str, str]] = []
        for kind in LOCOMOTION_KINDS:
            if kind in MOTION_KINDS:
                sig = f'{kind}(magnitude)'
            elif kind == TILT_HEAD:
                sig = f'{kind}(pitch)'
            elif kind == TURN_HEAD:
                sig = f'{kind}(yaw)'
            else:
                sig = f'{kind}()'
            entries.append((kind, sig, _LOCOMOTION_DESCRIPTIONS[kind]))
        for spec in self._manipulation.values():
            entries.append((spec.name, f"{spec.name}()", spec.description))
        for _, sig, desc in sorted(entries):
            lines.append(f"- {sig}: {desc}")
        return "\n".join(lines)


def register_skill(registry: SkillRegistry, spec: ManipulationSkillSpec) -> None:
    registry.register(spec)


def lookup_skill(registry: SkillRegistry, query: str) -> ManipulationSkillSpec:
    return registry.lookup(query)


def nearest_navigable_landmark(world: SimWorld, target: str) -> str:
    """The landmark to walk to when `target` is out of reach.

    A navigable object is its own landmark; anything else maps to the
    nearest navigable object (e.g. an item maps to the table it sits on).
    """
    obj = world.object(target)
    if obj.navigable:
        return obj.name
    best = None
    best_d = math.inf
    for other in world.scene.objects:
        if not other.navigable:
            continue
        d = geo.distance(obj.position, other.position)
        if d < best_d:
            best, best_d = other.name, d
    if best is None:
        raise UnknownObject(f"no navigable landmark near {target}")
    return best
