"""Grounded intermediate planner between the slow planner and the skills.

Three composite behaviors (move_towards, search_for, adjust_approach) run
entire navigation maneuvers from vision alone, one latency charge per
decision, no slow-planner queries in between. ground_plan maps a parsed
plan onto a composite, a direct skill execution, a success report, or a
bounce back to the slow planner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import geometry as geo
from .errors import InvalidDepth, MissingTarget, UnknownObject, UnknownSkill
from .skills import (
    GO_STRAIGHT,
    LOCOMOTION_KINDS,
    REASON_BAD_PITCH,
    REASON_MISALIGNED,
    REASON_NOT_VISIBLE,
    REASON_OUT_OF_RANGE,
    SIDESTEP_LEFT,
    SIDESTEP_RIGHT,
    TURN_LEFT,
    TURN_RIGHT,
    WALK_BACKWARDS,
    LocomotionSkill,
    SkillRegistry,
    execute_locomotion_skill,
    nearest_navigable_landmark,
    unmet_preconditions,
)
from .world import CameraModel, Detection, RobotState, SimWorld

STATUS_SUCCESS = "success"
STATUS_TARGET_LOST = "target_lost"
STATUS_TIMEOUT = "timeout"

PLAN_EXECUTE_SKILL = "execute_skill"
PLAN_NAVIGATE = "navigate"
PLAN_SEARCH = "search"
PLAN_ADJUST = "adjust"
PLAN_REPORT_SUCCESS = "report_success"
PLAN_ASK_FM = "ask_fm"

# Plan names the slow planner may use for navigation intents.
NAVIGATION_VERBS = frozenset({
    "move_towards", "move_toward", "navigate", "navigate_to", "go_to",
    "search_for", "find", "search", "walk_to",
})
SEARCH_VERBS = frozenset({"search_for", "find", "search"})


@dataclass(frozen=True)
class NavigationParams:
    """Knobs for the composite behaviors."""

    angle_threshold: float = 0.1          # rad; aligned when |angle| <= this
    distance_threshold: float = 0.8       # m; arrived when depth <= this
    max_move_iterations: int = 200
    max_search_iterations: int = 16       # ~ full revolution at large turns
    lookahead_m: float = 0.6
    connector_latency_s: float = 1.0
    nav_head_pitch: float = 0.3
    adjust_head_pitch: float = 0.9
    adjust_stop_distance: float = 0.5     # m; final standoff from the target
    adjust_engage_distance: float = 2.5   # m; adjust instead of navigate below this
    sweep_yaws: tuple[float, ...] = ()    # optional search head sweep, disabled


@dataclass(frozen=True)
class NavResult:
    status: str
    iterations: int
    path_length_m: float
    elapsed_s: float
    final_state: RobotState


@dataclass(frozen=True)
class GroundedPlan:
    """What the connector decided to do with a slow-planner action."""

    kind: str
    skill_name: str | None = None          # execute_skill: manipulation name
    locomotion: LocomotionSkill | None = None  # execute_skill: primitive
    target: str | None = None              # navigate/search/adjust
    direction: str | None = None           # search/adjust
    reason: str | None = None              # ask_fm / report_success


@dataclass
class ConnectorState:
    """Cross-call connector memory (last seen bearing sign per label)."""

    last_bearing_cw: dict[str, float] = field(default_factory=dict)


def estimate_target_pose(
    detection: Detection, camera: CameraModel, head_yaw: float = 0.0
) -> tuple[float, float]:
    """(angle, distance) of one detection.

    Angle is clockwise-positive relative to the body heading, derived from
    the bbox center column and corrected for the current head yaw:
    angle = (u_center - 0.5) * hfov - head_yaw.
    """
    if detection.depth <= 0.0:
        raise InvalidDepth(f"{detection.label}: depth {detection.depth}")
    angle = (detection.u_center - 0.5) * camera.hfov - head_yaw
    return angle, detection.depth


def locate_target(
    detections: list[Detection], target: str, camera: CameraModel, head_yaw: float = 0.0
) -> tuple[float, float]:
    """estimate_target_pose for the named label; MissingTarget if absent."""
    for det in detections:
        if det.label == target:
            return estimate_target_pose(det, camera, head_yaw)
    raise MissingTarget(target)


def _turn_towards(angle_cw: float, params: NavigationParams) -> LocomotionSkill:
    magnitude = "small" if abs(angle_cw) <= 2.0 * params.angle_threshold else "large"
    kind = TURN_RIGHT if angle_cw > 0.0 else TURN_LEFT
    return LocomotionSkill(kind=kind, magnitude=magnitude)


def _charge(world: SimWorld, params: NavigationParams, behavior: str, note: str) -> None:
    world.advance("connector_decision", params.connector_latency_s,
                  {"behavior": behavior, "note": note})


def move_towards(
    world: SimWorld,
    target: str,
    params: NavigationParams,
    state: ConnectorState | None = None,
) -> NavResult:
    """Walk to a visible target: turn to face it, go straight, sidestep
    around obstacles; stop within distance_threshold.

    Loses the target -> target_lost; loop cap -> timeout. One latency
    charge and at most one skill per iteration.
    """
    t0 = world.sim_time
    path = 0.0
    consecutive_sidesteps = 0
    for i in range(1, params.max_move_iterations + 1):
        _charge(world, params, "move_towards", target)
        world.set_head(yaw=0.0, pitch=params.nav_head_pitch)
        dets = world.detect()
        try:
            angle_cw, dist = locate_target(dets, target, world.camera,
                                           world.state.head_yaw)
        except MissingTarget:
            return NavResult(STATUS_TARGET_LOST, i, path, world.sim_time - t0,
                             world.state)
        if state is not None:
            state.last_bearing_cw[target] = angle_cw
        if dist <= params.distance_threshold:
            return NavResult(STATUS_SUCCESS, i, path, world.sim_time - t0,
                             world.state)

        obstacle = None if params.lookahead_m <= 0 \
            else _forward_obstacle(world, target, params)
        before = world.state.position
        if obstacle is not None:
            if consecutive_sidesteps >= 3:
                skill = _turn_towards(angle_cw if abs(angle_cw) > 1e-9 else 0.1, params)
                consecutive_sidesteps = 0
            else:
                kind = SIDESTEP_RIGHT if obstacle.side == "left" else SIDESTEP_LEFT
                skill = LocomotionSkill(kind=kind, magnitude="small")
                consecutive_sidesteps += 1
        elif abs(angle_cw) > params.angle_threshold:
            skill = _turn_towards(angle_cw, params)
            consecutive_sidesteps = 0
        else:
            skill = LocomotionSkill(kind=GO_STRAIGHT, magnitude="large")
            consecutive_sidesteps = 0
        execute_locomotion_skill(world, skill)
        path += geo.distance(before, world.state.position)
    return NavResult(STATUS_TIMEOUT, params.max_move_iterations, path,
                     world.sim_time - t0, world.state)


def _forward_obstacle(world: SimWorld, target: str, params: NavigationParams):
    from .world import check_obstacle

    ignore = {target}
    held = world.state.held_item
    if held:
        ignore.add(held)
    return check_obstacle(world.state, world.scene, params.lookahead_m, ignore=ignore)


def search_for(
    world: SimWorld,
    target: str,
    direction: str,
    params: NavigationParams,
    state: ConnectorState | None = None,
) -> NavResult:
    """Rotate in place in one direction until the target is detected.

    Gives up after a full revolution (or the iteration cap), leaving the
    heading within one turn step of where it started.
    """
    if direction not in ("left", "right"):
        raise ValueError(f"direction {direction!r}")
    t0 = world.sim_time
    turn_kind = TURN_LEFT if direction == "left" else TURN_RIGHT
    cumulative = 0.0
    sweep = (0.0,) + tuple(params.sweep_yaws)
    for i in range(1, params.max_search_iterations + 1):
        _charge(world, params, "search_for", target)
        world.set_head(yaw=0.0, pitch=params.nav_head_pitch)
        found = False
        for yaw in sweep:
            world.set_head(yaw=yaw)
            dets = world.detect()
            if any(d.label == target for d in dets):
                found = True
                break
        if found:
            world.set_head(yaw=0.0)
            if state is not None:
                try:
                    angle_cw, _ = locate_target(world.detect(quiet=True), target,
                                                world.camera, world.state.head_yaw)
                    state.last_bearing_cw[target] = angle_cw
                except MissingTarget:
                    pass  # seen only under a sweep yaw; no bearing to record
            return NavResult(STATUS_SUCCESS, i, 0.0, world.sim_time - t0, world.state)
        if cumulative >= geo.TWO_PI - 1e-9:
            return NavResult(STATUS_TIMEOUT, i, 0.0, world.sim_time - t0, world.state)
        execute_locomotion_skill(world, LocomotionSkill(kind=turn_kind, magnitude="large"))
        cumulative += 0.45
    return NavResult(STATUS_TIMEOUT, params.max_search_iterations, 0.0,
                     world.sim_time - t0, world.state)


def _target_world_estimate(world: SimWorld, angle_cw: float, depth: float) -> geo.Point:
    bearing = world.state.heading - angle_cw  # convert clockwise-positive back to world CCW
    return (world.state.x + depth * math.cos(bearing),
            world.state.y + depth * math.sin(bearing))


def choose_adjust_direction(world: SimWorld, target: str) -> str:
    """The orbit direction that shortens the arc to the alignment approach side."""
    obj = world.object(target)
    az_now = math.atan2(world.state.y - obj.position[1], world.state.x - obj.position[0])
    az_goal = geo.wrap_angle(obj.alignment_heading + math.pi)  # stand opposite the facing
    delta = geo.wrap_angle(az_goal - az_now)
    return "left" if delta >= 0.0 else "right"


def adjust_approach(
    world: SimWorld,
    target: str,
    direction: str,
    params: NavigationParams,
    state: ConnectorState | None = None,
) -> NavResult:
    """Fine approach onto a nearby target's annotated side.

    The body keeps facing the target the whole time: turns re-center it,
    sidesteps orbit around it toward the approach azimuth (direction picks
    the orbit sense, "left" = counterclockwise around the target), straight
    steps close the range onto the standoff distance, and the head tracks
    the target in both axes using the detection box. Success implies the
    shared manipulation preconditions hold: standoff within 0.15 m of
    adjust_stop_distance, body facing within angle_threshold of the
    annotated alignment heading, head pitch inside [0.6, 1.1], and the
    target visible in the final head pose.
    """
    if direction not in ("left", "right"):
        raise ValueError(f"direction {direction!r}")
    try:
        obj = world.object(target)
    except UnknownObject:
        return NavResult(STATUS_TARGET_LOST, 0, 0.0, 0.0, world.state)
    align = obj.alignment_heading
    goal_az = geo.wrap_angle(align + math.pi)  # azimuth of the approach side
    orbit_sign = 1.0 if direction == "left" else -1.0
    stop = params.adjust_stop_distance
    t0 = world.sim_time
    path = 0.0
    target_est: geo.Point | None = None
    track_pitch = params.adjust_head_pitch

    for i in range(1, params.max_move_iterations + 1):
        _charge(world, params, "adjust_approach", target)
        if target_est is not None:
            want = geo.wrap_angle(
                math.atan2(target_est[1] - world.state.y, target_est[0] - world.state.x)
                - world.state.heading)
            world.set_head(yaw=max(-1.2, min(1.2, want)), pitch=track_pitch)
        else:
            world.set_head(yaw=0.0, pitch=track_pitch)
        seen = next((d for d in world.detect() if d.label == target), None)
        if seen is None:
            seen = _sweep_for_target(world, target, params)
        if seen is None:
            return NavResult(STATUS_TARGET_LOST, i, path, world.sim_time - t0,
                             world.state)
        angle_cw, depth = estimate_target_pose(seen, world.camera,
                                               world.state.head_yaw)
        if state is not None:
            state.last_bearing_cw[target] = angle_cw
        target_est = _target_world_estimate(world, angle_cw, depth)
        # The box's vertical offset measures elevation relative to the
        # camera axis; fold it in so the next pose re-centers the target.
        v_off = (0.5 - seen.v_center) * world.camera.vfov
        track_pitch = min(1.2, max(0.0, world.state.head_pitch - v_off))

        az = math.atan2(world.state.y - target_est[1],
                        world.state.x - target_est[0])
        az_err = geo.wrap_angle(goal_az - az)
        r = geo.distance(world.state.position, target_est)
        bearing_cw = geo.wrap_angle(world.state.heading - math.atan2(
            target_est[1] - world.state.y, target_est[0] - world.state.x))

        if abs(az_err) <= 0.15 and abs(r - stop) <= 0.15:
            facing_err_cw = geo.wrap_angle(world.state.heading - align)
            if abs(facing_err_cw) > params.angle_threshold:
                before = world.state.position
                execute_locomotion_skill(world, _turn_towards(facing_err_cw, params))
                path += geo.distance(before, world.state.position)
                continue
            world.set_head(yaw=0.0, pitch=min(1.1, max(0.6, track_pitch)))
            if any(d.label == target for d in world.detect(quiet=True)):
                return NavResult(STATUS_SUCCESS, i, path, world.sim_time - t0,
                                 world.state)
            continue  # posed correctly but target out of frame: keep refining

        before = world.state.position
        if abs(bearing_cw) > 2.0 * params.angle_threshold:
            skill = _turn_towards(bearing_cw, params)
        elif r > stop + 0.4:
            # Close in before orbiting so the arc stays short and the
            # target stays well inside detection range.
            magnitude = "large" if r - stop > 1.5 else "small"
            skill = LocomotionSkill(kind=GO_STRAIGHT, magnitude=magnitude)
        elif abs(az_err) > 0.15:
            # Orbit in the committed sense; reverse only on clear overshoot.
            sign = orbit_sign if az_err * orbit_sign > -0.15 else -orbit_sign
            kind = SIDESTEP_RIGHT if sign > 0.0 else SIDESTEP_LEFT
            skill = LocomotionSkill(kind=kind, magnitude="small")
        elif r > stop + 0.15:
            skill = LocomotionSkill(kind=GO_STRAIGHT, magnitude="small")
        else:
            skill = LocomotionSkill(kind=WALK_BACKWARDS, magnitude="small")
        execute_locomotion_skill(world, skill)
        path += geo.distance(before, world.state.position)
    return NavResult(STATUS_TIMEOUT, params.max_move_iterations, path,
                     world.sim_time - t0, world.state)


def _sweep_for_target(world: SimWorld, target: str, params: NavigationParams):
    """Sweep the head over a yaw/pitch grid; first sighting wins."""
    if world.camera_mode == "fixed":
        return next((d for d in world.detect(quiet=True) if d.label == target), None)
    for pitch in (params.nav_head_pitch, 0.6, params.adjust_head_pitch, 1.1):
        for yaw in (0.0, -0.6, 0.6, -1.2, 1.2):
            world.set_head(yaw=yaw, pitch=pitch)
            seen = next((d for d in world.detect(quiet=True) if d.label == target), None)
            if seen is not None:
                return seen
    return None


def _resolve_object_label(world: SimWorld, raw: str) -> str | None:
    name = raw.strip().lower().replace(" ", "_")
    if world.has_object(name):
        return name
    # Tolerate articles and partial names ("the wooden table").
    cleaned = [w for w in name.replace("_", " ").split() if w not in ("the", "a", "an")]
    joined = "_".join(cleaned)
    if world.has_object(joined):
        return joined
    candidates = [o.name for o in world.scene.objects if joined and joined in o.name]
    if len(candidates) == 1:
        return candidates[0]
    return None


def _fixable_by_adjustment(unmet: list[str], world: SimWorld,
                           params: NavigationParams) -> bool:
    fixable = {REASON_OUT_OF_RANGE, REASON_MISALIGNED, REASON_BAD_PITCH, REASON_NOT_VISIBLE}
    if not set(unmet) <= fixable:
        return False
    if REASON_BAD_PITCH in unmet and world.camera_mode == "fixed":
        return False  # adjustment cannot move a fixed head
    return True


def ground_plan(
    call,
    world: SimWorld,
    registry: SkillRegistry,
    params: NavigationParams,
    adjustment_enabled: bool = True,
    state: ConnectorState | None = None,
) -> GroundedPlan:
    """Ground one parsed slow-planner action (a SkillCall) into a decision.

    Never returns an execute_skill for a manipulation whose preconditions
    are currently unmet; such plans become adjust/navigate maneuvers or a
    bounce back to the slow planner with the reason.
    """
    _charge(world, params, "ground_plan", getattr(call, "name", "?"))
    name = call.name
    args = list(call.args)

    if name in NAVIGATION_VERBS:
        if not args or not isinstance(args[0], str):
            return GroundedPlan(kind=PLAN_ASK_FM, reason="navigation plan needs a target name")
        label = _resolve_object_label(world, args[0])
        if label is None:
            return GroundedPlan(kind=PLAN_ASK_FM, reason=f"unknown place {args[0]!r}")
        dets = world.detect(quiet=True)
        visible = any(d.label == label for d in dets)
        if visible:
            _, depth = locate_target(dets, label, world.camera, world.state.head_yaw)
            if depth <= params.distance_threshold and name not in SEARCH_VERBS:
                return GroundedPlan(kind=PLAN_REPORT_SUCCESS, target=label,
                                    reason=f"already within {params.distance_threshold} m")
            return GroundedPlan(kind=PLAN_NAVIGATE, target=label)
        last = (state.last_bearing_cw.get(label) if state is not None else None)
        direction = "right" if last is None or last >= 0.0 else "left"
        return GroundedPlan(kind=PLAN_SEARCH, target=label, direction=direction)

    if name in LOCOMOTION_KINDS:
        try:
            skill = locomotion_from_call(name, args)
        except (ValueError, UnknownSkill) as exc:
            return GroundedPlan(kind=PLAN_ASK_FM, reason=str(exc))
        return GroundedPlan(kind=PLAN_EXECUTE_SKILL, locomotion=skill)

    try:
        spec = registry.lookup(name)
    except UnknownSkill:
        return GroundedPlan(kind=PLAN_ASK_FM, reason=f"unknown skill {name!r}")

    try:
        unmet = unmet_preconditions(spec, world)
    except UnknownObject:
        return GroundedPlan(kind=PLAN_ASK_FM,
                            reason=f"manipulation target {spec.target!r} not in scene")
    if not unmet:
        return GroundedPlan(kind=PLAN_EXECUTE_SKILL, skill_name=spec.name)

    target_obj = world.object(spec.target)
    dist = geo.distance(world.state.position, target_obj.position)
    if adjustment_enabled and dist <= params.adjust_engage_distance \
            and _fixable_by_adjustment(unmet, world, params):
        return GroundedPlan(kind=PLAN_ADJUST, target=spec.target,
                            direction=choose_adjust_direction(world, spec.target))
    if REASON_OUT_OF_RANGE in unmet:
        landmark = nearest_navigable_landmark(world, spec.target)
        landmark_dist = geo.distance(world.state.position, world.object(landmark).position)
        if landmark_dist > params.distance_threshold:
            return GroundedPlan(kind=PLAN_NAVIGATE, target=landmark)
    return GroundedPlan(kind=PLAN_ASK_FM,
                        reason=f"{spec.name} blocked: {', '.join(unmet)}")


def locomotion_from_call(name: str, args: list) -> LocomotionSkill:
    """Build a locomotion primitive from a parsed call's positional args."""
    from .skills import HEAD_KINDS, MOTION_KINDS, NO_ACTION, TILT_HEAD

    if name in MOTION_KINDS:
        magnitude = str(args[0]) if args else "small"
        return LocomotionSkill(kind=name, magnitude=magnitude)
    if name in HEAD_KINDS:
        if not args:
            raise ValueError(f"{name} needs a target angle")
        value = float(args[0])
        head = (None, value) if name == TILT_HEAD else (value, None)
        return LocomotionSkill(kind=name, head_target=head)
    return LocomotionSkill(kind=NO_ACTION)
