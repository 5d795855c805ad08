"""Decision backends: the scripted planner oracle and the remote gateway client.

ScriptedOracle stands in for the cloud model in all hermetic tests. It reads
ground truth (world plus task progress) instead of the prompt text, and its
only randomness is hashed from (seed, sim_time), so the same world state
always yields the same reply. Its replies use exactly the titled-section
formats the stage parsers expect.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Protocol

from .. import geometry as geo
from ..connector import NavigationParams
from ..gateway import GatewayConfig, send_query
from ..skills import (REASON_BAD_PITCH, REASON_MISALIGNED, REASON_NOT_VISIBLE,
                      REASON_OUT_OF_RANGE, nearest_navigable_landmark,
                      unmet_preconditions)
from ..world import SimWorld, relative_angle_and_distance
from .prompts import (
    STAGE_ACTION_PLANNING,
    STAGE_INFO_GATHERING,
    STAGE_REFLECTION,
    STAGE_SUBTASK_PROPOSAL,
)

SUCCESS_VERDICT = "SUCCESSFUL"


@dataclass(frozen=True)
class ModelReply:
    """One backend answer: the raw text and the latency to charge for it."""

    text: str
    latency_s: float


class ModelBackend(Protocol):
    def query(self, prompt: str, stage: str) -> ModelReply: ...


def hash01(*parts) -> float:
    """Deterministic pseudo-uniform value in [0, 1) keyed by the parts."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


class ScriptedOracle:
    """Ground-truth-driven planner emulating the cloud model.

    Planning policy: serve the first unmet subprocess of the task, routing
    through the hallway markers when the goal sits in another room. With the
    connector downstream it emits composite intents (move_towards / the
    skill name); without it, it emits one locomotion primitive per decision,
    with the bearing estimate corrupted in hashed time windows to model the
    planner's weak spatial grounding (probability p_err per window).
    """

    def __init__(
        self,
        world: SimWorld,
        task,
        tracker,
        registry,
        params: NavigationParams | None = None,
        *,
        seed: int = 0,
        connector_enabled: bool = True,
        adjustment_enabled: bool = True,
        p_err: float = 0.42,
        latency_s: float = 8.0,
        burst_window_s: float = 40.0,
    ):
        self.world = world
        self.task = task
        self.tracker = tracker
        self.registry = registry
        self.params = params or NavigationParams()
        self.seed = seed
        self.connector_enabled = connector_enabled
        self.adjustment_enabled = adjustment_enabled
        self.p_err = p_err
        self.latency_s = latency_s
        self.burst_window_s = burst_window_s

    # -- backend interface ----------------------------------------------

    def query(self, prompt: str, stage: str) -> ModelReply:
        del prompt  # the oracle reads the world, not the rendering
        if stage == STAGE_REFLECTION:
            text = self._reflection()
        elif stage == STAGE_INFO_GATHERING:
            text = self._info_gathering()
        elif stage == STAGE_SUBTASK_PROPOSAL:
            text = self._subtask_proposal()
        elif stage == STAGE_ACTION_PLANNING:
            text = self._action_planning()
        else:
            raise ValueError(f"unknown stage {stage!r}")
        return ModelReply(text=text, latency_s=self.latency_s)

    # -- shared ground-truth helpers --------------------------------------

    def _first_unmet(self):
        return self.tracker.first_unmet()

    def _room_name(self, point) -> str:
        room = self.world.scene.room_of(point)
        return room.name if room is not None else "unknown"

    def _route_label(self, label: str) -> str:
        """The label to walk toward: `label`, a hallway marker, or a waypoint.

        Routes through an intermediate landmark when the goal sits in
        another room, or beyond the camera's acquisition range (the
        Connector cannot lock onto what the camera cannot see).
        """
        scene = self.world.scene
        if not scene.has_object(label):
            return label
        here = scene.room_of(self.world.state.position)
        there = scene.room_of(scene.object(label).position)
        if here is not None and there is not None and here.name != there.name:
            marker = f"{there.name}_hallway"
            if scene.has_object(marker):
                return marker
        goal = scene.object(label)
        reach = self.world.camera.max_range - 0.5
        dist = geo.distance(self.world.state.position, goal.position)
        if dist <= reach:
            return label
        best = None
        best_d = dist - 1.0
        for cand in scene.objects:
            if not cand.navigable or cand.name == label:
                continue
            d_here = geo.distance(self.world.state.position, cand.position)
            if d_here > reach or d_here < 1.0:
                continue
            d_goal = geo.distance(cand.position, goal.position)
            if d_goal < best_d:
                best, best_d = cand.name, d_goal
        return best if best is not None else label

    def _nav_goal_label(self, sp) -> str:
        if sp.kind == "navigate":
            return self._route_label(sp.target)
        spec = self.registry.get(sp.skill)
        return self._route_label(nearest_navigable_landmark(self.world, spec.target))

    def _target_label(self, sp) -> str:
        if sp.kind == "navigate":
            return sp.target
        return self.registry.get(sp.skill).target

    def _manip_geometry(self, sp):
        """(spec, distance, same_room) for a manipulation subprocess."""
        spec = self.registry.get(sp.skill)
        target = self.world.object(spec.target)
        dist = geo.distance(self.world.state.position, target.position)
        same_room = (self._room_name(self.world.state.position)
                     == self._room_name(target.position))
        return spec, dist, same_room

    def _detection_lines(self) -> str:
        dets = self.world.detect(quiet=True)
        if not dets:
            return "1. No task-relevant object is visible from the current viewpoint."
        hfov = self.world.camera.hfov
        yaw = self.world.state.head_yaw
        lines = []
        for i, d in enumerate(sorted(dets, key=lambda d: d.depth), start=1):
            angle_cw = (d.u_center - 0.5) * hfov - yaw
            lines.append(f"{i}. {d.label}: direction {angle_cw:+.2f} rad (clockwise "
                         f"from body), range {d.depth:.2f} m.")
        return "\n".join(lines)

    # -- stage emitters ---------------------------------------------------

    def _reflection(self) -> str:
        done = self.tracker.done_count()
        total = len(self.task.subprocesses)
        sp = self._first_unmet()
        lines = [f"1. {done} of {total} steps of the task are complete."]
        if sp is None:
            lines.append("2. Every required step has been verified against the scene.")
            verdict = SUCCESS_VERDICT
        else:
            lines.append(f"2. The next pending step is: {sp.description}.")
            lines.append("3. The last action has not finished the task on its own.")
            verdict = f"False. Still pending: {sp.description}."
        return ("Self Reflection Reasoning:\n" + "\n".join(lines)
                + "\nSuccess Detection:\n" + verdict)

    def _info_gathering(self) -> str:
        sp = self._first_unmet()
        if sp is None:
            target = "null"
            reason = "The task is complete, so no further target is needed."
        else:
            target = self._nav_goal_label(sp)
            reason = (f"The pending step ({sp.description}) is anchored at "
                      f"{self._target_label(sp)}, so {target} is the object to localize.")
        area = self._room_name(self.world.state.position)
        return ("Image Description:\n" + self._detection_lines()
                + "\nTarget Name:\n" + target
                + "\nReasoning for Target:\n" + reason
                + "\nArea Location:\n" + area)

    def _subtask_proposal(self) -> str:
        done = self.tracker.done_count()
        total = len(self.task.subprocesses)
        state = self.world.state
        held = state.held_item or "nothing"
        summary = (f"{done} of {total} steps are done; the robot stands at "
                   f"({state.x:.1f}, {state.y:.1f}) in the "
                   f"{self._room_name(state.position)} holding {held}.")
        sp = self._first_unmet()
        if sp is None:
            reasoning = "All steps are complete, so no new subtask is needed."
            subtask = "Stand by; the task is complete."
        else:
            reasoning = (f"The first unmet requirement is \"{sp.description}\"; "
                         "it must be finished before anything later can start.")
            subtask = sp.description
        return ("History_summary:\n" + summary
                + "\nSubtask_reasoning:\n" + reasoning
                + "\nSubtask description:\n" + subtask)

    def _action_planning(self) -> str:
        if self.connector_enabled:
            code, why = self._plan_with_connector()
            return "Action:\n```python\n" + code + "\n```"
        code, why = self._plan_without_connector()
        return ("Decision_Making_Reasoning:\n" + why
                + "\nActions:\n```python\n" + code + "\n```"
                + "\nKey_reason_of_last_action:\n" + (why.splitlines()[0] if why else "None"))

    # -- planning policies -------------------------------------------------

    def _plan_with_connector(self) -> tuple[str, str]:
        sp = self._first_unmet()
        if sp is None:
            return "", "1. The task is complete, so the action must be empty."
        if sp.kind == "navigate":
            goal = self._route_label(sp.target)
            return f'move_towards("{goal}")', f"1. Walk to {goal} and stop nearby."
        spec, dist, same_room = self._manip_geometry(sp)
        if not same_room or dist > self.params.adjust_engage_distance:
            goal = self._nav_goal_label(sp)
            return (f'move_towards("{goal}")',
                    f"1. {spec.target} is {dist:.1f} m away; close in via {goal} first.")
        if not self.adjustment_enabled:
            fix = self._coarse_fix(spec)
            if fix is not None:
                return fix
        return f"{spec.name}()", f"1. In position; run {spec.name} now."

    def _coarse_fix(self, spec) -> tuple[str, str] | None:
        """Crude repositioning when the fine-approach module is off.

        Body turns land within roughly 0.3 rad of a commanded heading, so
        only lenient facing gates are worth fixing that way; strict gates
        stay blocked without the approach adjuster.
        """
        world = self.world
        unmet = unmet_preconditions(spec, world)
        if not unmet:
            return None
        reason = unmet[0]
        if reason == REASON_OUT_OF_RANGE:
            return 'go_straight("small")', "1. A short step closes the reach gap."
        if reason == REASON_MISALIGNED and spec.max_facing_error >= 0.3:
            obj = world.object(spec.target)
            err_ccw = geo.wrap_angle(obj.alignment_heading - world.state.heading)
            name = "turn_left" if err_ccw > 0.0 else "turn_right"
            mag = "large" if abs(err_ccw) > 0.6 else "small"
            return f'{name}("{mag}")', "1. Square the torso up with the workspace."
        if reason in (REASON_BAD_PITCH, REASON_NOT_VISIBLE):
            lo, hi = spec.pitch_range
            mid = round((lo + hi) / 2.0, 3)
            if abs(world.state.head_pitch - mid) > 1e-9:
                return (f"tilt_head({mid:g})",
                        "1. Tip the camera down so the workspace is in view.")
            obj = world.object(spec.target)
            bearing_ccw = geo.wrap_angle(
                math.atan2(obj.position[1] - world.state.y,
                           obj.position[0] - world.state.x) - world.state.heading)
            want_yaw = max(-1.2, min(1.2, bearing_ccw))
            if abs(bearing_ccw) <= 1.2 and abs(world.state.head_yaw - want_yaw) > 1e-9:
                return (f"turn_head({want_yaw:.2f})",
                        "1. Pan the camera onto the workspace.")
            if abs(bearing_ccw) > 1.2:
                back_x = world.state.x - 0.3 * math.cos(world.state.heading)
                back_y = world.state.y - 0.3 * math.sin(world.state.heading)
                if math.hypot(back_x - obj.position[0],
                              back_y - obj.position[1]) <= spec.max_distance:
                    return ('walk_backwards("small")',
                            "1. Back up so the workspace fits in the camera frame.")
        return None

    def _plan_without_connector(self) -> tuple[str, str]:
        sp = self._first_unmet()
        world = self.world
        state = world.state
        if sp is None:
            return "", "1. The task is complete, so the action must be empty."

        if sp.kind != "navigate":
            spec, dist, same_room = self._manip_geometry(sp)
            if same_room and dist <= self.params.distance_threshold:
                lo, hi = spec.pitch_range
                if not (lo <= state.head_pitch <= hi):
                    mid = round((lo + hi) / 2.0, 3)
                    return (f"tilt_head({mid:g})",
                            "1. Tip the camera down toward the workspace.")
                return f"{spec.name}()", f"1. Within reach; attempt {spec.name}."

        goal = self._nav_goal_label(sp)
        if abs(state.head_pitch - self.params.nav_head_pitch) > 1e-9:
            return (f"tilt_head({self.params.nav_head_pitch:g})",
                    "1. Level the camera for walking.")
        dets = world.detect(quiet=True)
        window = int(world.sim_time // self.burst_window_s)
        if not any(d.label == goal for d in dets):
            direction = "left" if hash01(self.seed, "dir", window) < 0.5 else "right"
            return (f'turn_{direction}("large")',
                    f"1. {goal} is not in view; keep turning {direction} to find it.")
        angle, _ = relative_angle_and_distance(state, world.object(goal))
        if hash01(self.seed, "burst", window) < self.p_err:
            angle = hash01(self.seed, "bearing", f"{world.sim_time:.1f}") * 2.0 * math.pi - math.pi
        why = f"1. {goal} appears about {angle:+.2f} rad off the heading."
        if abs(angle) <= 0.3:
            return 'go_straight("large")', why
        magnitude = "large" if abs(angle) > 0.6 else "small"
        side = "left" if angle > 0.0 else "right"
        return f'turn_{side}("{magnitude}")', why


class RemoteBackend:
    """Forwards prompts to a live model service through the gateway."""

    def __init__(self, config: GatewayConfig, session=None):
        self.config = config
        self._session = session
        self._counter = 0

    def query(self, prompt: str, stage: str) -> ModelReply:
        self._counter += 1
        exchange = send_query(
            self.config, prompt,
            request_id=f"{stage.lower()}-{self._counter:04d}",
            session=self._session,
        )
        return ModelReply(text=exchange.response, latency_s=exchange.latency_s)
