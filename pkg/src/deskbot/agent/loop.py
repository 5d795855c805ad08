"""The slow planning loop: prompt cycle, grounding, execution, memory updates.

One agent_step is one decision point. A full step runs the four-stage
prompt cycle (Reflection, InfoGathering, SubtaskProposal, ActionPlanning);
a plan-only step re-plans without re-reflecting, which is how the
connectorless ablation keeps its per-primitive decision cost at one query.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from ..connector import (
    PLAN_ADJUST,
    PLAN_EXECUTE_SKILL,
    PLAN_NAVIGATE,
    PLAN_REPORT_SUCCESS,
    PLAN_SEARCH,
    STATUS_SUCCESS,
    ConnectorState,
    GroundedPlan,
    NavigationParams,
    NavResult,
    adjust_approach,
    ground_plan,
    locomotion_from_call,
    move_towards,
    search_for,
)
from ..errors import UnknownSkill
from ..skills import (
    LOCOMOTION_KINDS,
    SkillRegistry,
    execute_locomotion_skill,
    execute_manipulation_skill,
)
from ..world import SimWorld
from .backends import ModelBackend
from .memory import AgentMemory, holding_text
from .parsing import SkillCall, parse_stage
from .prompts import (
    STAGE_ACTION_PLANNING,
    STAGE_INFO_GATHERING,
    STAGE_REFLECTION,
    STAGE_SUBTASK_PROPOSAL,
    PromptContext,
    render_prompt,
)

DEFAULT_FM_LATENCY_S = 8.0
DEFAULT_STEP_BUDGET = 120


@dataclass
class ConnectorLink:
    """The fast layer as the loop sees it: knobs plus cross-call memory."""

    params: NavigationParams = field(default_factory=NavigationParams)
    adjustment_enabled: bool = True
    state: ConnectorState = field(default_factory=ConnectorState)


@dataclass(frozen=True)
class StepOutcome:
    terminal: bool
    reason: str | None          # "success" when reflection ends the episode
    queries: int
    action: SkillCall | None
    plan: GroundedPlan | None
    nav_result: NavResult | None
    error: str | None


def summarize_detections(world: SimWorld) -> str:
    """The textual stand-in for the camera image, nearest object first."""
    dets = world.detect(quiet=True)
    if not dets:
        return "No task-relevant objects are visible."
    hfov = world.camera.hfov
    yaw = world.state.head_yaw
    lines = []
    for d in sorted(dets, key=lambda d: d.depth):
        angle_cw = (d.u_center - 0.5) * hfov - yaw
        lines.append(f"- {d.label}: direction {angle_cw:+.2f} rad clockwise of the "
                     f"body heading, range {d.depth:.2f} m")
    return "\n".join(lines)


def agent_step(
    world: SimWorld,
    memory: AgentMemory,
    backend: ModelBackend,
    connector: ConnectorLink | None,
    registry: SkillRegistry,
    *,
    rng: random.Random,
    task_description: str,
    fm_latency_s: float = DEFAULT_FM_LATENCY_S,
    plan_only: bool = False,
    use_short_planning: bool | None = None,
    few_shots: str = "",
) -> StepOutcome:
    """Run one decision point; returns what was decided and executed."""
    if use_short_planning is None:
        use_short_planning = connector is not None
    summary = summarize_detections(world)
    image_same = summary == memory.last_detections_summary
    memory.last_detections_summary = summary
    memory.holding_status = holding_text(world.state.held_item)
    skill_render = registry.render_action_set()
    queries = 0

    def run_stage(stage: str):
        nonlocal queries
        ctx = PromptContext(
            stage=stage,
            task_description=task_description,
            memory=memory,
            semantic_map=world.scene.semantic_map,
            detections_summary=summary,
            skill_library_render=skill_render,
            image_same_flag=image_same,
            few_shots=few_shots,
            use_short_planning=use_short_planning,
        )
        prompt = render_prompt(ctx)
        reply = backend.query(prompt, stage)
        world.advance("fm_query", fm_latency_s, {
            "stage": stage,
            "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
            "response": reply.text,
            "reported_latency_s": reply.latency_s,
        })
        memory.charge_queries(1)
        queries += 1
        return parse_stage(stage, reply.text)

    if not plan_only:
        reflection = run_stage(STAGE_REFLECTION)
        memory.last_reflection = reflection.reasoning or "None"
        if reflection.success_detected:
            memory.success_feedback = "True"
            return StepOutcome(terminal=True, reason="success", queries=queries,
                               action=None, plan=None, nav_result=None, error=None)
        memory.success_feedback = reflection.failure_reason or "False"

        info = run_stage(STAGE_INFO_GATHERING)
        memory.image_description = info.image_description or memory.image_description
        memory.area_location = info.area_location or memory.area_location

        proposal = run_stage(STAGE_SUBTASK_PROPOSAL)
        memory.history_summary = proposal.history_summary or memory.history_summary
        memory.subtask_reasoning = proposal.subtask_reasoning or memory.subtask_reasoning
        memory.subtask = proposal.subtask or memory.subtask
        memory.force_new_subtask = False

    planning = run_stage(STAGE_ACTION_PLANNING)
    call = planning.action
    memory.last_action = call
    memory.key_reason = planning.key_reason or "None"

    if call is None:
        memory.last_action_error = "None"
        return StepOutcome(terminal=False, reason=None, queries=queries,
                           action=None, plan=None, nav_result=None, error=None)

    if call.name == "speak":
        world.emit("speak", 0.0, {"text": call.args[0] if call.args else ""})
        memory.last_action_error = "None"
        return StepOutcome(terminal=False, reason=None, queries=queries,
                           action=call, plan=None, nav_result=None, error=None)

    plan: GroundedPlan | None = None
    nav: NavResult | None = None
    if connector is not None:
        plan = ground_plan(call, world, registry, connector.params,
                           adjustment_enabled=connector.adjustment_enabled,
                           state=connector.state)
        nav, error = _execute_plan(world, plan, connector, registry, rng)
        _note_plan(memory, plan)
        if plan.kind == PLAN_REPORT_SUCCESS and memory.force_new_subtask:
            error = error or ("the connector reports this subtask already "
                              "satisfied; propose the next subtask")
    else:
        error = _execute_direct(world, call, registry, rng)

    memory.last_action_error = error or "None"
    return StepOutcome(terminal=False, reason=None, queries=queries,
                       action=call, plan=plan, nav_result=nav, error=error)


def _execute_plan(world, plan: GroundedPlan, connector: ConnectorLink,
                  registry: SkillRegistry, rng) -> tuple[NavResult | None, str | None]:
    params, state = connector.params, connector.state
    if plan.kind == PLAN_EXECUTE_SKILL:
        if plan.locomotion is not None:
            outcome = execute_locomotion_skill(world, plan.locomotion)
            return None, None if outcome.ok else outcome.reason
        outcome = registry.execute(plan.skill_name, world, rng)
        return None, None if outcome.ok else f"{plan.skill_name} failed: {outcome.reason}"
    if plan.kind == PLAN_NAVIGATE:
        nav = move_towards(world, plan.target, params, state)
        return nav, _nav_error("move_towards", plan.target, nav)
    if plan.kind == PLAN_SEARCH:
        nav = search_for(world, plan.target, plan.direction, params, state)
        return nav, _nav_error("search_for", plan.target, nav)
    if plan.kind == PLAN_ADJUST:
        nav = adjust_approach(world, plan.target, plan.direction, params, state)
        return nav, _nav_error("adjust_approach", plan.target, nav)
    if plan.kind == PLAN_REPORT_SUCCESS:
        return None, None
    return None, plan.reason  # ask_fm: bounce the reason back to the planner


def _nav_error(behavior: str, target: str | None, nav: NavResult) -> str | None:
    if nav.status == STATUS_SUCCESS:
        return None
    return f"{behavior}({target}) ended with {nav.status} after {nav.iterations} iterations"


def _note_plan(memory: AgentMemory, plan: GroundedPlan) -> None:
    """Oscillation guard: two straight ReportSuccess for one intent forces a
    new subtask instead of a third identical round."""
    signature = f"{plan.kind}:{plan.target or plan.skill_name}"
    if plan.kind == PLAN_REPORT_SUCCESS:
        if signature == memory.last_plan_signature:
            memory.consecutive_success_reports += 1
        else:
            memory.consecutive_success_reports = 1
        if memory.consecutive_success_reports >= 2:
            memory.force_new_subtask = True
    else:
        memory.consecutive_success_reports = 0
    memory.last_plan_signature = signature


def _execute_direct(world, call: SkillCall, registry: SkillRegistry, rng) -> str | None:
    """Connectorless path: the planned primitive or skill runs as-is."""
    if call.name in LOCOMOTION_KINDS:
        try:
            skill = locomotion_from_call(call.name, list(call.args))
        except (ValueError, UnknownSkill) as exc:
            return str(exc)
        outcome = execute_locomotion_skill(world, skill)
        return None if outcome.ok else outcome.reason
    try:
        spec = registry.lookup(call.name)
    except UnknownSkill:
        return f"unknown action {call.name!r}"
    outcome = execute_manipulation_skill(spec, world, rng)
    return None if outcome.ok else f"{spec.name} failed: {outcome.reason}"


@dataclass(frozen=True)
class RunResult:
    outcome: str                # "success" | "budget"
    steps: int


@dataclass
class AgentRunner:
    """Drives agent_step until success or the decision budget runs out."""

    world: SimWorld
    backend: ModelBackend
    registry: SkillRegistry
    connector: ConnectorLink | None
    task_description: str
    rng: random.Random
    memory: AgentMemory = field(default_factory=AgentMemory)
    fm_latency_s: float = DEFAULT_FM_LATENCY_S
    step_budget: int = DEFAULT_STEP_BUDGET
    full_cycle_every: int = 6   # connectorless cadence between full cycles
    few_shots: str = ""

    def run(self) -> RunResult:
        prev: StepOutcome | None = None
        since_full = 0
        steps = 0
        for index in range(self.step_budget):
            full = self.connector is not None or self._wants_full(index, prev, since_full)
            since_full = 0 if full else since_full + 1
            outcome = agent_step(
                self.world, self.memory, self.backend, self.connector, self.registry,
                rng=self.rng, task_description=self.task_description,
                fm_latency_s=self.fm_latency_s, plan_only=not full,
                few_shots=self.few_shots,
            )
            steps = index + 1
            prev = outcome
            if outcome.terminal:
                return RunResult(outcome="success", steps=steps)
        return RunResult(outcome="budget", steps=steps)

    def _wants_full(self, index: int, prev: StepOutcome | None, since_full: int) -> bool:
        if index == 0 or prev is None:
            return True
        if prev.action is None:
            return True  # an empty plan is the planner's own success signal
        if prev.action.name not in LOCOMOTION_KINDS and prev.action.name != "speak":
            return True  # reflect right after any manipulation attempt
        return since_full >= self.full_cycle_every - 1
