"""Prompt assembly for the four planner stages.

Templates live as UTF-8 data files with <$name$> placeholders. Rendering
is strict: a referenced placeholder with no usable value raises rather
than shipping a half-filled prompt to a model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..errors import MissingPlaceholder, PromptError
from .memory import AgentMemory

STAGE_INFO_GATHERING = "InfoGathering"
STAGE_REFLECTION = "Reflection"
STAGE_SUBTASK_PROPOSAL = "SubtaskProposal"
STAGE_ACTION_PLANNING = "ActionPlanning"
STAGES = (STAGE_INFO_GATHERING, STAGE_REFLECTION, STAGE_SUBTASK_PROPOSAL,
          STAGE_ACTION_PLANNING)

_TEMPLATE_FILES = {
    STAGE_INFO_GATHERING: "info_gathering.txt",
    STAGE_REFLECTION: "reflection.txt",
    STAGE_SUBTASK_PROPOSAL: "subtask_proposal.txt",
    STAGE_ACTION_PLANNING: "action_planning.txt",
}
_SHORT_PLANNING_FILE = "action_planning_short.txt"

_PLACEHOLDER_RE = re.compile(r"<\$([a-z0-9_]+)\$>")

# Slots that may legitimately render as empty text.
_MAY_BE_EMPTY = frozenset({"few_shots"})


@lru_cache(maxsize=None)
def _load_template(filename: str) -> str:
    path = resources.files("deskbot.agent").joinpath("templates", filename)
    text = path.read_text(encoding="utf-8")
    if not _PLACEHOLDER_RE.search(text):
        raise PromptError(f"template {filename} has no placeholders")
    return text


@dataclass(frozen=True)
class PromptContext:
    """Everything a stage render needs, bundled."""

    stage: str
    task_description: str
    memory: AgentMemory
    semantic_map: str
    detections_summary: str
    skill_library_render: str
    image_same_flag: bool = False
    few_shots: str = ""
    use_short_planning: bool = False

    def __post_init__(self):
        if self.stage not in STAGES:
            raise PromptError(f"unknown stage {self.stage!r}")


def _slot_values(ctx: PromptContext) -> dict[str, str]:
    from .parsing import format_skill_call

    memory = ctx.memory
    last_action = format_skill_call(memory.last_action) or "None"
    return {
        "image_introduction": ctx.detections_summary,
        "task_description": ctx.task_description,
        "subtask_description": memory.subtask,
        "subtask_reasoning": memory.subtask_reasoning,
        "semantic_map": ctx.semantic_map,
        "robot_location": memory.area_location,
        "robot_holding_cup_status": memory.holding_status,
        "image_description": memory.image_description,
        "previous_action": last_action,
        "previous_action_call": last_action,
        "executing_action_error": memory.last_action_error or "None",
        "previous_reasoning": memory.key_reason,
        "key_reason_of_last_action": memory.key_reason,
        "self_reflection_reasoning": memory.last_reflection,
        "previous_self_reflection_reasoning": memory.last_reflection,
        "success_detection": memory.success_feedback,
        "previous_summarization": memory.history_summary,
        "skill_library": ctx.skill_library_render,
        "image_same_flag": "True" if ctx.image_same_flag else "False",
        "few_shots": ctx.few_shots,
    }


def render_prompt(ctx: PromptContext) -> str:
    """Fill the stage's template; every placeholder must resolve."""
    filename = _TEMPLATE_FILES[ctx.stage]
    if ctx.stage == STAGE_ACTION_PLANNING and ctx.use_short_planning:
        filename = _SHORT_PLANNING_FILE
    template = _load_template(filename)
    values = _slot_values(ctx)

    def _substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise MissingPlaceholder(name)
        value = values[name]
        if value is None or (not str(value).strip() and name not in _MAY_BE_EMPTY):
            raise MissingPlaceholder(name)
        return str(value)

    rendered = _PLACEHOLDER_RE.sub(_substitute, template)
    leftover = re.search(r"<\$[^$]*\$>", rendered)
    if leftover:
        raise MissingPlaceholder(leftover.group(0))
    return rendered
