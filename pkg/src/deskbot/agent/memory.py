"""Mutable per-episode memory threaded through the prompt stages."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class AgentMemory:
    """What the slow planner remembers between its decision points.

    Every text field feeds a prompt placeholder, so "empty" is spelled as
    an explicit sentinel string rather than "".
    """

    history_summary: str = "Nothing has happened yet."
    last_action: object | None = None          # SkillCall of the previous step
    key_reason: str = "None"
    last_reflection: str = "None"
    subtask: str = "No subtask proposed yet."
    subtask_reasoning: str = "None"
    area_location: str = "unknown"
    holding_status: str = "The robot is not holding anything."
    image_description: str = "No image has been described yet."
    last_action_error: str = "None"
    success_feedback: str = "False"            # success-detection flag text
    last_detections_summary: str = ""
    fm_query_count: int = 0
    force_new_subtask: bool = False
    consecutive_success_reports: int = 0
    last_plan_signature: str | None = None

    def charge_queries(self, n: int) -> None:
        if n < 0:
            raise ValueError("query count cannot decrease")
        self.fm_query_count += n


def holding_text(held_item: str | None) -> str:
    if held_item is None:
        return "The robot is not holding anything."
    return f"The robot is holding the {held_item.replace('_', ' ')}."
