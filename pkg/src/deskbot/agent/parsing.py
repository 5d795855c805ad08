"""Strict parsing of staged model responses.

Responses are free text with titled sections; the action stage carries a
fenced python block holding at most one skill call. Anything off-grammar
raises instead of being silently patched up: a garbled reply must surface
as a planner error, not as a random action.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass

from ..errors import (
    ActionSyntaxError,
    MalformedCodeBlock,
    MissingSection,
    MultipleCalls,
)
from .prompts import (
    STAGE_ACTION_PLANNING,
    STAGE_INFO_GATHERING,
    STAGE_REFLECTION,
    STAGE_SUBTASK_PROPOSAL,
)

_NAME_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")
SUCCESS_TOKEN = "SUCCESSFUL"


@dataclass(frozen=True)
class SkillCall:
    """One parsed action: name plus literal arguments.

    kwarg_names runs parallel to args; None marks a positional argument.
    """

    name: str
    args: tuple = ()
    kwarg_names: tuple = ()

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ActionSyntaxError(f"bad skill name {self.name!r}")
        if len(self.kwarg_names) != len(self.args):
            raise ActionSyntaxError("kwarg_names must parallel args")
        for value in self.args:
            if not isinstance(value, (str, int, float)) or isinstance(value, bool):
                raise ActionSyntaxError(f"unsupported literal {value!r}")


@dataclass(frozen=True)
class InfoGatheringResult:
    image_description: str
    target_name: str | None
    target_reasoning: str
    area_location: str


@dataclass(frozen=True)
class ReflectionResult:
    reasoning: str
    success_detected: bool
    failure_reason: str


@dataclass(frozen=True)
class SubtaskProposalResult:
    history_summary: str
    subtask_reasoning: str
    subtask: str


@dataclass(frozen=True)
class ActionPlanningResult:
    reasoning: str
    action: SkillCall | None
    key_reason: str


def _split_sections(response: str, titles: list[str]) -> dict[str, str]:
    """Slice the response at each required title; content runs to the next
    known title or the end. Titles must sit at line start."""
    positions = []
    for title in titles:
        pattern = re.compile(r"^[ \t]*" + re.escape(title) + r"[ \t]*$|^[ \t]*"
                             + re.escape(title) + r"[ \t]*\n", re.MULTILINE)
        match = pattern.search(response)
        if match is None:
            # Also accept the title with content on the same line.
            inline = re.search(r"^[ \t]*" + re.escape(title), response, re.MULTILINE)
            if inline is None:
                raise MissingSection(title)
            match = inline
        positions.append((match.start(), match.end(), title))
    positions.sort()
    sections = {}
    for idx, (start, end, title) in enumerate(positions):
        stop = positions[idx + 1][0] if idx + 1 < len(positions) else len(response)
        sections[title] = response[end:stop].strip()
    return sections


def _first_present(sections: dict[str, str], *titles: str) -> str | None:
    for title in titles:
        if title in sections:
            return sections[title]
    return None


def parse_stage(stage: str, response: str):
    """Parse one stage's response into its typed result."""
    if not response or not response.strip():
        raise MissingSection("<empty response>")
    if stage == STAGE_INFO_GATHERING:
        sections = _split_sections(response, [
            "Image Description:", "Target Name:", "Reasoning for Target:",
            "Area Location:",
        ])
        raw_target = sections["Target Name:"].strip().strip('"').strip("'")
        target = None if raw_target.lower() in ("null", "none", "") else raw_target
        return InfoGatheringResult(
            image_description=sections["Image Description:"],
            target_name=target,
            target_reasoning=sections["Reasoning for Target:"],
            area_location=sections["Area Location:"],
        )
    if stage == STAGE_REFLECTION:
        sections = _split_sections(response, [
            "Self Reflection Reasoning:", "Success Detection:",
        ])
        verdict = sections["Success Detection:"].strip()
        success = verdict == SUCCESS_TOKEN
        return ReflectionResult(
            reasoning=sections["Self Reflection Reasoning:"],
            success_detected=success,
            failure_reason="" if success else verdict,
        )
    if stage == STAGE_SUBTASK_PROPOSAL:
        sections = _split_sections(response, [
            "History_summary:", "Subtask_reasoning:", "Subtask description:",
        ])
        return SubtaskProposalResult(
            history_summary=sections["History_summary:"],
            subtask_reasoning=sections["Subtask_reasoning:"],
            subtask=sections["Subtask description:"],
        )
    if stage == STAGE_ACTION_PLANNING:
        # The long prompt answers with three sections; the short one with a
        # bare "Action:" block. Accept both shapes.
        titles = []
        if re.search(r"^[ \t]*Decision_Making_Reasoning:", response, re.MULTILINE):
            titles.append("Decision_Making_Reasoning:")
        if re.search(r"^[ \t]*Actions:", response, re.MULTILINE):
            titles.append("Actions:")
        elif re.search(r"^[ \t]*Action:", response, re.MULTILINE):
            titles.append("Action:")
        else:
            raise MissingSection("Actions:")
        if re.search(r"^[ \t]*Key_reason_of_last_action:", response, re.MULTILINE):
            titles.append("Key_reason_of_last_action:")
        sections = _split_sections(response, titles)
        body = _first_present(sections, "Actions:", "Action:") or ""
        action = parse_action_call(_extract_code_block(body))
        return ActionPlanningResult(
            reasoning=sections.get("Decision_Making_Reasoning:", ""),
            action=action,
            key_reason=sections.get("Key_reason_of_last_action:", ""),
        )
    raise ValueError(f"unknown stage {stage!r}")


_FENCE_RE = re.compile(r"```(?:python)?\s*\n?(.*?)```", re.DOTALL)


def _extract_code_block(section: str) -> str:
    """Interior of the fenced block in an action section.

    An entirely empty section counts as an empty action (the task-success
    signal); a non-empty section without a proper fence is malformed.
    """
    text = section.strip()
    if not text:
        return ""
    match = _FENCE_RE.search(text)
    if match is None:
        if "```" in text:
            raise MalformedCodeBlock("unterminated code fence")
        raise MalformedCodeBlock("action section has no fenced code block")
    return match.group(1)


def _literal(node: ast.expr):
    if isinstance(node, ast.Constant) and isinstance(node.value, (str, int, float)) \
            and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub) \
            and isinstance(node.operand, ast.Constant) \
            and isinstance(node.operand.value, (int, float)) \
            and not isinstance(node.operand.value, bool):
        return -node.operand.value
    raise ActionSyntaxError(
        "arguments must be string, integer, or decimal literals",
        position=getattr(node, "col_offset", None))


def parse_action_call(code: str) -> SkillCall | None:
    """Parse a fenced block's interior into at most one SkillCall.

    Empty or whitespace means "no action" and returns None.
    """
    text = code.strip()
    if not text or text in ("''", '""'):
        return None
    try:
        tree = ast.parse(text, mode="exec")
    except SyntaxError as exc:
        raise ActionSyntaxError(str(exc.msg), position=exc.offset) from exc
    statements = [s for s in tree.body]
    if len(statements) > 1:
        raise MultipleCalls(f"{len(statements)} statements in action block")
    if not statements:
        return None
    stmt = statements[0]
    if not isinstance(stmt, ast.Expr) or not isinstance(stmt.value, ast.Call):
        raise ActionSyntaxError("action must be a single function call",
                                position=getattr(stmt, "col_offset", None))
    call = stmt.value
    if not isinstance(call.func, ast.Name):
        raise ActionSyntaxError("action must call a plain skill name",
                                position=call.func.col_offset)
    args = []
    names = []
    for arg in call.args:
        args.append(_literal(arg))
        names.append(None)
    for kw in call.keywords:
        if kw.arg is None:
            raise ActionSyntaxError("**kwargs is not allowed",
                                    position=kw.value.col_offset)
        args.append(_literal(kw.value))
        names.append(kw.arg)
    return SkillCall(name=call.func.id, args=tuple(args), kwarg_names=tuple(names))


def _format_value(value) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(value)


def format_skill_call(call: SkillCall | None) -> str:
    """Inverse of parse_action_call (empty string for None)."""
    if call is None:
        return ""
    parts = []
    for name, value in zip(call.kwarg_names, call.args):
        rendered = _format_value(value)
        parts.append(rendered if name is None else f"{name}={rendered}")
    return f"{call.name}({', '.join(parts)})"
