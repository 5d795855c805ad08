from .backends import ModelBackend, ModelReply, RemoteBackend, ScriptedOracle, hash01
from .loop import (
    AgentRunner,
    ConnectorLink,
    RunResult,
    StepOutcome,
    agent_step,
    summarize_detections,
)
from .memory import AgentMemory
from .parsing import (
    ActionPlanningResult,
    InfoGatheringResult,
    ReflectionResult,
    SkillCall,
    SubtaskProposalResult,
    format_skill_call,
    parse_action_call,
    parse_stage,
)
from .prompts import (
    STAGE_ACTION_PLANNING,
    STAGE_INFO_GATHERING,
    STAGE_REFLECTION,
    STAGE_SUBTASK_PROPOSAL,
    STAGES,
    PromptContext,
    render_prompt,
)

__all__ = [
    "ActionPlanningResult",
    "AgentMemory",
    "AgentRunner",
    "ConnectorLink",
    "InfoGatheringResult",
    "ModelBackend",
    "ModelReply",
    "PromptContext",
    "ReflectionResult",
    "RemoteBackend",
    "RunResult",
    "STAGES",
    "STAGE_ACTION_PLANNING",
    "STAGE_INFO_GATHERING",
    "STAGE_REFLECTION",
    "STAGE_SUBTASK_PROPOSAL",
    "ScriptedOracle",
    "SkillCall",
    "StepOutcome",
    "SubtaskProposalResult",
    "agent_step",
    "format_skill_call",
    "hash01",
    "parse_action_call",
    "parse_stage",
    "render_prompt",
    "summarize_detections",
]
