"""Exception types shared across the package."""

from __future__ import annotations


class DeskbotError(Exception):
    """Base class for all package-specific errors."""


class InvalidCommand(DeskbotError):
    """A joystick command violates its velocity or duration bounds."""


class ScenarioError(DeskbotError):
    """A scene or scenario file fails validation."""


class UnknownObject(DeskbotError):
    """A referenced object label does not exist in the scene."""


class UnknownSkill(DeskbotError):
    """No registered skill matches the requested name or description."""


class DuplicateSkill(DeskbotError):
    """A skill with this name is already registered."""


class MissingTarget(DeskbotError):
    """The requested label is absent from the detection list."""


class InvalidDepth(DeskbotError):
    """A detection carries a non-positive depth."""


class PromptError(DeskbotError):
    """Base class for prompt rendering problems."""


class MissingPlaceholder(PromptError):
    """A template slot has no usable value.

    Carries the placeholder name as its first argument.
    """


class ResponseParseError(DeskbotError):
    """Base class for model-response parsing problems."""


class MissingSection(ResponseParseError):
    """A required titled section is absent from a stage response."""


class MalformedCodeBlock(ResponseParseError):
    """An action section exists but its fenced code block is broken."""


class ActionSyntaxError(ResponseParseError):
    """An action snippet is not a well-formed call.

    Attributes:
        position: character offset of the first offending token, when known.
    """

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class MultipleCalls(ResponseParseError):
    """An action snippet contains more than one call."""


class GatewayError(DeskbotError):
    """Base class for remote-backend transport problems."""


class GatewayConfigError(GatewayError):
    """The gateway configuration is unusable (checked before any I/O)."""


class GatewayTimeout(GatewayError):
    """All attempts timed out."""


class TransportError(GatewayError):
    """The connection could not be established or broke mid-request."""


class BadStatus(GatewayError):
    """The service answered with a non-retryable or persistent bad status.

    Attributes:
        status_code: HTTP status of the final attempt.
    """

    def __init__(self, message: str, status_code: int):
        super().__init__(message)
        self.status_code = status_code


class MalformedReply(GatewayError):
    """The service answered 2xx but the body is not the expected JSON."""


class InconsistentTrace(DeskbotError):
    """An episode trace fails its internal time-ledger closure check."""


class UnknownTask(DeskbotError):
    """No built-in task with the requested name."""
