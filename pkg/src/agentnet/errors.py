"""Exception hierarchy for the agentnet package."""

from __future__ import annotations


class AgentNetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AgentNetError):
    """A parameter, config file, or CLI flag is out of range or malformed."""


class ShapeError(AgentNetError):
    """Vector operands have mismatched dimensions."""


class NoAgentsError(AgentNetError):
    """An agent pool required to be non-empty was empty."""


class MissingAgentError(AgentNetError):
    """An agent id is not part of the network."""


class SelfLoopError(AgentNetError):
    """An edge operation named the same agent on both ends."""


class UnknownCategoryError(AgentNetError):
    """A category label has no entry in the heuristic requirement table."""


class ExtractionError(AgentNetError):
    """The model reply for a requirement extraction could not be parsed.

    Carries the raw reply so callers can log or surface it.
    """

    def __init__(self, message: str, raw_reply: str = ""):
        super().__init__(message)
        self.raw_reply = raw_reply


class BackendError(AgentNetError):
    """A model backend failed to produce a completion or embedding."""


class ScriptUnderrunError(BackendError):
    """A scripted backend ran out of replies or matched no rule."""


class DatasetError(AgentNetError):
    """A dataset file or its manifest is malformed or inconsistent."""
