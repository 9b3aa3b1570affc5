"""Agent capability vectors and task requirement extraction.

Capabilities and requirements share one fixed taxonomy of dimensions per
run (default: reasoning, language, knowledge, sequence). Requirements come
from a heuristic lookup table for known benchmark categories (atomic) or
from a model call for anything else (compound). Capabilities evolve by an
exponentially weighted update toward score-scaled requirement vectors of
the tasks an agent handles.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from agentnet import kernels
from agentnet.backends import Backend, CompletionRequest
from agentnet.errors import (
    ConfigurationError,
    ExtractionError,
    NoAgentsError,
    ShapeError,
    UnknownCategoryError,
)

logger = logging.getLogger(__name__)

DEFAULT_TAXONOMY = ("reasoning", "language", "knowledge", "sequence")

ROLE_EXECUTED = "executed"
ROLE_SPLIT = "split"
ROLE_FORWARDED = "forwarded"
_ROLES = (ROLE_EXECUTED, ROLE_SPLIT, ROLE_FORWARDED)


@dataclass(frozen=True)
class CapabilityParams:
    """Capability dynamics parameters.

    Attributes:
        beta: retention factor; 1 freezes capabilities, 0 replaces them
            with the newest increment.
        taxonomy: ordered dimension labels, shared by every capability and
            requirement vector in a run.
    """

    beta: float = 0.7
    taxonomy: tuple[str, ...] = DEFAULT_TAXONOMY

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must be in [0, 1], got {self.beta}")
        if not self.taxonomy:
            raise ConfigurationError("taxonomy must not be empty")
        if len(set(self.taxonomy)) != len(self.taxonomy):
            raise ConfigurationError("taxonomy labels must be unique")


@dataclass(frozen=True)
class TaskRequirement:
    """Per-dimension demand of a task, with how it was obtained."""

    values: np.ndarray
    source: str  # "atomic" or "compound"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ShapeError(f"requirement must be 1-d, got shape {values.shape}")
        if values.size == 0:
            raise ShapeError("requirement must not be empty")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ConfigurationError("requirement entries must be in [0, 1]")
        if not np.any(values > 0.0):
            raise ConfigurationError("requirement must not be the all-zeros vector")
        if self.source not in ("atomic", "compound"):
            raise ConfigurationError(f"unknown requirement source {self.source!r}")


@dataclass(frozen=True)
class HeuristicTable:
    """Category label -> requirement vector lookup."""

    taxonomy: tuple[str, ...]
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def lookup(self, category: str) -> np.ndarray:
        if category not in self.entries:
            raise UnknownCategoryError(f"no heuristic entry for category {category!r}")
        return self.entries[category]

    def __contains__(self, category: str) -> bool:
        return category in self.entries


def load_heuristic_table(path: str | Path) -> HeuristicTable:
    """Load a JSON heuristic table.

    Format: {"taxonomy": [labels...], "categories": {label: [floats...]}}.
    Every vector must match the taxonomy length, stay inside [0, 1], and
    not be all zeros.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot load heuristic table {path}: {exc}") from exc
    try:
        taxonomy = tuple(str(t) for t in doc["taxonomy"])
        raw = doc["categories"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"heuristic table {path} needs 'taxonomy' and 'categories'") from exc
    entries: dict[str, np.ndarray] = {}
    for category, values in raw.items():
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (len(taxonomy),):
            raise ConfigurationError(
                f"heuristic table {path}: {category!r} has {vec.size} values, "
                f"taxonomy has {len(taxonomy)}"
            )
        if np.any(vec < 0.0) or np.any(vec > 1.0) or not np.any(vec > 0.0):
            raise ConfigurationError(
                f"heuristic table {path}: {category!r} must be in [0, 1] and not all zero"
            )
        entries[category] = vec
    return HeuristicTable(taxonomy=taxonomy, entries=entries)


_VECTOR_RE = re.compile(r"\(([^()]*)\)")

_EXTRACT_SYSTEM = (
    "You estimate what a task demands from an agent team.\n"
    "Reply with a parenthesized vector of {n} values in [0, 1], one per "
    "dimension, for example (0.2, 0.8, 0.1, 0.4).\n"
    "Dimensions in order: {labels}."
)


class RequirementExtractor:
    """Maps a task observation to a requirement vector.

    Atomic mode looks the category up in the heuristic table; compound mode
    asks the backend for a vector. When no mode is forced, a task is atomic
    iff its category has a table entry.
    """

    def __init__(self, table: HeuristicTable, backend: Backend, params: CapabilityParams):
        if table.taxonomy != params.taxonomy:
            raise ConfigurationError(
                f"heuristic table taxonomy {table.taxonomy} does not match "
                f"run taxonomy {params.taxonomy}"
            )
        self.table = table
        self.backend = backend
        self.params = params

    def extract(
        self,
        observation: str,
        category: str | None = None,
        mode: str | None = None,
    ) -> TaskRequirement:
        """Extract the requirement vector for one observation.

        Args:
            observation: the task or subtask text.
            category: optional benchmark category label.
            mode: force "atomic" or "compound"; default picks atomic when
                the category is known to the table.

        Raises:
            UnknownCategoryError: atomic mode with an unknown category.
            ExtractionError: the model reply held no usable vector.
        """
        if mode is None:
            mode = "atomic" if (category is not None and category in self.table) else "compound"
        if mode == "atomic":
            if category is None:
                raise UnknownCategoryError("atomic extraction needs a category label")
            return TaskRequirement(values=self.table.lookup(category).copy(), source="atomic")
        if mode != "compound":
            raise ConfigurationError(f"unknown extraction mode {mode!r}")
        system = _EXTRACT_SYSTEM.format(
            n=len(self.params.taxonomy), labels=", ".join(self.params.taxonomy)
        )
        reply = self.backend.complete(CompletionRequest(system=system, user=f"Task: {observation}"))
        values = self._parse_vector(reply)
        return TaskRequirement(values=values, source="compound")

    def _parse_vector(self, reply: str) -> np.ndarray:
        match = _VECTOR_RE.search(reply)
        if match is None:
            raise ExtractionError("no parenthesized vector in reply", raw_reply=reply)
        parts = [p.strip() for p in match.group(1).split(",")]
        try:
            values = np.asarray([float(p) for p in parts], dtype=np.float64)
        except ValueError as exc:
            raise ExtractionError(f"non-numeric vector entry: {exc}", raw_reply=reply) from exc
        if values.size != len(self.params.taxonomy):
            raise ExtractionError(
                f"expected {len(self.params.taxonomy)} values, got {values.size}",
                raw_reply=reply,
            )
        values = np.clip(values, 0.0, 1.0)
        if not np.any(values > 0.0):
            raise ExtractionError("extracted vector is all zeros", raw_reply=reply)
        return values


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return kernels.cosine(a, b)


def _argmax_similarity(requirement: np.ndarray, capabilities: dict[int, np.ndarray]) -> int:
    # Cosine is scale-invariant, but scaling a vector perturbs the computed
    # value by an ulp or two; rounding keeps mathematical ties actual ties
    # so the lowest-id rule decides them.
    best_id = -1
    best_sim = -np.inf
    for agent in sorted(capabilities):
        sim = round(similarity(requirement, capabilities[agent]), 12)
        if sim > best_sim:
            best_id, best_sim = agent, sim
    return best_id


def select_initial_agent(requirement: TaskRequirement, capabilities: dict[int, np.ndarray]) -> int:
    """Entry agent: the capability vector most similar to the requirement."""
    if not capabilities:
        raise NoAgentsError("no agents to select an entry agent from")
    return _argmax_similarity(requirement.values, capabilities)


def select_next_agent(requirement: TaskRequirement, candidates: dict[int, np.ndarray]) -> int:
    """Routing target among candidates (the caller excludes current/visited)."""
    if not candidates:
        raise NoAgentsError("no candidate agents to route to")
    return _argmax_similarity(requirement.values, candidates)


def compute_delta(requirement: TaskRequirement, score: float, role: str) -> np.ndarray:
    """Capability increment earned in one task.

    Agents that executed or split receive the score-scaled requirement;
    agents that only forwarded receive the zero vector (their capability
    norm decays under the update until they contribute).
    """
    if role not in _ROLES:
        raise ConfigurationError(f"unknown role {role!r}")
    if not 0.0 <= score <= 1.0:
        raise ConfigurationError(f"score must be in [0, 1], got {score}")
    if role == ROLE_FORWARDED:
        return np.zeros_like(requirement.values)
    return score * requirement.values


def update_capability(capability: np.ndarray, delta: np.ndarray, beta: float) -> np.ndarray:
    """new = beta * old + (1 - beta) * delta, elementwise."""
    capability = np.asarray(capability, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if capability.shape != delta.shape:
        raise ShapeError(f"shape mismatch: {capability.shape} vs {delta.shape}")
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError(f"beta must be in [0, 1], got {beta}")
    return beta * capability + (1.0 - beta) * delta
