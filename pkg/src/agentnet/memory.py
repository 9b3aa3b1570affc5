"""Capacity-bounded fragment memories with utility-based eviction.

Each agent keeps two modules, one for routing decisions and one for
executions. A fragment stores an (observation, context, action) triple
plus the embedding of its observation and context. Retrieval returns the
top-k fragments by cosine similarity to the query; insertion at capacity
evicts the fragment with the lowest utility, a weighted blend of use
frequency, recency, and uniqueness within the module.

Time is a per-module logical clock that ticks on every mutating operation,
so persisted modules replay identically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from agentnet import kernels
from agentnet.errors import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

ROLE_ROUTER = "rou"
ROLE_EXECUTOR = "exe"

DEFAULT_CAPACITY = 40


def embed_key(observation: str, context: str) -> str:
    """Text embedded for a fragment or a retrieval query."""
    return observation + "\n" + context


@dataclass
class Fragment:
    """One stored experience."""

    fragment_id: str
    seq: int
    observation: str
    context: str
    action: str
    embedding: np.ndarray
    created_at: int
    use_count: int = 0
    last_used: int = 0


@dataclass(frozen=True)
class EvictionWeights:
    """Blend weights of the utility terms (frequency, recency, uniqueness)."""

    freq: float = 1.0 / 3.0
    rec: float = 1.0 / 3.0
    uniq: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        if self.freq < 0.0 or self.rec < 0.0 or self.uniq < 0.0:
            raise ConfigurationError("eviction weights must be non-negative")
        if self.freq + self.rec + self.uniq <= 0.0:
            raise ConfigurationError("at least one eviction weight must be positive")


@dataclass
class InsertResult:
    """Outcome of an insert: at most one of the three fields is set."""

    inserted: Fragment | None = None
    evicted: Fragment | None = None
    refreshed: Fragment | None = None
    rejected: bool = False  # candidate lost the utility comparison


class MemoryModule:
    """One agent-side fragment store."""

    def __init__(
        self,
        role: str,
        capacity: int = DEFAULT_CAPACITY,
        weights: EvictionWeights | None = None,
    ):
        if role not in (ROLE_ROUTER, ROLE_EXECUTOR):
            raise ConfigurationError(f"unknown memory role {role!r}")
        if capacity < 1:
            raise ConfigurationError(f"capacity must be >= 1, got {capacity}")
        self.role = role
        self.capacity = capacity
        self.weights = weights or EvictionWeights()
        self.fragments: list[Fragment] = []
        self._next_seq = 0
        self._clock = 0

    def __len__(self) -> int:
        return len(self.fragments)

    # -- retrieval ---------------------------------------------------------

    def select(
        self,
        query_observation: str,
        query_context: str,
        k: int,
        embedder: Callable[[str], np.ndarray],
        record_usage: bool = True,
    ) -> list[Fragment]:
        """Top-k fragments by cosine similarity to the query.

        The query embedding comes from ``embedder`` applied to the combined
        observation and context text; an empty store returns [] without
        calling the embedder. Scores are compared at 12-decimal resolution
        (duplicate embeddings must tie exactly on every kernel backend)
        and ties break toward the older fragment. With ``record_usage``
        (the default) the returned fragments get their use counters and
        recency refreshed; frozen evaluation passes False so the store
        stays bit-identical.
        """
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        if not self.fragments:
            return []
        query = np.asarray(embedder(embed_key(query_observation, query_context)), dtype=np.float64)
        matrix = self._matrix()
        if query.shape[0] != matrix.shape[1]:
            raise ShapeError(
                f"query dimension {query.shape[0]} does not match store dimension {matrix.shape[1]}"
            )
        scores = kernels.cosine_scores(query, matrix)
        order = sorted(range(len(self.fragments)), key=lambda i: (-round(float(scores[i]), 12), i))
        chosen = [self.fragments[i] for i in order[:k]]
        if record_usage and chosen:
            now = self._tick()
            for fragment in chosen:
                fragment.use_count += 1
                fragment.last_used = now
        return chosen

    # -- insertion / eviction ----------------------------------------------

    def insert(
        self,
        observation: str,
        context: str,
        action: str,
        embedding: np.ndarray,
        judge: Callable[[list[Fragment]], int | None] | None = None,
    ) -> InsertResult:
        """Insert a fragment, evicting the lowest-utility one at capacity.

        A fragment with identical observation, context, and action already
        in the store is refreshed (use count and recency) instead of
        duplicated. At capacity the candidate joins the eviction pool: if
        it has the lowest utility itself it is rejected rather than stored.
        Utilities are compared at 12-decimal resolution with ties to the
        lowest sequence number (the oldest pool member).

        Args:
            judge: optional override that picks the eviction index from the
                pool (stored fragments first, candidate last); None or an
                out-of-range answer falls back to the utility formula.
        """
        embedding = np.asarray(embedding, dtype=np.float64)
        if self.fragments and embedding.shape != self.fragments[0].embedding.shape:
            raise ShapeError(
                f"embedding shape {embedding.shape} does not match store "
                f"shape {self.fragments[0].embedding.shape}"
            )
        for fragment in self.fragments:
            if (
                fragment.observation == observation
                and fragment.context == context
                and fragment.action == action
            ):
                now = self._tick()
                fragment.use_count += 1
                fragment.last_used = now
                return InsertResult(refreshed=fragment)

        now = self._tick()
        candidate = Fragment(
            fragment_id=f"{self.role}-{self._next_seq}",
            seq=self._next_seq,
            observation=observation,
            context=context,
            action=action,
            embedding=embedding,
            created_at=now,
            last_used=now,
        )
        self._next_seq += 1

        if len(self.fragments) < self.capacity:
            self.fragments.append(candidate)
            return InsertResult(inserted=candidate)

        pool = self.fragments + [candidate]
        evict_index: int | None = None
        if judge is not None:
            evict_index = judge(pool)
            if evict_index is not None and not 0 <= evict_index < len(pool):
                logger.warning("eviction judge returned %r, falling back to utility", evict_index)
                evict_index = None
        if evict_index is None:
            # 12-decimal comparison: pool duplicates must tie on every backend
            utilities = self.pool_utilities(pool, now)
            evict_index = min(range(len(pool)), key=lambda i: (round(utilities[i], 12), pool[i].seq))
        if evict_index == len(pool) - 1:
            return InsertResult(rejected=True)
        evicted = self.fragments.pop(evict_index)
        self.fragments.append(candidate)
        return InsertResult(inserted=candidate, evicted=evicted)

    def pool_utilities(self, pool: list[Fragment], now: int) -> list[float]:
        """Utility of each fragment within a pool.

        utility = w_f * freq + w_r * rec + w_u * uniq, with
        freq = use_count / (1 + max use_count in pool),
        rec = 1 / (1 + now - last_used),
        uniq = 1 - max cosine to any other pool fragment (clamped at 0 so
        anti-correlated embeddings cannot push uniqueness above 1; a sole
        fragment has uniqueness 1).
        """
        max_use = max(f.use_count for f in pool)
        matrix = np.stack([f.embedding for f in pool])
        max_cos = kernels.pairwise_max_cosine(matrix)
        out = []
        for i, fragment in enumerate(pool):
            freq = fragment.use_count / (1.0 + max_use)
            rec = 1.0 / (1.0 + (now - fragment.last_used))
            uniq = 1.0 - max(0.0, float(max_cos[i]))
            out.append(self.weights.freq * freq + self.weights.rec * rec + self.weights.uniq * uniq)
        return out

    # -- persistence ---------------------------------------------------------

    def to_doc(self) -> dict:
        """JSON-safe structure of the full module state, embeddings included."""
        return {
            "role": self.role,
            "capacity": self.capacity,
            "weights": {"freq": self.weights.freq, "rec": self.weights.rec, "uniq": self.weights.uniq},
            "next_seq": self._next_seq,
            "clock": self._clock,
            "fragments": [
                {
                    "id": f.fragment_id,
                    "seq": f.seq,
                    "observation": f.observation,
                    "context": f.context,
                    "action": f.action,
                    "embedding": [float(v) for v in f.embedding],
                    "created_at": f.created_at,
                    "use_count": f.use_count,
                    "last_used": f.last_used,
                }
                for f in self.fragments
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> MemoryModule:
        try:
            weights = EvictionWeights(**doc.get("weights", {}))
            module = cls(role=doc["role"], capacity=int(doc["capacity"]), weights=weights)
            module._next_seq = int(doc["next_seq"])
            module._clock = int(doc["clock"])
            for entry in doc["fragments"]:
                module.fragments.append(
                    Fragment(
                        fragment_id=entry["id"],
                        seq=int(entry["seq"]),
                        observation=entry["observation"],
                        context=entry["context"],
                        action=entry["action"],
                        embedding=np.asarray(entry["embedding"], dtype=np.float64),
                        created_at=int(entry["created_at"]),
                        use_count=int(entry["use_count"]),
                        last_used=int(entry["last_used"]),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed memory document: {exc}") from exc
        return module

    # -- internals -----------------------------------------------------------

    def _matrix(self) -> np.ndarray:
        return np.stack([f.embedding for f in self.fragments])

    def _tick(self) -> int:
        now = self._clock
        self._clock += 1
        return now
