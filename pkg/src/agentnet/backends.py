"""Model backends: scripted replay for deterministic runs, HTTP for live models.

Every backend exposes the same three methods (``complete``, ``embed``,
``call_log``) and the runtime never branches on which one it holds. The
scripted backend is the workhorse for tests and offline experiments: it
replays canned completions (in order, or keyed by regex rules) and derives
embeddings from a seeded hash, so a whole training run is a pure function
of its inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import yaml

from agentnet.errors import BackendError, ConfigurationError, ScriptUnderrunError

logger = logging.getLogger(__name__)

DEFAULT_EMBED_DIM = 64
DEFAULT_EMBED_SEED = 0

ENV_API_BASE = "AGENTNET_API_BASE"
ENV_API_KEY = "AGENTNET_API_KEY"
ENV_MODEL = "AGENTNET_MODEL"
ENV_EMBED_MODEL = "AGENTNET_EMBED_MODEL"

DEFAULT_EMBED_MODEL = "BAAI/bge-large-en-v1.5"


@dataclass(frozen=True)
class CompletionRequest:
    """A single chat-style completion call.

    Decoding defaults are pinned for reproducibility: greedy temperature,
    a 2048-token cap, and no nucleus truncation.
    """

    system: str
    user: str
    temperature: float = 0.0
    max_tokens: int = 2048
    top_p: float = 1.0

    def prompt_text(self) -> str:
        return self.system + "\n" + self.user


@dataclass(frozen=True)
class EmbeddingVector:
    """An embedding with the id of the model that produced it."""

    values: np.ndarray
    model_id: str


@dataclass(frozen=True)
class CallRecord:
    """One backend call, in order of issue."""

    kind: str  # "complete" or "embed"
    request: str
    response: str


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...

    def embed(self, text: str) -> EmbeddingVector: ...

    def call_log(self) -> list[CallRecord]: ...


def hash_embedding(text: str, dim: int = DEFAULT_EMBED_DIM, seed: int = DEFAULT_EMBED_SEED) -> np.ndarray:
    """Deterministic unit vector derived from a hash of the text.

    The digest of ``"{seed}:{text}"`` seeds a PCG64 stream whose first
    ``dim`` normal draws are normalized to unit length. Same text, same
    vector, on every platform.
    """
    digest = hashlib.sha256(f"{seed}:{text}".encode("utf-8")).digest()
    gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
    vec = gen.standard_normal(dim)
    norm = np.linalg.norm(vec)
    if norm == 0.0:  # astronomically unlikely, but keep the unit contract
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


@dataclass
class ScriptRule:
    pattern: str
    reply: str
    compiled: re.Pattern[str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.compiled = re.compile(self.pattern, re.DOTALL)


class ScriptedBackend:
    """Replays canned completions; embeds via the seeded hash.

    Exactly one reply source must be given:

    - ``replies``: an ordered list consumed one call at a time.
    - ``rules``: (pattern, reply) pairs tried in order against the full
      prompt text (system + newline + user); the first match wins and the
      reply may use backreferences from the match.

    Running out of ordered replies, or matching no rule, raises
    ``ScriptUnderrunError`` rather than inventing text.
    """

    def __init__(
        self,
        replies: list[str] | None = None,
        rules: list[tuple[str, str]] | None = None,
        embed_dim: int = DEFAULT_EMBED_DIM,
        embed_seed: int = DEFAULT_EMBED_SEED,
    ):
        if (replies is None) == (rules is None):
            raise ConfigurationError("exactly one of replies/rules must be given")
        if embed_dim < 1:
            raise ConfigurationError(f"embed_dim must be positive, got {embed_dim}")
        self._replies = list(replies) if replies is not None else None
        self._cursor = 0
        self._rules = [ScriptRule(p, r) for p, r in rules] if rules is not None else None
        self._embed_dim = embed_dim
        self._embed_seed = embed_seed
        self._model_id = f"scripted-hash-{embed_dim}d-seed{embed_seed}"
        self._log: list[CallRecord] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> ScriptedBackend:
        """Load a script file: JSON or YAML with a 'replies' or 'rules' key.

        Rules entries are mappings with 'pattern' and 'reply' fields.
        """
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot load script file {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigurationError(f"script file {path} must contain a mapping")
        if "replies" in doc:
            replies = doc["replies"]
            if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
                raise ConfigurationError(f"script file {path}: 'replies' must be a list of strings")
            return cls(replies=replies, **kwargs)
        if "rules" in doc:
            entries = doc["rules"]
            if not isinstance(entries, list):
                raise ConfigurationError(f"script file {path}: 'rules' must be a list")
            rules = []
            for i, entry in enumerate(entries):
                if not isinstance(entry, dict) or "pattern" not in entry or "reply" not in entry:
                    raise ConfigurationError(
                        f"script file {path}: rule {i} needs 'pattern' and 'reply'"
                    )
                rules.append((str(entry["pattern"]), str(entry["reply"])))
            return cls(rules=rules, **kwargs)
        raise ConfigurationError(f"script file {path} needs a 'replies' or 'rules' key")

    def complete(self, request: CompletionRequest) -> str:
        prompt = request.prompt_text()
        with self._lock:
            if self._replies is not None:
                if self._cursor >= len(self._replies):
                    raise ScriptUnderrunError(
                        f"script exhausted after {len(self._replies)} replies"
                    )
                reply = self._replies[self._cursor]
                self._cursor += 1
            else:
                assert self._rules is not None
                for rule in self._rules:
                    match = rule.compiled.search(prompt)
                    if match is not None:
                        reply = match.expand(rule.reply)
                        break
                else:
                    raise ScriptUnderrunError(
                        f"no script rule matched prompt starting {prompt[:80]!r}"
                    )
            self._log.append(CallRecord("complete", prompt, reply))
        return reply

    def embed(self, text: str) -> EmbeddingVector:
        values = hash_embedding(text, self._embed_dim, self._embed_seed)
        with self._lock:
            self._log.append(CallRecord("embed", text, self._model_id))
        return EmbeddingVector(values=values, model_id=self._model_id)

    def call_log(self) -> list[CallRecord]:
        with self._lock:
            return list(self._log)

    def remaining_replies(self) -> int | None:
        """Unconsumed ordered replies; None when rule-keyed."""
        with self._lock:
            if self._replies is None:
                return None
            return len(self._replies) - self._cursor


class HttpBackend:
    """OpenAI-compatible HTTP backend.

    Reads its endpoint and credentials from the environment unless given
    explicitly: AGENTNET_API_BASE, AGENTNET_API_KEY, AGENTNET_MODEL,
    AGENTNET_EMBED_MODEL. Each request is retried up to three times with
    exponential backoff before raising ``BackendError``.
    """

    MAX_ATTEMPTS = 3
    BACKOFF_BASE = 0.5

    def __init__(
        self,
        api_base: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        embed_model: str | None = None,
        timeout: float = 60.0,
        session=None,
    ):
        self.api_base = (api_base or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        if not self.api_base:
            raise ConfigurationError(f"http backend needs an API base ({ENV_API_BASE})")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        if not self.model:
            raise ConfigurationError(f"http backend needs a model id ({ENV_MODEL})")
        self.embed_model = embed_model or os.environ.get(ENV_EMBED_MODEL, DEFAULT_EMBED_MODEL)
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self._log: list[CallRecord] = []
        self._lock = threading.Lock()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, route: str, payload: dict) -> dict:
        url = f"{self.api_base}{route}"
        last_error: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                time.sleep(self.BACKOFF_BASE * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(
                    url, data=json.dumps(payload), headers=self._headers(), timeout=self.timeout
                )
                if resp.status_code == 200:
                    return resp.json()
                last_error = BackendError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
                logger.warning("backend attempt %d failed: %s", attempt + 1, last_error)
            except Exception as exc:  # connection errors, bad JSON
                last_error = exc
                logger.warning("backend attempt %d failed: %s", attempt + 1, exc)
        raise BackendError(f"backend call to {url} failed after {self.MAX_ATTEMPTS} attempts: {last_error}")

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "top_p": request.top_p,
        }
        doc = self._post("/chat/completions", payload)
        try:
            reply = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {doc!r:.200}") from exc
        if not isinstance(reply, str):
            raise BackendError(f"completion content is not text: {reply!r:.100}")
        with self._lock:
            self._log.append(CallRecord("complete", request.prompt_text(), reply))
        return reply

    def embed(self, text: str) -> EmbeddingVector:
        doc = self._post("/embeddings", {"model": self.embed_model, "input": text})
        try:
            values = np.asarray(doc["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed embedding response: {doc!r:.200}") from exc
        with self._lock:
            self._log.append(CallRecord("embed", text, self.embed_model))
        return EmbeddingVector(values=values, model_id=self.embed_model)

    def call_log(self) -> list[CallRecord]:
        with self._lock:
            return list(self._log)
