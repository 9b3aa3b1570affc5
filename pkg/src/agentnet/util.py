"""Small shared helpers."""

from __future__ import annotations

import json
from typing import Any

import numpy as np


def canonical_json(obj: Any) -> str:
    """Serialize to a canonical JSON string.

    Sorted keys, minimal separators, UTF-8 passthrough. Two equal documents
    always serialize to identical bytes, which several artifacts (snapshots,
    traces, persisted state) rely on for byte-level comparisons.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def as_float_list(values: np.ndarray) -> list[float]:
    """Convert an array to plain floats for JSON round-tripping."""
    return [float(v) for v in values]
