"""Benchmark dataset loading.

A dataset is a JSONL file of task records next to a ``manifest.json``
describing the benchmark kind, the allowed category labels, and the
expected record count per split file. The loader validates each line and,
when a manifest is present, the counts and categories against it, so a
truncated or mislabeled file fails loudly instead of skewing results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from agentnet.errors import DatasetError

BENCHMARK_KINDS = ("bbh", "math", "apibank")


@dataclass(frozen=True)
class TaskRecord:
    """One benchmark task.

    The optional difficulty label doubles as the queue priority: higher
    difficulty tasks are dispatched first, ties in arrival order.
    """

    record_id: str
    query: str
    gold: str
    category: str
    difficulty: int | None = None

    @property
    def priority(self) -> int:
        return self.difficulty or 0


def load_manifest(directory: str | Path) -> dict | None:
    """Load ``manifest.json`` from a dataset directory, None if absent."""
    path = Path(directory) / "manifest.json"
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
    for key in ("benchmark", "categories", "splits"):
        if key not in doc:
            raise DatasetError(f"manifest {path} is missing {key!r}")
    if doc["benchmark"] not in BENCHMARK_KINDS:
        raise DatasetError(
            f"manifest {path}: unknown benchmark {doc['benchmark']!r}, "
            f"expected one of {BENCHMARK_KINDS}"
        )
    return doc


def load_dataset(path: str | Path) -> list[TaskRecord]:
    """Load one JSONL split, validated against its directory manifest.

    Each line needs id, query, gold, and category fields; difficulty is
    optional. With a manifest present, the record count must equal the
    declared count for this split and every category must be declared.

    Raises:
        DatasetError: on unreadable files, malformed lines, undeclared
            categories, or count mismatches.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    records: list[TaskRecord] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DatasetError(f"{path}:{lineno}: record must be an object")
        for field_name in ("id", "query", "gold", "category"):
            if field_name not in doc:
                raise DatasetError(f"{path}:{lineno}: missing field {field_name!r}")
        record_id = str(doc["id"])
        if record_id in seen_ids:
            raise DatasetError(f"{path}:{lineno}: duplicate id {record_id!r}")
        seen_ids.add(record_id)
        difficulty = doc.get("difficulty")
        if difficulty is not None and not isinstance(difficulty, int):
            raise DatasetError(f"{path}:{lineno}: difficulty must be an integer")
        records.append(
            TaskRecord(
                record_id=record_id,
                query=str(doc["query"]),
                gold=str(doc["gold"]),
                category=str(doc["category"]),
                difficulty=difficulty,
            )
        )
    manifest = load_manifest(path.parent)
    if manifest is not None:
        split = path.stem
        declared = manifest["splits"].get(split)
        if declared is not None and declared != len(records):
            raise DatasetError(
                f"{path}: manifest declares {declared} records for split "
                f"{split!r}, file has {len(records)}"
            )
        allowed = set(manifest["categories"])
        for record in records:
            if record.category not in allowed:
                raise DatasetError(
                    f"{path}: record {record.record_id} has undeclared "
                    f"category {record.category!r}"
                )
    return records


def order_by_priority(records: list[TaskRecord]) -> list[TaskRecord]:
    """Dispatch order: priority descending, stable for ties."""
    return sorted(records, key=lambda r: -r.priority)
