#!/usr/bin/env python3
"""Regenerate the packaged two-specialty synthetic dataset.

Layout: cycles of ten tasks. Position 9 of each cycle is a gamma
distractor (no agent can solve it); the rest alternate alpha/beta with the
phase flipping every cycle, so both specialties get 90 tasks over the
200-task training split and the distractors land evenly.
"""

from __future__ import annotations

import json
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "src/agentnet/data/datasets/synthetic"

GOLD = {"alpha": "ALPHA-ANSWER", "beta": "BETA-ANSWER", "gamma": "GAMMA-ANSWER"}


def category_at(index: int) -> str:
    cycle, pos = divmod(index, 10)
    if pos == 9:
        return "gamma"
    return "alpha" if (pos + cycle) % 2 == 0 else "beta"


def make_split(name: str, count: int, offset: int) -> dict[str, int]:
    counts = {"alpha": 0, "beta": 0, "gamma": 0}
    lines = []
    for i in range(count):
        category = category_at(i)
        counts[category] += 1
        record = {
            "id": f"{name}-{i:04d}",
            "query": f"[{category}] drill {offset + i:04d}: apply the {category} procedure to sample {offset + i}.",
            "gold": GOLD[category],
            "category": category,
        }
        lines.append(json.dumps(record, sort_keys=True))
    (DATA_DIR / f"{name}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return counts


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    train_counts = make_split("train", 200, 0)
    test_counts = make_split("test", 40, 1000)
    manifest = {
        "benchmark": "bbh",
        "categories": ["alpha", "beta", "gamma"],
        "splits": {"train": 200, "test": 40},
    }
    (DATA_DIR / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"train: {train_counts}")
    print(f"test: {test_counts}")


if __name__ == "__main__":
    main()
