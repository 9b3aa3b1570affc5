"""Time the similarity kernels: compiled extension vs numpy fallback.

Runs cosine_scores (one query against a fragment matrix) and
pairwise_max_cosine (the eviction pool scan) over a sweep of matrix
sizes, checks that both backends agree, and reports the speedup.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --rows 200 2000 --dims 64 --repeats 7
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from agentnet import _kernels_py

try:
    from agentnet import _kernels
except ImportError:
    _kernels = None


@dataclass(frozen=True)
class BenchResult:
    kernel: str
    rows: int
    dim: int
    python_us: float
    compiled_us: float | None

    @property
    def speedup(self) -> float | None:
        if self.compiled_us is None or self.compiled_us == 0.0:
            return None
        return self.python_us / self.compiled_us


def best_of(fn, repeats: int) -> float:
    # best-of-N wall time in microseconds
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e6


def bench_case(rows: int, dim: int, repeats: int, rng: np.random.Generator) -> list[BenchResult]:
    matrix = rng.standard_normal((rows, dim))
    matrix[rng.integers(0, rows)] = 0.0  # keep the zero-norm branch honest
    query = rng.standard_normal(dim)

    cases = [
        ("cosine_scores", lambda impl: impl.cosine_scores(query, matrix)),
        ("pairwise_max_cosine", lambda impl: impl.pairwise_max_cosine(matrix)),
    ]
    out = []
    for name, call in cases:
        if _kernels is not None:
            gap = float(np.max(np.abs(call(_kernels) - call(_kernels_py))))
            if gap > 1e-12:
                raise AssertionError(f"{name} backends disagree by {gap:.3e} at rows={rows} dim={dim}")
        python_us = best_of(lambda: call(_kernels_py), repeats)
        compiled_us = best_of(lambda: call(_kernels), repeats) if _kernels is not None else None
        out.append(BenchResult(name, rows, dim, python_us, compiled_us))
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description="similarity kernel micro-benchmark")
    parser.add_argument("--rows", type=int, nargs="+", default=[100, 1000, 4000])
    parser.add_argument("--dims", type=int, nargs="+", default=[16, 64])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not importable, timing the numpy fallback only")
    rng = np.random.default_rng(args.seed)

    header = f"{'kernel':<22}{'rows':>6}{'dim':>5}{'python us':>12}{'compiled us':>13}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for rows in args.rows:
        for dim in args.dims:
            for result in bench_case(rows, dim, args.repeats, rng):
                compiled = f"{result.compiled_us:>13.1f}" if result.compiled_us is not None else f"{'-':>13}"
                speedup = f"{result.speedup:>8.2f}x" if result.speedup is not None else f"{'-':>9}"
                print(
                    f"{result.kernel:<22}{result.rows:>6}{result.dim:>5}"
                    f"{result.python_us:>12.1f}{compiled}{speedup}"
                )


if __name__ == "__main__":
    main()
