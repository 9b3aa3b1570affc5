"""Similarity kernel selection.

Prefers the compiled extension, falls back to the numpy implementation.
Set ``AGENTNET_PURE_PYTHON=1`` to force the fallback (useful for
benchmarking and for exercising both paths in tests). Both implementations
share exact semantics; ranking and tie-breaking always happen in the
callers, on the returned score arrays, so the two backends order results
identically.
"""

from __future__ import annotations

import os

from agentnet import _kernels_py

if os.environ.get("AGENTNET_PURE_PYTHON") == "1":
    _impl = _kernels_py
    KERNEL_BACKEND = "python"
else:
    try:
        from agentnet import _kernels as _impl  # type: ignore[no-redef]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        KERNEL_BACKEND = "python"

cosine = _impl.cosine
cosine_scores = _impl.cosine_scores
pairwise_max_cosine = _impl.pairwise_max_cosine


def kernel_backend() -> str:
    """Name of the active implementation: 'compiled' or 'python'."""
    return KERNEL_BACKEND
