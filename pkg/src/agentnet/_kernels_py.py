"""Pure-numpy similarity kernels.

Fallback implementation used when the compiled extension is unavailable.
Semantics shared with ``_kernels.pyx``:

- zero-norm vectors have cosine 0 against everything
- ``pairwise_max_cosine`` reports -1.0 for a row with no other rows, so a
  sole fragment gets full uniqueness downstream
"""

from __future__ import annotations

import numpy as np


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two 1-d vectors, 0.0 if either has zero norm."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine_scores(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine similarity of ``query`` against every row of ``matrix``.

    Args:
        query: shape (d,) float64 vector.
        matrix: shape (n, d) float64 matrix.

    Returns:
        Shape (n,) float64 array of similarities.
    """
    n = matrix.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    qn = np.linalg.norm(query)
    if qn == 0.0:
        return np.zeros(n, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    dots = matrix @ query
    out = np.zeros(n, dtype=np.float64)
    nz = norms > 0.0
    out[nz] = dots[nz] / (norms[nz] * qn)
    return out


def pairwise_max_cosine(matrix: np.ndarray) -> np.ndarray:
    """For each row, the maximum cosine similarity to any *other* row.

    Rows with zero norm score 0 against everything. A matrix with a single
    row returns [-1.0] (no other row exists).
    """
    n = matrix.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    if n == 1:
        return np.full(1, -1.0, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = matrix / safe[:, None]
    unit[norms == 0.0] = 0.0
    gram = unit @ unit.T
    np.fill_diagonal(gram, -np.inf)
    return gram.max(axis=1)
