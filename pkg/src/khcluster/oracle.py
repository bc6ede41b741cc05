"""Exhaustive search over all partitions of a small dataset.

Every partition of n points into exactly m nonempty clusters is encoded as
a restricted growth string; enumerating them in lexicographic order makes
the returned optimum deterministic even under error ties. The point count
is hard-capped because the count of partitions grows like the Stirling
numbers. This module is the ground truth that stability results are
measured against; it shares no reclassification code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, PreconditionError, SizeGuardError

MAX_POINTS = 13
CHUNK = 65536


@dataclass(frozen=True)
class OracleResult:
    m: int
    best_e: float
    best_labels: tuple[int, ...]
    partitions_examined: int


def _partition_matrix(n: int, m: int) -> np.ndarray:
    """All restricted growth strings of length n with exactly m labels, lex order.

    Grown position by position: a prefix with running maximum mx extends to
    labels 0..min(mx + 1, m - 1). Prefixes that cannot reach m labels in the
    remaining slots are dropped early. np.repeat preserves prefix order and
    extensions are appended in ascending label order, so rows stay sorted.
    """
    rows = np.zeros((1, 1), dtype=np.int8)
    mx = np.zeros(1, dtype=np.int8)
    for i in range(1, n):
        keep = mx + 1 + (n - i) >= m
        rows, mx = rows[keep], mx[keep]
        n_ext = np.minimum(mx + 2, m).astype(np.int64)
        parent = np.repeat(np.arange(rows.shape[0]), n_ext)
        offs = np.concatenate([np.arange(k, dtype=np.int8) for k in n_ext]) \
            if rows.shape[0] else np.zeros(0, dtype=np.int8)
        rows = np.concatenate([rows[parent], offs[:, None]], axis=1)
        mx = np.maximum(mx[parent], offs)
    return rows[mx == m - 1]


def _chunk_energies(points: np.ndarray, labels: np.ndarray, m: int) -> np.ndarray:
    """Total squared error of each labelling in the chunk, vectorized."""
    onehot = np.eye(m, dtype=np.float64)[labels]          # (p, n, m)
    counts = onehot.sum(axis=1)                           # (p, m)
    sums = np.einsum("pnm,nd->pmd", onehot, points)       # (p, m, d)
    sq = float((points * points).sum())
    per_cluster = (sums * sums).sum(axis=2) / counts      # (p, m)
    return np.maximum(sq - per_cluster.sum(axis=1), 0.0)


def global_min(ds: Dataset, m: int) -> OracleResult:
    """Exact minimum-error partition into m clusters, first in lex order on ties."""
    n = ds.n
    if n > MAX_POINTS:
        raise SizeGuardError(
            f"exhaustive search is capped at {MAX_POINTS} points, got {n}")
    if not 1 <= m <= n:
        raise PreconditionError(f"cannot split {n} points into {m} nonempty clusters")
    mat = _partition_matrix(n, m)
    best_e = np.inf
    best_row = None
    examined = 0
    for lo in range(0, mat.shape[0], CHUNK):
        chunk = mat[lo:lo + CHUNK]
        energies = _chunk_energies(ds.points, chunk.astype(np.int64), m)
        k = int(np.argmin(energies))
        examined += chunk.shape[0]
        if energies[k] < best_e:  # strict: earlier chunks win ties
            best_e = float(energies[k])
            best_row = chunk[k]
    assert best_row is not None
    return OracleResult(m, best_e, tuple(int(c) for c in best_row), examined)


def minimum_curve(ds: Dataset, m_max: int) -> list[OracleResult]:
    return [global_min(ds, m) for m in range(1, m_max + 1)]
