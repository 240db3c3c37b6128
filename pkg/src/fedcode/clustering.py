"""1-D weight clustering and codebook operations.

A codebook is a sorted 1-D float64 array of center values; compressed weights
are the per-parameter indices into it. Clustering runs Lloyd iterations over
the entire flat weight vector with deterministic quantile initialization, so
equal inputs always produce equal codebooks. Ties in nearest-center lookups
resolve to the lower-indexed center, which keeps binary-search assignment
total even for codebooks with duplicate values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import CorruptMessageError, ShrunkCodebookWarning

Codebook = np.ndarray  # sorted 1-D float64
CompressedWeights = np.ndarray  # 1-D int64 indices into a codebook

__all__ = [
    "Codebook",
    "CompressedWeights",
    "KMeansConfig",
    "compress",
    "concat_sorted",
    "decompress",
    "inertia",
    "kmeans_fit",
    "nearest_center",
    "snap",
]


@dataclass(frozen=True)
class KMeansConfig:
    """Lloyd iteration settings."""

    clusters: int = 64
    max_iterations: int = 25
    rel_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.clusters < 1:
            raise ValueError(f"clusters must be >= 1, got {self.clusters}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.rel_tolerance < 0:
            raise ValueError(f"rel_tolerance must be >= 0, got {self.rel_tolerance}")


def _as_values(values: np.ndarray) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"values must be a non-empty 1-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    return x


def _as_codebook(codebook: np.ndarray) -> np.ndarray:
    cb = np.asarray(codebook, dtype=np.float64)
    if cb.ndim != 1 or cb.size == 0:
        raise ValueError(f"codebook must be a non-empty 1-D array, got shape {cb.shape}")
    if not np.all(np.isfinite(cb)):
        raise ValueError("codebook centers must be finite")
    if np.any(np.diff(cb) < 0):
        raise ValueError("codebook centers must be sorted ascending")
    return cb


def compress(params: np.ndarray, codebook: Codebook) -> CompressedWeights:
    """Index of the nearest center for every value; midpoint ties go lower."""
    cb = _as_codebook(codebook)
    x = _as_values(params)
    if cb.size == 1:
        return np.zeros(x.size, dtype=np.int64)
    pos = np.searchsorted(cb, x, side="left")
    pos = np.clip(pos, 1, cb.size - 1)
    left_gap = x - cb[pos - 1]
    right_gap = cb[pos] - x
    return np.where(left_gap <= right_gap, pos - 1, pos).astype(np.int64)


def nearest_center(codebook: Codebook, value: float) -> int:
    """Scalar form of compress."""
    return int(compress(np.array([value], dtype=np.float64), codebook)[0])


def decompress(compressed: CompressedWeights, codebook: Codebook) -> np.ndarray:
    """Materialize center values for an index vector."""
    cb = _as_codebook(codebook)
    idx = np.asarray(compressed)
    if idx.ndim != 1:
        raise CorruptMessageError(f"index vector must be 1-D, got shape {idx.shape}")
    if not np.issubdtype(idx.dtype, np.integer):
        raise CorruptMessageError(f"index vector must be integer, got dtype {idx.dtype}")
    if idx.size and (idx.min() < 0 or idx.max() >= cb.size):
        raise CorruptMessageError(
            f"index out of range for codebook of {cb.size} centers"
        )
    return cb[idx]


def snap(params: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Replace every value with its nearest center."""
    cb = _as_codebook(codebook)
    return cb[compress(params, cb)]


def concat_sorted(codebooks: Iterable[Codebook]) -> Codebook:
    """Merge client codebooks into one sorted codebook, duplicates retained."""
    books = [_as_codebook(cb) for cb in codebooks]
    if not books:
        raise ValueError("need at least one codebook to concatenate")
    return np.sort(np.concatenate(books))


def inertia(values: np.ndarray, codebook: Codebook) -> float:
    """Sum of squared distances to nearest centers."""
    x = _as_values(values)
    snapped = snap(x, codebook)
    return float(np.sum((x - snapped) ** 2))


# Exact solving is affordable only for microscopic inputs; every real weight
# vector is far larger, so Lloyd remains the production algorithm.
_EXACT_MAX_VALUES = 64
_EXACT_MAX_CLUSTERS = 8


def _exact_contiguous(xs: np.ndarray, k: int) -> np.ndarray:
    """Globally optimal centers for sorted values via contiguous-partition DP."""
    n = xs.size
    s1 = np.concatenate(([0.0], np.cumsum(xs)))
    s2 = np.concatenate(([0.0], np.cumsum(xs * xs)))

    def block_sse(a: int, b: int) -> float:
        total = s1[b] - s1[a]
        return float(s2[b] - s2[a] - total * total / (b - a))

    # cost[j][i]: best SSE splitting xs[:i] into j blocks; choice restores cuts
    cost = np.full((k + 1, n + 1), np.inf)
    choice = np.zeros((k + 1, n + 1), dtype=np.int64)
    cost[0][0] = 0.0
    for j in range(1, k + 1):
        for i in range(j, n + 1):
            best, best_a = np.inf, j - 1
            for a in range(j - 1, i):
                c = cost[j - 1][a] + block_sse(a, i)
                if c < best:
                    best, best_a = c, a
            cost[j][i] = best
            choice[j][i] = best_a
    cuts = [n]
    for j in range(k, 0, -1):
        cuts.append(int(choice[j][cuts[-1]]))
    cuts.reverse()
    centers = np.array([xs[a:b].mean() for a, b in zip(cuts[:-1], cuts[1:])])
    centers.sort()
    return centers


def _reseed_empty(
    xs: np.ndarray, centers: np.ndarray, assign: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Move each empty cluster to the worst-served value; rerun assignment."""
    for _ in range(k):
        counts = np.bincount(assign, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        gaps = np.abs(xs - centers[assign])
        # never reseed onto an existing center value, or it stays empty
        gaps[np.isin(xs, centers)] = -1.0
        target = int(np.argmax(gaps))
        centers = centers.copy()
        centers[int(empty[0])] = xs[target]
        centers.sort()
        assign = compress(xs, centers)
    return centers, assign


def _lloyd(
    xs: np.ndarray, k: int, max_iterations: int, rel_tolerance: float
) -> tuple[np.ndarray, list[float]]:
    """Lloyd iterations over sorted values; returns centers and inertia trace."""
    scale = max(float(xs[-1] - xs[0]), np.finfo(np.float64).tiny)
    centers = xs[np.round(np.linspace(0, xs.size - 1, k)).astype(np.int64)].copy()
    history: list[float] = []
    for _ in range(max_iterations):
        assign = compress(xs, centers)
        centers_prev = centers
        centers, assign = _reseed_empty(xs, centers, assign, k)
        sums = np.bincount(assign, weights=xs, minlength=k)
        counts = np.bincount(assign, minlength=k)
        centers = sums / counts
        # contiguous 1-D clusters keep their means ordered
        centers.sort()
        history.append(float(np.sum((xs - centers[compress(xs, centers)]) ** 2)))
        if float(np.max(np.abs(centers - centers_prev))) / scale < rel_tolerance:
            break
    return centers, history


def kmeans_fit(
    values: np.ndarray, cfg: KMeansConfig, seed: int = 0
) -> tuple[Codebook, CompressedWeights]:
    """Cluster a flat value vector into a sorted codebook plus index vector.

    Initialization is deterministic (evenly spaced order statistics), so the
    seed only matters as a tie-break reserve and equal inputs reproduce the
    same codebook exactly. Microscopic inputs are solved exactly instead,
    where enumeration is cheaper than a single Lloyd sweep. If the requested
    cluster count exceeds the number of distinct values the codebook shrinks
    to the distinct values and a ShrunkCodebookWarning is emitted.

    Returns:
        (codebook, compressed) with compressed[i] the nearest-center index
        of values[i], ties resolved toward the lower index.
    """
    del seed  # deterministic path; reserved for degenerate tie perturbation
    x = _as_values(values)
    distinct = np.unique(x)
    if cfg.clusters >= distinct.size:
        if cfg.clusters > distinct.size:
            warnings.warn(
                f"codebook shrunk from {cfg.clusters} to {distinct.size} centers "
                "(fewer distinct values than clusters)",
                ShrunkCodebookWarning,
                stacklevel=2,
            )
        centers = distinct
    elif x.size <= _EXACT_MAX_VALUES and cfg.clusters <= _EXACT_MAX_CLUSTERS:
        centers = _exact_contiguous(np.sort(x), cfg.clusters)
    else:
        centers, _ = _lloyd(np.sort(x), cfg.clusters, cfg.max_iterations, cfg.rel_tolerance)
    return centers, compress(x, centers)
