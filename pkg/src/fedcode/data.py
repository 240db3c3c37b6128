"""Synthetic datasets and label-skewed client partitioning.

Per-class client proportions come from a symmetric Dirichlet draw, turned
into integer counts by largest-remainder apportionment so every class's
samples are conserved exactly. Lower concentration means sharper label skew.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .model import LabeledDataset
from .seeding import ROLE_DATASET, ROLE_PARTITION, derive_rng

__all__ = [
    "Partition",
    "PartitionConfig",
    "class_concentration",
    "dirichlet_partition",
    "load_csv_dataset",
    "sample_dirichlet",
    "split_train_test",
    "synth_blobs",
]


@dataclass(frozen=True)
class PartitionConfig:
    num_clients: int
    beta: float
    seed: int

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise ConfigurationError(f"num_clients must be >= 1, got {self.num_clients}")
        if self.beta <= 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class Partition:
    """Per-client sample index arrays over one dataset."""

    assignments: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "assignments",
            tuple(np.asarray(a, dtype=np.int64) for a in self.assignments),
        )
        seen = np.concatenate(self.assignments) if self.assignments else np.array([], np.int64)
        if seen.size != np.unique(seen).size:
            raise ConfigurationError("partition assigns a sample to more than one client")

    @property
    def num_clients(self) -> int:
        return len(self.assignments)

    def client_sizes(self) -> list[int]:
        return [int(a.size) for a in self.assignments]


def sample_dirichlet(beta: float, dim: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from a symmetric Dirichlet via normalized Gamma(beta, 1)."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if dim == 1:
        return np.ones(1)
    draws = rng.gamma(beta, 1.0, size=dim)
    while draws.sum() == 0.0:  # guards against total underflow at tiny beta
        draws = rng.gamma(beta, 1.0, size=dim)
    return draws / draws.sum()


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing exactly to total; ties favor lower indices."""
    quotas = proportions * total
    counts = np.floor(quotas).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        remainders = quotas - counts
        # stable sort keeps lower client indices first on equal remainders
        order = np.argsort(-remainders, kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(labels: np.ndarray, cfg: PartitionConfig) -> Partition:
    """Split sample indices across clients with per-class Dirichlet proportions.

    Every class's samples are shuffled once, then cut into contiguous blocks
    sized by largest-remainder apportionment of the class's Dirichlet draw.
    A client left with zero samples overall receives one sample moved from
    the currently largest client.
    """
    labs = np.asarray(labels, dtype=np.int64)
    if labs.ndim != 1 or labs.size == 0:
        raise ConfigurationError("labels must be a non-empty 1-D array")
    rng = derive_rng(cfg.seed, ROLE_PARTITION)
    per_client: list[list[np.ndarray]] = [[] for _ in range(cfg.num_clients)]
    for cls in np.unique(labs):
        members = np.flatnonzero(labs == cls)
        members = members[rng.permutation(members.size)]
        shares = sample_dirichlet(cfg.beta, cfg.num_clients, rng)
        counts = _largest_remainder(shares, members.size)
        offset = 0
        for client, count in enumerate(counts):
            per_client[client].append(members[offset : offset + count])
            offset += count
    chunks = [
        np.concatenate(parts) if parts else np.array([], dtype=np.int64)
        for parts in per_client
    ]
    _repair_empty_clients(chunks)
    return Partition(assignments=tuple(chunks))


def _repair_empty_clients(chunks: list[np.ndarray]) -> None:
    for i, chunk in enumerate(chunks):
        if chunk.size > 0:
            continue
        donor = int(np.argmax([c.size for c in chunks]))
        if chunks[donor].size < 2:
            raise ConfigurationError("not enough samples to give every client one")
        chunks[i] = chunks[donor][-1:]
        chunks[donor] = chunks[donor][:-1]


def class_concentration(
    partition: Partition, labels: np.ndarray, threshold: float = 0.01
) -> float:
    """Mean fraction of classes contributing at least `threshold` of a client.

    1.0 means every client sees every class; 1/num_classes is the floor for
    single-class clients.
    """
    labs = np.asarray(labels, dtype=np.int64)
    num_classes = int(np.unique(labs).size)
    fractions = []
    for idx in partition.assignments:
        if idx.size == 0:
            fractions.append(0.0)
            continue
        counts = np.bincount(labs[idx], minlength=num_classes)
        present = int(np.sum(counts / idx.size >= threshold))
        fractions.append(present / num_classes)
    return float(np.mean(fractions))


def synth_blobs(
    n_per_class: int,
    num_classes: int,
    input_dim: int,
    spread: float,
    seed: int,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Gaussian class clusters with means on the unit sphere; 80/20 split.

    The split is stratified per class so train and test stay balanced.

    Returns:
        (train, test) datasets totalling n_per_class * num_classes samples.
    """
    if n_per_class < 5:
        raise ConfigurationError(f"n_per_class must be >= 5 for an 80/20 split, got {n_per_class}")
    if num_classes < 2 or input_dim < 1 or spread <= 0:
        raise ConfigurationError("need num_classes >= 2, input_dim >= 1, spread > 0")
    rng = derive_rng(seed, ROLE_DATASET)
    means = rng.normal(size=(num_classes, input_dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)

    train_x, train_y, test_x, test_y = [], [], [], []
    n_test = n_per_class // 5
    for cls in range(num_classes):
        samples = means[cls] + spread * rng.normal(size=(n_per_class, input_dim))
        test_x.append(samples[:n_test])
        test_y.append(np.full(n_test, cls, dtype=np.int64))
        train_x.append(samples[n_test:])
        train_y.append(np.full(n_per_class - n_test, cls, dtype=np.int64))
    train = LabeledDataset(np.concatenate(train_x), np.concatenate(train_y))
    test = LabeledDataset(np.concatenate(test_x), np.concatenate(test_y))
    return train, test


def split_train_test(
    dataset: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic shuffled split for imported datasets."""
    if not 0 < test_fraction < 1:
        raise ConfigurationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = derive_rng(seed, ROLE_DATASET, 1)
    order = rng.permutation(dataset.sample_count)
    n_test = max(1, int(round(dataset.sample_count * test_fraction)))
    if n_test >= dataset.sample_count:
        raise ConfigurationError("test split would consume the whole dataset")
    return dataset.subset(order[n_test:]), dataset.subset(order[:n_test])


def load_csv_dataset(path: str | Path) -> LabeledDataset:
    """Read one sample per row, numeric features, integer label last.

    The schema is validated up front so malformed files fail before any
    training starts.
    """
    rows: list[list[str]] = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if row:
                    rows.append(row)
    except OSError as exc:
        raise ConfigurationError(f"cannot read dataset file {path}: {exc}") from exc
    if not rows:
        raise ConfigurationError(f"dataset file {path} is empty")
    # tolerate a single header row of non-numeric cells
    try:
        float(rows[0][-1])
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise ConfigurationError(f"dataset file {path} has a header but no samples")
    width = len(rows[0])
    if width < 2:
        raise ConfigurationError("each row needs at least one feature and a label")
    features = np.empty((len(rows), width - 1))
    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ConfigurationError(f"row {i + 1} has {len(row)} fields, expected {width}")
        try:
            features[i] = [float(v) for v in row[:-1]]
            label = float(row[-1])
        except ValueError as exc:
            raise ConfigurationError(f"row {i + 1} holds a non-numeric field") from exc
        if label != int(label) or label < 0:
            raise ConfigurationError(f"row {i + 1} label {row[-1]} is not a non-negative integer")
        labels[i] = int(label)
    return LabeledDataset(features, labels)
