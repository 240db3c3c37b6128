"""Tests for dataset synthesis, loading, and Dirichlet partitioning."""

from __future__ import annotations

import numpy as np
import pytest

from fedcode.data import (
    Partition,
    PartitionConfig,
    _largest_remainder,
    class_concentration,
    dirichlet_partition,
    load_csv_dataset,
    sample_dirichlet,
    split_train_test,
    synth_blobs,
)
from fedcode.errors import ConfigurationError
from fedcode.model import (
    LabeledDataset,
    ModelSpec,
    TrainConfig,
    evaluate,
    init_params,
    local_train,
)
from fedcode.seeding import derive_rng


def _partition(labels, num_clients=10, beta=1.0, seed=0):
    cfg = PartitionConfig(num_clients=num_clients, beta=beta, seed=seed)
    return dirichlet_partition(labels, cfg)


# ---------------------------------------------------------------------------
# sample_dirichlet


def test_dirichlet_draw_lies_on_simplex():
    rng = derive_rng(3, 99)
    draw = sample_dirichlet(0.5, 8, rng)
    assert draw.shape == (8,)
    assert np.all(draw >= 0.0)
    assert np.isclose(draw.sum(), 1.0)


def test_dirichlet_single_dimension_is_exactly_one():
    rng = derive_rng(3, 99)
    assert np.array_equal(sample_dirichlet(0.1, 1, rng), np.ones(1))


def test_dirichlet_large_beta_is_near_uniform():
    rng = derive_rng(3, 99)
    draw = sample_dirichlet(1e6, 10, rng)
    assert np.allclose(draw, 0.1, atol=1e-2)


def test_dirichlet_rejects_bad_arguments():
    rng = derive_rng(3, 99)
    with pytest.raises(ValueError):
        sample_dirichlet(0.0, 4, rng)
    with pytest.raises(ValueError):
        sample_dirichlet(-1.0, 4, rng)
    with pytest.raises(ValueError):
        sample_dirichlet(1.0, 0, rng)


# ---------------------------------------------------------------------------
# _largest_remainder


def test_largest_remainder_hand_case():
    counts = _largest_remainder(np.array([0.5, 0.3, 0.2]), 7)
    assert counts.tolist() == [4, 2, 1]


def test_largest_remainder_breaks_ties_toward_lower_index():
    counts = _largest_remainder(np.array([0.25, 0.25, 0.25, 0.25]), 2)
    assert counts.tolist() == [1, 1, 0, 0]


def test_largest_remainder_conserves_total():
    rng = np.random.default_rng(7)
    for _ in range(50):
        shares = rng.dirichlet(np.full(6, 0.3))
        total = int(rng.integers(0, 200))
        counts = _largest_remainder(shares, total)
        assert counts.sum() == total
        assert np.all(counts >= 0)


# ---------------------------------------------------------------------------
# dirichlet_partition


def test_partition_covers_every_sample_exactly_once():
    labels = np.repeat(np.arange(5), 40)
    part = _partition(labels, num_clients=8, beta=0.5)
    merged = np.sort(np.concatenate(part.assignments))
    assert np.array_equal(merged, np.arange(labels.size))


def test_partition_conserves_per_class_totals():
    labels = np.repeat(np.arange(4), 30)
    part = _partition(labels, num_clients=6, beta=0.3)
    for cls in range(4):
        held = sum(int(np.sum(labels[idx] == cls)) for idx in part.assignments)
        assert held == 30


def test_partition_is_deterministic_in_seed():
    labels = np.repeat(np.arange(6), 25)
    first = _partition(labels, seed=42)
    second = _partition(labels, seed=42)
    other = _partition(labels, seed=43)
    for a, b in zip(first.assignments, second.assignments):
        assert np.array_equal(a, b)
    assert any(
        not np.array_equal(a, b)
        for a, b in zip(first.assignments, other.assignments)
    )


def test_partition_repairs_empty_clients():
    # One class and heavy skew forces some clients to start empty.
    labels = np.zeros(3, dtype=np.int64)
    part = _partition(labels, num_clients=3, beta=0.05, seed=1)
    sizes = [idx.size for idx in part.assignments]
    assert sizes == [1, 1, 1]


def test_partition_errors_when_repair_is_impossible():
    labels = np.zeros(1, dtype=np.int64)
    with pytest.raises(ConfigurationError, match="not enough samples"):
        _partition(labels, num_clients=2, beta=1.0)


def test_partition_rejects_bad_labels():
    with pytest.raises(ConfigurationError, match="non-empty 1-D"):
        _partition(np.empty(0, dtype=np.int64))
    with pytest.raises(ConfigurationError, match="non-empty 1-D"):
        _partition(np.zeros((4, 2), dtype=np.int64))


# ---------------------------------------------------------------------------
# class_concentration


def test_concentration_balanced_split_is_one():
    labels = np.repeat(np.arange(10), 100)
    part = _partition(labels, num_clients=10, beta=1e6, seed=2)
    assert class_concentration(part, labels) == pytest.approx(1.0)


def test_concentration_single_class_clients():
    # Hand-built partition: each client holds exactly one class.
    labels = np.repeat(np.arange(4), 10)
    part = Partition(tuple(np.flatnonzero(labels == c) for c in range(4)))
    assert class_concentration(part, labels) == pytest.approx(0.25)


def test_concentration_threshold_is_a_fraction_of_client_size():
    # 1 sample out of 200 is 0.5%: below the 1% bar, so not counted.
    labels = np.array([0] * 199 + [1] + [0] * 99 + [1], dtype=np.int64)
    part = Partition((np.arange(200), np.arange(200, 300)))
    # Client 0: class 1 at 1/200 ignored -> 1 of 2 classes.
    # Client 1: class 1 at 1/100 counted -> 2 of 2 classes.
    assert class_concentration(part, labels) == pytest.approx((0.5 + 1.0) / 2)


def test_concentration_rises_with_beta():
    labels = np.repeat(np.arange(10), 100)
    means = []
    for beta in (0.1, 1.0, 10.0):
        vals = [
            class_concentration(_partition(labels, beta=beta, seed=s), labels)
            for s in range(20)
        ]
        means.append(float(np.mean(vals)))
    assert means[0] < means[1] < means[2]
    # Frozen regression bands for this allocation procedure.
    assert 0.36 <= means[0] <= 0.44
    assert 0.85 <= means[1] <= 0.97
    assert means[2] >= 0.99


# ---------------------------------------------------------------------------
# synth_blobs


def test_blobs_shapes_and_balance():
    train, test = synth_blobs(
        n_per_class=50, num_classes=4, input_dim=8, spread=0.2, seed=5
    )
    assert train.features.shape == (4 * 40, 8)
    assert test.features.shape == (4 * 10, 8)
    for cls in range(4):
        assert int(np.sum(train.labels == cls)) == 40
        assert int(np.sum(test.labels == cls)) == 10


def test_blobs_deterministic_in_seed():
    a_train, a_test = synth_blobs(30, 3, 5, 0.3, seed=9)
    b_train, b_test = synth_blobs(30, 3, 5, 0.3, seed=9)
    assert np.array_equal(a_train.features, b_train.features)
    assert np.array_equal(a_test.labels, b_test.labels)
    c_train, _ = synth_blobs(30, 3, 5, 0.3, seed=10)
    assert not np.array_equal(a_train.features, c_train.features)


def test_blobs_validation():
    with pytest.raises(ConfigurationError):
        synth_blobs(4, 3, 5, 0.3, seed=0)
    with pytest.raises(ConfigurationError):
        synth_blobs(30, 1, 5, 0.3, seed=0)
    with pytest.raises(ConfigurationError):
        synth_blobs(30, 3, 0, 0.3, seed=0)
    with pytest.raises(ConfigurationError):
        synth_blobs(30, 3, 5, 0.0, seed=0)


def test_blobs_are_learnable_centrally():
    # Tight clusters: a small network should fit them almost perfectly.
    train, test = synth_blobs(
        n_per_class=60, num_classes=4, input_dim=8, spread=0.05, seed=3
    )
    spec = ModelSpec(input_dim=8, hidden_dims=(16,), num_classes=4)
    params = init_params(spec, seed=0)
    cfg = TrainConfig(local_epochs=8, batch_size=32, learning_rate=5e-3)
    trained = local_train(spec, params, train, cfg, seed=1)
    assert evaluate(spec, trained, test) >= 0.99


# ---------------------------------------------------------------------------
# split_train_test


def test_split_sizes_and_disjoint_cover():
    features = np.arange(100, dtype=np.float64).reshape(100, 1)
    labels = np.arange(100) % 4
    dataset = LabeledDataset(features=features, labels=labels)
    train, test = split_train_test(dataset, 0.25, seed=6)
    assert test.labels.size == 25
    assert train.labels.size == 75
    merged = np.sort(np.concatenate([train.features[:, 0], test.features[:, 0]]))
    assert np.array_equal(merged, np.arange(100, dtype=np.float64))


def test_split_is_deterministic():
    features = np.arange(40, dtype=np.float64).reshape(40, 1)
    dataset = LabeledDataset(features=features, labels=np.zeros(40, dtype=np.int64))
    a_train, a_test = split_train_test(dataset, 0.2, seed=7)
    b_train, b_test = split_train_test(dataset, 0.2, seed=7)
    assert np.array_equal(a_train.features, b_train.features)
    assert np.array_equal(a_test.features, b_test.features)


def test_split_validation():
    features = np.zeros((1, 2))
    tiny = LabeledDataset(features=features, labels=np.zeros(1, dtype=np.int64))
    with pytest.raises(ConfigurationError):
        split_train_test(tiny, 0.5, seed=0)
    many = LabeledDataset(
        features=np.zeros((10, 2)), labels=np.zeros(10, dtype=np.int64)
    )
    with pytest.raises(ConfigurationError):
        split_train_test(many, 0.0, seed=0)
    with pytest.raises(ConfigurationError):
        split_train_test(many, 1.0, seed=0)


# ---------------------------------------------------------------------------
# load_csv_dataset


def test_csv_loads_without_header(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("0.5,1.25,0\n-1.0,2.0,1\n3.5,0.0,2\n")
    dataset = load_csv_dataset(path)
    assert dataset.features.shape == (3, 2)
    assert dataset.labels.tolist() == [0, 1, 2]
    assert dataset.features[1, 0] == -1.0


def test_csv_skips_header_row(tmp_path):
    path = tmp_path / "headed.csv"
    path.write_text("x1,x2,label\n0.5,1.25,0\n-1.0,2.0,1\n")
    dataset = load_csv_dataset(path)
    assert dataset.labels.tolist() == [0, 1]


def test_csv_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_csv_dataset(tmp_path / "absent.csv")


def test_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ConfigurationError, match="is empty"):
        load_csv_dataset(path)


def test_csv_header_only(tmp_path):
    path = tmp_path / "lonely.csv"
    path.write_text("x1,x2,label\n")
    with pytest.raises(ConfigurationError, match="header but no samples"):
        load_csv_dataset(path)


def test_csv_too_narrow(tmp_path):
    path = tmp_path / "narrow.csv"
    path.write_text("1\n2\n")
    with pytest.raises(ConfigurationError, match="at least one feature"):
        load_csv_dataset(path)


def test_csv_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("0.5,1.0,0\n0.5,1\n")
    with pytest.raises(ConfigurationError, match="row 2 has 2 fields"):
        load_csv_dataset(path)


def test_csv_non_numeric_field(tmp_path):
    path = tmp_path / "words.csv"
    path.write_text("0.5,1.0,0\nuh,2.0,1\n")
    with pytest.raises(ConfigurationError, match="row 2 holds a non-numeric"):
        load_csv_dataset(path)


def test_csv_non_integer_label(tmp_path):
    path = tmp_path / "fraclabel.csv"
    path.write_text("0.5,1.0,0\n0.7,2.0,1.5\n")
    with pytest.raises(ConfigurationError, match="not a non-negative integer"):
        load_csv_dataset(path)


def test_csv_negative_label(tmp_path):
    path = tmp_path / "neglabel.csv"
    path.write_text("0.5,1.0,-1\n")
    with pytest.raises(ConfigurationError, match="not a non-negative integer"):
        load_csv_dataset(path)
