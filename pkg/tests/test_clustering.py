"""1-D k-means, nearest-center compression, and codebook operations."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedcode import (
    CorruptMessageError,
    KMeansConfig,
    ShrunkCodebookWarning,
    compress,
    concat_sorted,
    decompress,
    inertia,
    kmeans_fit,
    nearest_center,
    snap,
)
from fedcode.clustering import _exact_contiguous, _lloyd

finite_values = arrays(
    dtype=np.float64,
    shape=st.integers(1, 80),
    elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
)


def brute_force_inertia(values: np.ndarray, k: int) -> float:
    """Optimum over every contiguous split of the sorted values."""
    xs = np.sort(values)
    best = np.inf
    for cuts in itertools.combinations(range(1, xs.size), k - 1):
        bounds = [0, *cuts, xs.size]
        centers = np.sort([xs[a:b].mean() for a, b in zip(bounds, bounds[1:])])
        best = min(best, inertia(xs, np.asarray(centers)))
    return best


def test_compress_ties_resolve_to_lower_center():
    codebook = np.array([0.0, 1.0])
    assert compress(np.array([0.5]), codebook)[0] == 0
    assert compress(np.array([0.5 + 1e-9]), codebook)[0] == 1


def test_compress_duplicate_centers_pick_first():
    codebook = np.array([1.0, 1.0, 2.0])
    assert compress(np.array([1.0]), codebook)[0] == 0


def test_compress_out_of_range_values_clip_to_ends():
    codebook = np.array([-1.0, 0.0, 1.0])
    out = compress(np.array([-50.0, 50.0]), codebook)
    assert list(out) == [0, 2]


def test_nearest_center_matches_compress():
    codebook = np.array([-2.0, 0.5, 3.0])
    for v in (-10.0, -0.7, 0.5, 1.75, 1.8, 100.0):
        assert nearest_center(codebook, v) == compress(np.array([v]), codebook)[0]


def test_decompress_validates_indices():
    codebook = np.array([0.0, 1.0])
    with pytest.raises(CorruptMessageError):
        decompress(np.array([0.5]), codebook)
    with pytest.raises(CorruptMessageError):
        decompress(np.array([2]), codebook)
    with pytest.raises(CorruptMessageError):
        decompress(np.array([-1]), codebook)


def test_concat_sorted_keeps_duplicates():
    merged = concat_sorted([np.array([1.0, 3.0]), np.array([2.0, 3.0])])
    assert list(merged) == [1.0, 2.0, 3.0, 3.0]


def test_inertia_hand_value():
    values = np.array([0.0, 1.0, 4.0])
    assert inertia(values, np.array([0.5, 4.0])) == pytest.approx(0.5)


def test_kmeans_shrinks_to_distinct_values_with_warning():
    values = np.array([1.0, 1.0, 2.0, 2.0, 5.0])
    with pytest.warns(ShrunkCodebookWarning):
        centers, idx = kmeans_fit(values, KMeansConfig(clusters=4))
    assert list(centers) == [1.0, 2.0, 5.0]
    assert np.array_equal(decompress(idx, centers), values)


def test_kmeans_exact_cluster_count_is_identity_without_warning():
    values = np.array([3.0, 1.0, 2.0])
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        centers, idx = kmeans_fit(values, KMeansConfig(clusters=3))
    assert np.array_equal(decompress(idx, centers), values)


def test_kmeans_single_cluster_is_mean():
    values = np.array([1.0, 2.0, 6.0])
    centers, idx = kmeans_fit(values, KMeansConfig(clusters=1))
    assert centers == pytest.approx([3.0])
    assert list(idx) == [0, 0, 0]


def test_kmeans_constant_input():
    with pytest.warns(ShrunkCodebookWarning):
        centers, idx = kmeans_fit(np.full(10, 2.5), KMeansConfig(clusters=3))
    assert list(centers) == [2.5]
    assert not idx.any()


def test_kmeans_separates_obvious_groups():
    values = np.array([0.0, 0.1, 0.0, 0.1, 10.0, 10.1, 10.0])
    centers, idx = kmeans_fit(values, KMeansConfig(clusters=2))
    assert centers == pytest.approx([0.05, 30.1 / 3], abs=1e-9)
    assert list(idx) == [0, 0, 0, 0, 1, 1, 1]


def test_kmeans_small_instances_reach_contiguous_optimum():
    rng = np.random.default_rng(42)
    for trial in range(40):
        size = int(rng.integers(3, 11))
        k = int(rng.integers(2, min(3, size - 1) + 1))
        values = rng.normal(size=size) * float(rng.uniform(0.5, 20))
        if np.unique(values).size <= k:
            continue
        centers, _ = kmeans_fit(values, KMeansConfig(clusters=k))
        got = inertia(values, centers)
        assert got <= brute_force_inertia(values, k) + 1e-9, f"trial {trial}"


def test_exact_solver_beats_greedy_trap():
    # quantile-initialized Lloyd stalls in a local minimum on this shape
    values = np.sort(np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 10.0]))
    centers = _exact_contiguous(values, 2)
    assert inertia(values, centers) == pytest.approx(brute_force_inertia(values, 2))


def test_lloyd_inertia_trace_never_increases():
    rng = np.random.default_rng(3)
    values = np.sort(rng.normal(size=400))
    _, history = _lloyd(values, 8, max_iterations=30, rel_tolerance=0.0)
    assert len(history) >= 2
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


def test_lloyd_recovers_from_duplicate_quantile_init():
    # 90 duplicates force repeated init centers, exercising the reseed path
    values = np.sort(np.concatenate([np.zeros(90), np.arange(1.0, 11.0)]))
    centers, _ = _lloyd(values, 6, max_iterations=25, rel_tolerance=1e-9)
    assert centers.size == 6
    assert np.all(np.diff(centers) > 0)


def test_kmeans_deterministic():
    rng = np.random.default_rng(9)
    values = rng.normal(size=300)
    cfg = KMeansConfig(clusters=16)
    first = kmeans_fit(values, cfg)
    second = kmeans_fit(values, cfg)
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


@given(finite_values)
def test_snap_is_idempotent(values):
    codebook = np.array([-100.0, -1.0, 0.0, 2.5, 1e5])
    once = snap(values, codebook)
    assert np.array_equal(snap(once, codebook), once)


@given(finite_values)
def test_decompress_compress_equals_snap(values):
    codebook = np.array([-100.0, -1.0, 0.0, 2.5, 1e5])
    idx = compress(values, codebook)
    assert idx.min() >= 0 and idx.max() < codebook.size
    assert np.array_equal(decompress(idx, codebook), snap(values, codebook))


@given(finite_values, st.integers(1, 12))
@settings(max_examples=40)
def test_kmeans_centers_sorted_and_indices_valid(values, k):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ShrunkCodebookWarning)
        centers, idx = kmeans_fit(values, KMeansConfig(clusters=k))
    assert centers.size <= k
    assert np.all(np.diff(centers) > 0)
    assert idx.shape == values.shape
    assert idx.min() >= 0 and idx.max() < centers.size


@given(finite_values, st.integers(1, 12))
@settings(max_examples=40)
def test_kmeans_never_loses_to_trivial_codebooks(values, k):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ShrunkCodebookWarning)
        centers, _ = kmeans_fit(values, KMeansConfig(clusters=k))
    fitted = inertia(values, centers)
    assert fitted <= inertia(values, np.array([float(np.mean(values))])) + 1e-9
