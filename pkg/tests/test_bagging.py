import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agglearn.bagging import (
    AggregateDataset,
    BagAssignment,
    aggregate_responses,
    apply_E,
    apply_Lambda,
    apply_StS,
    assign_bags,
    bag_means,
)
from agglearn.errors import DivisibilityError, DomainError, LengthMismatch


@st.composite
def bags_and_vector(draw):
    k = draw(st.integers(1, 6))
    m = draw(st.integers(1, 8))
    seed = draw(st.integers(0, 2**32 - 1))
    a = assign_bags(m * k, k, seed)
    v = np.random.default_rng(seed).normal(size=m * k)
    return a, v


def test_assign_bags_partitions_indices():
    a = assign_bags(6, 2, seed=3)
    assert a.m == 3
    assert a.bags.shape == (3, 2)
    assert sorted(a.bags.ravel().tolist()) == list(range(6))
    for b, members in enumerate(a.bags):
        assert all(a.bag_of[i] == b for i in members)


def test_single_bag():
    a = assign_bags(4, 4, seed=0)
    assert a.bags.tolist() == [[0, 1, 2, 3]]


def test_indivisible_sizes_rejected():
    with pytest.raises(DivisibilityError):
        assign_bags(5, 2, seed=0)


def test_same_seed_same_partition():
    assert np.array_equal(assign_bags(40, 4, 7).bags, assign_bags(40, 4, 7).bags)
    assert not np.array_equal(assign_bags(40, 4, 7).bags, assign_bags(40, 4, 8).bags)


def test_co_bag_frequency_matches_uniform_partition():
    n, k, draws = 12, 3, 10_000
    hits = np.zeros((n, n))
    for s in range(draws):
        a = assign_bags(n, k, s)
        same = a.bag_of[:, None] == a.bag_of[None, :]
        hits += same
    p = (k - 1) / (n - 1)
    se = np.sqrt(p * (1 - p) / draws)
    assert abs(hits[0, 1] / draws - p) <= 3 * se
    # across all 66 distinct pairs use a Bonferroni-style band (two-sided 1e-4 per pair)
    freq = hits[np.triu_indices(n, 1)] / draws
    assert np.all(np.abs(freq - p) <= 4.0 * se), np.abs(freq - p).max() / se


def test_aggregate_examples():
    one = BagAssignment.from_bags([[0, 1]])
    assert aggregate_responses([1.0, 3.0], one).tolist() == [2.0]
    a = assign_bags(12, 3, 0)
    assert np.all(aggregate_responses(np.full(12, 4.25), a) == 4.25)
    singles = assign_bags(5, 1, 0)
    y = np.arange(5.0)
    assert np.array_equal(aggregate_responses(y, singles), y[singles.bags[:, 0]])


def test_aggregate_length_mismatch():
    with pytest.raises(LengthMismatch):
        aggregate_responses(np.zeros(3), assign_bags(4, 2, 0))


def test_sts_example():
    a = BagAssignment.from_bags([[0, 1], [2, 3]])
    assert apply_StS(np.array([1.0, 3.0, 5.0, 7.0]), a).tolist() == [2.0, 2.0, 6.0, 6.0]
    v = np.random.default_rng(0).normal(size=7)
    assert np.array_equal(apply_StS(v, assign_bags(7, 1, 0)), v)


def test_E_examples():
    a = BagAssignment.from_bags([[0, 1]])
    v = np.array([1.0, 3.0])
    assert np.allclose(apply_E(v, a, 0.5), [1.5, 2.5])
    assert np.array_equal(apply_E(v, a, 1.0), v)
    assert np.array_equal(apply_E(v, a, 0.0), apply_StS(v, a))
    with pytest.raises(DomainError):
        apply_E(v, a, 1.5)


@settings(max_examples=60, deadline=None)
@given(bags_and_vector())
def test_projection_properties(case):
    a, v = case
    p = apply_StS(v, a)
    assert np.max(np.abs(apply_StS(p, a) - p)) <= 1e-12
    assert abs(p.sum() - v.sum()) <= 1e-10 * max(1.0, np.abs(v).sum())
    assert abs(np.dot(v - p, p)) <= 1e-10
    assert np.max(np.abs(apply_Lambda(p, a, 0.7))) <= 1e-12
    rho = 0.3
    assert np.allclose(apply_Lambda(v, a, rho), rho * (v - p))


def test_matrix_inputs_are_handled_columnwise():
    a = assign_bags(6, 3, 1)
    M = np.random.default_rng(1).normal(size=(6, 4))
    means = bag_means(M, a)
    assert means.shape == (2, 4)
    for j in range(4):
        assert np.allclose(means[:, j], bag_means(M[:, j], a))


def test_json_round_trip():
    a = assign_bags(8, 2, 5)
    obj = json.loads(a.to_json())
    assert set(obj) == {"n", "k", "bags"}
    assert sorted(i for b in obj["bags"] for i in b) == list(range(8))
    b = BagAssignment.from_json(a.to_json())
    assert np.array_equal(a.bags, b.bags) and (b.n, b.k) == (8, 2)


@pytest.mark.parametrize("bags", [[[0, 1], [1, 2]], [[0, 1], [2]], [[0, 2], [3, 4]]])
def test_from_bags_rejects_non_partitions(bags):
    with pytest.raises((DomainError, ValueError)):
        BagAssignment.from_bags(bags)


def test_aggregate_dataset_shapes():
    a = assign_bags(6, 2, 0)
    with pytest.raises(LengthMismatch):
        AggregateDataset(np.zeros((5, 2)), np.zeros(3), a)
    with pytest.raises(LengthMismatch):
        AggregateDataset(np.zeros((6, 2)), np.zeros(2), a)
    agg = AggregateDataset.from_responses(np.zeros((6, 2)), np.arange(6.0), a)
    assert np.allclose(agg.bag_means, aggregate_responses(np.arange(6.0), a))
