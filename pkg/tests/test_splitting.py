import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from ucts import Dataset, FeatureSchema, GrowthParams
from ucts.splitting import (CategoricalSplitError, NodeStats, SplitCandidate, _midpoint, best_split,
                            enumerate_candidates, estimate_child_response, min_side_count, score_split)


@st.composite
def node_data(draw, max_k=3, categorical=None):
    K = draw(st.integers(1, max_k))
    n = draw(st.integers(max(K, 4), 30))
    is_cat = draw(st.booleans()) if categorical is None else categorical
    if is_cat:
        c = draw(st.integers(2, 5))
        col = draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n))
        schema = FeatureSchema.from_pairs([("g", [f"l{i}" for i in range(c)])])
    else:
        col = draw(st.lists(st.integers(-5, 5), min_size=n, max_size=n))
        schema = FeatureSchema.from_pairs([("x", "numeric")])
    rest = draw(st.lists(st.integers(1, K), min_size=n - K, max_size=n - K))
    t = list(range(1, K + 1)) + rest
    y = draw(st.lists(st.integers(-20, 20), min_size=n, max_size=n))
    X = np.array(col, dtype=np.float64).reshape(-1, 1)
    return Dataset(schema, X, np.array(t), np.array(y, dtype=np.float64), np.full(K, 1.0 / K))


params_st = st.builds(GrowthParams, min_split=st.integers(1, 4), n_reg=st.sampled_from([0.0, 1.0, 2.5]),
                      alpha=st.floats(0.05, 0.45))


def _root(data):
    return NodeStats.root(data, np.arange(data.n))


def test_min_side_count_is_exact():
    # 0.1 * 30 is 3.0000000000000004 in binary floating point
    assert min_side_count(0.1, 30) == 3
    assert min_side_count(0.1, 31) == 4
    assert min_side_count(0.3, 10) == 3
    assert min_side_count(0.01, 5) == 1


def test_child_estimate_shrinkage_and_inheritance():
    est = estimate_child_response([4, 1], [10.0, 7.0], [2.0, 3.0], min_split=2, n_reg=1.0)
    np.testing.assert_allclose(est, [(10.0 + 2.0) / 5, 3.0])


@given(node_data(), params_st)
@settings(max_examples=300, deadline=None)
def test_best_split_matches_brute_force(data, params):
    found = best_split(_root(data), (0,), data, params)
    want = oracles.brute_force_best_gain(data.features.tolist(), data.treatments.tolist(),
                                         data.responses.tolist(), data.schema.categorical_mask.tolist(),
                                         (0,), data.K, params.min_split, params.n_reg, params.alpha)
    if want is None:
        assert found is None
    else:
        assert found is not None and abs(found.gain - want) <= 1e-12


@given(node_data(), params_st)
@settings(max_examples=200, deadline=None)
def test_chosen_split_is_alpha_regular(data, params):
    root = _root(data)
    found = best_split(root, (0,), data, params)
    assume(found is not None)
    floor = min_side_count(params.alpha, data.n)
    assert found.left.m >= floor and found.right.m >= floor
    assert found.left.m + found.right.m == data.n
    rescored = score_split(root, found.candidate, data, params.min_split, params.n_reg, params.alpha)
    assert abs(rescored.gain - found.gain) <= 1e-12


@given(node_data(), params_st, st.sampled_from([0.5, 2.0, 4.0]), st.integers(-50, 50))
@settings(max_examples=200, deadline=None)
def test_gain_is_affine_equivariant_in_response(data, params, scale, shift):
    moved = Dataset(data.schema, data.features, data.treatments, data.responses * scale + shift,
                    data.propensities)
    a = best_split(_root(data), (0,), data, params)
    b = best_split(_root(moved), (0,), moved, params)
    assert (a is None) == (b is None)
    if a is not None:
        assert math.isclose(b.gain, scale * a.gain, rel_tol=1e-9, abs_tol=1e-9)


@given(node_data(categorical=False), params_st)
@settings(max_examples=200, deadline=None)
def test_monotone_feature_transform_keeps_partition(data, params):
    warped = Dataset(data.schema, np.exp(data.features / 2.0) * 3.0, data.treatments, data.responses,
                     data.propensities)
    a = best_split(_root(data), (0,), data, params)
    b = best_split(_root(warped), (0,), warped, params)
    assert (a is None) == (b is None)
    if a is not None:
        np.testing.assert_array_equal(a.left.members, b.left.members)
        assert a.gain == b.gain


@given(node_data(max_k=1), st.floats(0.02, 0.45))
@settings(max_examples=200, deadline=None)
def test_single_treatment_never_gains(data, alpha):
    root = _root(data)
    for cand in enumerate_candidates(root, 0, data, alpha):
        assert abs(score_split(root, cand, data, 1, 0.0, alpha).gain) <= 1e-12


def _categorical(levels_present, n_levels, per_level=3, K=2):
    codes = np.repeat(np.array(levels_present, dtype=np.float64), per_level)
    n = codes.size
    t = np.resize(np.arange(1, K + 1), n)
    schema = FeatureSchema.from_pairs([("g", [f"v{i}" for i in range(n_levels)])])
    y = np.arange(n, dtype=np.float64)
    return Dataset(schema, codes.reshape(-1, 1), t, y, np.full(K, 1.0 / K))


@pytest.mark.parametrize("c", [2, 3, 5, 10])
def test_exhaustive_partitions_up_to_ten_levels(c):
    data = _categorical(list(range(c)), 12)
    cands = enumerate_candidates(_root(data), 0, data, 0.01)
    assert len(cands) == 2 ** (c - 1) - 1
    partitions = {frozenset([s.left_levels, frozenset(range(c)) - s.left_levels]) for s in cands}
    assert len(partitions) == len(cands)


def test_partitions_only_count_levels_present():
    data = _categorical([0, 3, 7], 9)
    cands = enumerate_candidates(_root(data), 0, data, 0.01)
    assert len(cands) == 3
    assert all(s.left_levels <= {0.0, 3.0, 7.0} for s in cands)


def test_one_vs_rest_above_ten_levels():
    data = _categorical(list(range(12)), 12)
    cands = enumerate_candidates(_root(data), 0, data, 0.01)
    assert [sorted(s.left_levels) for s in cands] == [[float(i)] for i in range(12)]


def test_wide_categorical_without_regular_split_raises():
    data = _categorical(list(range(30)), 30, per_level=1)
    with pytest.raises(CategoricalSplitError):
        enumerate_candidates(_root(data), 0, data, 0.2)
    # 26 levels with a feasible one-vs-rest split is fine
    data = _categorical(list(range(26)), 26, per_level=2)
    assert enumerate_candidates(_root(data), 0, data, 0.02)


def test_numeric_thresholds_are_midpoints():
    schema = FeatureSchema.from_pairs([("x", "numeric")])
    X = np.array([[1.0], [1.0], [2.0], [4.0], [7.0]])
    data = Dataset(schema, X, np.array([1, 2, 1, 2, 1]), np.zeros(5), np.array([0.5, 0.5]))
    cands = enumerate_candidates(_root(data), 0, data, 0.01)
    assert [s.threshold for s in cands] == [1.5, 3.0, 5.5]
    assert [s.n_left for s in cands] == [2, 3, 4]


def test_midpoint_between_adjacent_floats_stays_left():
    a = 1.0
    b = np.nextafter(a, 2.0)
    m = _midpoint(a, b)
    assert a <= m < b


def test_goes_left_rules():
    num = SplitCandidate(0, threshold=2.5)
    np.testing.assert_array_equal(num.goes_left(np.array([2.5, 2.6, -1.0])), [True, False, True])
    cat = SplitCandidate(0, left_levels=frozenset({0.0, 2.0}))
    np.testing.assert_array_equal(cat.goes_left(np.array([0.0, 1.0, 2.0])), [True, False, True])


def test_ties_go_to_earlier_coordinate():
    schema = FeatureSchema.from_pairs([("a", "numeric"), ("b", "numeric")])
    x = np.arange(8, dtype=np.float64)
    data = Dataset(schema, np.column_stack([x, x]), np.array([1, 2] * 4),
                   np.array([0, 0, 0, 0, 9, 9, 9, 9.0]), np.array([0.5, 0.5]))
    found = best_split(_root(data), (0, 1), data, GrowthParams(min_split=1, alpha=0.1))
    assert found.candidate.coordinate == 0
    found = best_split(_root(data), (1, 0), data, GrowthParams(min_split=1, alpha=0.1))
    assert found.candidate.coordinate == 1


def test_root_needs_every_treatment():
    schema = FeatureSchema.from_pairs([("x", "numeric")])
    data = Dataset(schema, np.zeros((3, 1)), np.array([1, 1, 2]), np.zeros(3), np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="lacks"):
        NodeStats.root(data, np.array([0, 1]))
