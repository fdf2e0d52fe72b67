from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucts import DataError, Dataset, FeatureSchema, stratified_split, validate_dataset
from ucts.data import approximation_counts, encode_features, parse_csv

SCHEMA = FeatureSchema.from_pairs([("age", "numeric"), ("tier", ["gold", "silver"])])
CSV = """# exported log
age,tier,treatment,response
31,gold,1,2.5
40,silver,2,0.0
22,silver,1,1.0
58,gold,2,3.5
"""


def test_schema_text_round_trip():
    text = SCHEMA.to_text()
    assert text == "age=numeric\ntier=categorical:gold,silver\n"
    assert FeatureSchema.from_text("# comment\n" + text) == SCHEMA


@pytest.mark.parametrize("bad", ["age", "age=float", "tier=categorical:a,,b", "tier=categorical:a,a"])
def test_schema_text_rejects(bad):
    with pytest.raises(DataError):
        FeatureSchema.from_text(bad)


def test_schema_rejects_reserved_and_duplicate_names():
    with pytest.raises(ValueError):
        FeatureSchema.from_pairs([("treatment", "numeric")])
    with pytest.raises(ValueError):
        FeatureSchema.from_pairs([("a", "numeric"), ("a", "numeric")])


def test_parse_and_validate_empirical_propensities():
    raw = parse_csv(CSV)
    assert raw.comments == ["# exported log"]
    data = validate_dataset(raw, SCHEMA)
    assert data.n == 4 and data.K == 2
    np.testing.assert_array_equal(data.features[:, 1], [0, 1, 1, 0])
    np.testing.assert_array_equal(data.treatments, [1, 2, 1, 2])
    np.testing.assert_array_equal(data.propensities, [0.5, 0.5])
    assert not data.features.flags.writeable


def test_explicit_propensities_and_float_labels():
    raw = parse_csv(CSV.replace(",1,", ",1.0,"))
    data = validate_dataset(raw, SCHEMA, [0.25, 0.75])
    np.testing.assert_array_equal(data.treatments, [1, 2, 1, 2])
    np.testing.assert_array_equal(data.propensities, [0.25, 0.75])
    data = validate_dataset(parse_csv(CSV), SCHEMA, {"2": 0.6, "1": 0.4})
    assert data.treatment_labels == ("1", "2")


@pytest.mark.parametrize("mutate, message", [
    (lambda s: s.replace("gold,1", "bronze,1"), "unknown categorical level"),
    (lambda s: s.replace("31,", "nan,"), "non-finite"),
    (lambda s: s.replace("2.5", "abc"), "not a number"),
    (lambda s: s.replace("treatment,", "arm,"), "treatment"),
    (lambda s: s.replace("22,silver,1,1.0", "22,silver,1"), "expected 4 cells"),
])
def test_validation_errors(mutate, message):
    with pytest.raises(DataError, match=message):
        validate_dataset(parse_csv(mutate(CSV)), SCHEMA)


def test_propensity_problems():
    raw = parse_csv(CSV)
    with pytest.raises(ValueError):
        validate_dataset(raw, SCHEMA, [0.5, 0.6])
    with pytest.raises(DataError, match="unknown treatment"):
        validate_dataset(parse_csv(CSV.replace("58,gold,2", "58,gold,3")), SCHEMA, [0.5, 0.5])


def test_empty_inputs():
    with pytest.raises(DataError):
        parse_csv("")
    with pytest.raises(DataError):
        validate_dataset(parse_csv("age,tier,treatment,response\n"), SCHEMA)
    assert encode_features(parse_csv("age,tier\n"), SCHEMA).shape == (0, 2)


def _round_half_up(rho, n):
    return int((Decimal(repr(rho)) * n).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@given(st.lists(st.integers(2, 60), min_size=1, max_size=4), st.floats(0.01, 0.99))
@settings(max_examples=200, deadline=None)
def test_approximation_counts_round_half_up(counts, rho):
    got = approximation_counts(np.array(counts), rho)
    for n_t, a in zip(counts, got):
        assert a == min(max(_round_half_up(rho, n_t), 1), n_t - 1)


def test_half_rounds_up():
    assert approximation_counts(np.array([5, 7, 3]), 0.5).tolist() == [3, 4, 2]


def _toy(n_per, K=3, seed=0):
    rng = np.random.default_rng(seed)
    t = np.repeat(np.arange(1, K + 1), n_per)
    X = rng.normal(size=(t.size, 1))
    return Dataset(FeatureSchema.from_pairs([("x", "numeric")]), X, t, rng.normal(size=t.size),
                   np.full(K, 1 / K))


def test_stratified_split_is_a_partition_per_treatment():
    data = _toy(11)
    split = stratified_split(data, 0.5, 3)
    both = np.concatenate([split.approximation, split.estimation])
    assert sorted(both.tolist()) == list(range(data.n))
    for k in (1, 2, 3):
        assert (data.treatments[split.approximation] == k).sum() == 6
    again = stratified_split(data, 0.5, 3)
    np.testing.assert_array_equal(split.approximation, again.approximation)


def test_stratified_split_needs_two_per_treatment():
    with pytest.raises(DataError):
        stratified_split(_toy(1), 0.5, 0)
