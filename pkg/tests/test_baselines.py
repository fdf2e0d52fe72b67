import numpy as np
import pytest

from ucts import (CTSForest, FeatureSchema, ForestConfig, GrowthParams, RegressionForestParams,
                  TwoDModel, oracle_policy_value, sample_2d, train_cts, train_sma)
from ucts.baselines import grow_regression_tree, regression_split_sse, train_regression_forest


def test_cts_leaves_use_approximation_estimates():
    data = sample_2d(200, 1)
    forest = train_cts(data, ForestConfig(ntree=3, growth=GrowthParams(min_split=20)))
    assert isinstance(forest, CTSForest) and forest.method == "cts"
    for tree in forest.trees:
        for node in tree.nodes:
            np.testing.assert_array_equal(node.honest_estimates, node.approx_estimates)


def test_regression_splits_reduce_squared_error():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (300, 3))
    y = np.where(X[:, 1] > 0.5, 3.0, 0.0) + rng.normal(0, 0.1, 300)
    schema = FeatureSchema.from_pairs([(f"x{j}", "numeric") for j in range(3)])
    tree = grow_regression_tree(X, y, schema, mtry=3, min_leaf=5, rng=rng)
    assert tree.nodes[0].split.coordinate == 1
    assert abs(tree.nodes[0].split.threshold - 0.5) < 0.05
    for parent, children in regression_split_sse(tree, X, y):
        assert children < parent
    for node in tree.nodes:
        if node.is_leaf:
            assert node.approx_counts[0] >= 5


def test_regression_forest_recovers_a_step():
    rng = np.random.default_rng(1)
    schema = FeatureSchema.from_pairs([("x", "numeric"), ("g", ["a", "b", "c"])])
    X = np.column_stack([rng.uniform(0, 1, 600), rng.integers(0, 3, 600)])
    y = np.where(X[:, 1] == 2, 5.0, 0.0) + X[:, 0]
    forest = train_regression_forest(X, y, schema, RegressionForestParams(ntree=20, mtry=2, seed=4))
    pred = forest.predict(np.array([[0.5, 2.0], [0.5, 0.0]]))
    assert pred[0] == pytest.approx(5.5, abs=0.3)
    assert pred[1] == pytest.approx(0.5, abs=0.3)


def test_sma_policy_is_reasonable_and_deterministic():
    data = sample_2d(800, 2)
    params = RegressionForestParams(ntree=30, seed=5)
    a, b = train_sma(data, params), train_sma(data, params)
    X = TwoDModel().sample_features(500, np.random.default_rng(3))
    np.testing.assert_array_equal(a.predict_mu(X), b.predict_mu(X))
    value = oracle_policy_value(TwoDModel(), a.select_treatment, 50_000, 0)[0]
    assert value > 25.3


def test_sma_parameter_checks():
    with pytest.raises(ValueError):
        RegressionForestParams(ntree=0)
    with pytest.raises(ValueError):
        RegressionForestParams(min_leaf=0)
    data = sample_2d(3, 0)
    with pytest.raises(ValueError):
        train_sma(data, RegressionForestParams(min_leaf=5))
