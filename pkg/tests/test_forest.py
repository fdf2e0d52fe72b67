import numpy as np
import pytest

from ucts import ForestConfig, GrowthParams, TwoDModel, predict_mu, sample_2d, select_treatment, train
from ucts.forest import tree_rng


@pytest.fixture(scope="module")
def data():
    return sample_2d(300, 0)


@pytest.mark.parametrize("bad", [dict(ntree=0), dict(rho=1.0), dict(rho=0.0), dict(seed=-1)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ForestConfig(**bad)


def test_forest_averages_its_trees(data):
    forest = train(data, ForestConfig(ntree=7, growth=GrowthParams(min_split=20), seed=2))
    X = TwoDModel().sample_features(50, np.random.default_rng(1))
    manual = sum(t.predict(X) for t in forest.trees) / 7
    np.testing.assert_allclose(forest.predict_mu(X), manual, rtol=0, atol=1e-12)
    assert forest.predict_mu(X).shape == (50, 2)


def test_trees_use_distinct_streams(data):
    forest = train(data, ForestConfig(ntree=6, growth=GrowthParams(min_split=20), seed=2))
    keys = {t.structure_key() for t in forest.trees}
    assert len(keys) > 1
    assert tree_rng(2, 0).random() != tree_rng(2, 1).random()


def test_adding_trees_keeps_the_existing_ones(data):
    small = train(data, ForestConfig(ntree=3, growth=GrowthParams(min_split=20), seed=9))
    big = train(data, ForestConfig(ntree=5, growth=GrowthParams(min_split=20), seed=9))
    assert [t.structure_key() for t in small.trees] == [t.structure_key() for t in big.trees[:3]]


def test_selection_breaks_ties_toward_smallest_id(data):
    forest = train(data, ForestConfig(ntree=2, growth=GrowthParams(min_split=20)))
    for tree in forest.trees:
        for node in tree.nodes:
            node.honest_estimates = np.array([1.0, 1.0])
    assert set(forest.select_treatment(data.features).tolist()) == {1}


def test_single_point_helpers(data):
    forest = train(data, ForestConfig(ntree=4, growth=GrowthParams(min_split=20)))
    x = data.features[0]
    assert predict_mu(forest, x).shape == (2,)
    assert select_treatment(forest, x) in (1, 2)
    assert predict_mu(forest, data.features[:3]).shape == (3, 2)
    assert forest(data.features[:3]).tolist() == select_treatment(forest, data.features[:3]).tolist()


def test_more_data_helps_on_average():
    model = TwoDModel()
    from ucts import oracle_policy_value
    cfg = ForestConfig(ntree=30, growth=GrowthParams(min_split=40))
    small = train(sample_2d(150, 3), cfg)
    large = train(sample_2d(2000, 3), cfg)
    v_small = oracle_policy_value(model, small.select_treatment, 50_000, 0)[0]
    v_large = oracle_policy_value(model, large.select_treatment, 50_000, 0)[0]
    assert v_large > v_small
    assert v_large > 25.5
