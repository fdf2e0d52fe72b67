"""Honest uplift forest: training, averaged prediction and treatment selection."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .data import Dataset, FeatureSchema, stratified_split
from .tree import GrowthParams, UpliftTree, grow_tree, honest_estimate, with_plain_estimates


@dataclass(frozen=True)
class ForestConfig:
    ntree: int = 100
    rho: float = 0.5
    growth: GrowthParams = field(default_factory=GrowthParams)
    seed: int = 0

    def __post_init__(self):
        if int(self.ntree) != self.ntree or self.ntree < 1:
            raise ValueError(f"ntree must be a positive integer, got {self.ntree}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``; does not depend on scheduling."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)))


class TreeEnsemble:
    """Shared prediction surface for the uplift forests."""

    method = "ucts"
    trees: List[UpliftTree]

    def __init__(self, config: ForestConfig, K: int, schema: FeatureSchema, trees,
                 treatment_labels=None):
        self.config = config
        self.K = K
        self.schema = schema
        self.trees = list(trees)
        self.treatment_labels = tuple(treatment_labels or (str(k) for k in range(1, K + 1)))

    def predict_mu(self, X) -> np.ndarray:
        X = self.schema.check_features(X)
        X = np.ascontiguousarray(X)
        acc = np.zeros((X.shape[0], self.K))
        for tree in self.trees:
            tree.accumulate(X, acc)
        return acc / len(self.trees)

    def select_treatment(self, X) -> np.ndarray:
        """Treatment id (1-based) with the largest predicted response; ties go to the smallest id."""
        return np.argmax(self.predict_mu(X), axis=1) + 1

    __call__ = select_treatment


class UpliftForest(TreeEnsemble):
    method = "ucts"


def _fit_tree(data: Dataset, config: ForestConfig, index: int, honest: bool = True) -> UpliftTree:
    rng = tree_rng(config.seed, index)
    split = stratified_split(data, config.rho, rng)
    tree = grow_tree(data, split.approximation, config.growth, rng)
    if honest:
        return honest_estimate(tree, data, split.estimation)
    return with_plain_estimates(tree)


def _fit_chunk(data, config, indices, honest):
    return [_fit_tree(data, config, b, honest) for b in indices]


def resolve_jobs(n_jobs) -> int:
    if n_jobs is None or n_jobs <= 0:
        return os.cpu_count() or 1
    return int(n_jobs)


def fit_trees(data: Dataset, config: ForestConfig, honest: bool, n_jobs=1) -> List[UpliftTree]:
    config.growth.resolve_mtry(data.d)
    n_jobs = min(resolve_jobs(n_jobs), config.ntree)
    if n_jobs == 1:
        return _fit_chunk(data, config, range(config.ntree), honest)
    chunks = [list(range(config.ntree))[w::n_jobs] for w in range(n_jobs)]
    trees = [None] * config.ntree
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        futures = [pool.submit(_fit_chunk, data, config, chunk, honest) for chunk in chunks]
        for chunk, fut in zip(chunks, futures):
            for b, tree in zip(chunk, fut.result()):
                trees[b] = tree
    return trees


def train(data: Dataset, config: ForestConfig, n_jobs=1) -> UpliftForest:
    """Fit ``config.ntree`` honest trees, each on its own stratified split."""
    trees = fit_trees(data, config, honest=True, n_jobs=n_jobs)
    return UpliftForest(config, data.K, data.schema, trees, data.treatment_labels)


def predict_mu(forest, x) -> np.ndarray:
    """Predicted response per treatment; ``(K,)`` for one point, ``(n, K)`` for a matrix."""
    x = np.asarray(x, dtype=np.float64)
    mu = forest.predict_mu(x)
    return mu[0] if x.ndim == 1 else mu


def select_treatment(forest, x):
    x = np.asarray(x, dtype=np.float64)
    chosen = forest.select_treatment(x)
    return int(chosen[0]) if x.ndim == 1 else chosen
