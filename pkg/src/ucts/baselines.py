"""Reference methods: CTS (same-sample estimates) and the separate model approach."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ._backend import kernels
from .data import Dataset, FeatureSchema
from .forest import ForestConfig, TreeEnsemble, fit_trees, tree_rng
from .splitting import SplitCandidate, _midpoint
from .tree import LEAF_MIN_SPLIT, LEAF_NO_SPLIT, TreeNode, UpliftTree


class CTSForest(TreeEnsemble):
    method = "cts"


def train_cts(data: Dataset, config: ForestConfig, n_jobs=1) -> CTSForest:
    """Trees grown and estimated on one stratified subsample of fraction ``rho``.

    Same growth path as the honest forest; the left-out part is never used.
    """
    trees = fit_trees(data, config, honest=False, n_jobs=n_jobs)
    return CTSForest(config, data.K, data.schema, trees, data.treatment_labels)


@dataclass(frozen=True)
class RegressionForestParams:
    ntree: int = 100
    mtry: Optional[int] = None  # None: max(1, d // 3)
    min_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.ntree < 1:
            raise ValueError(f"ntree must be >= 1, got {self.ntree}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError(f"mtry must be >= 1, got {self.mtry}")

    def resolve_mtry(self, d: int) -> int:
        mtry = max(1, d // 3) if self.mtry is None else int(self.mtry)
        if mtry > d:
            raise ValueError(f"mtry must lie in [1, {d}], got {mtry}")
        return mtry


def _sse(y: np.ndarray) -> float:
    return float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0


def _best_regression_split(X, y, idx, coords, schema: FeatureSchema, min_leaf):
    best = None
    for j in coords:
        values = X[idx, j]
        if schema.columns[j].is_categorical:
            levels = np.unique(values)
            means = np.array([y[idx][values == lev].mean() for lev in levels])
            rank_order = np.argsort(means, kind="stable")
            rank_of = np.empty(levels.size)
            rank_of[rank_order] = np.arange(levels.size)
            keys = rank_of[np.searchsorted(levels, values)]
        else:
            keys = values
        order = np.argsort(keys, kind="stable")
        xs = np.ascontiguousarray(keys[order])
        ys = np.ascontiguousarray(y[idx][order])
        pos, imp = kernels.sse_scan(xs, ys, int(min_leaf))
        if pos < 0 or (best is not None and imp <= best[1]):
            continue
        if schema.columns[j].is_categorical:
            left = frozenset(float(v) for v in levels[rank_order[: int(xs[pos]) + 1]])
            cand = SplitCandidate(j, None, left)
        else:
            cand = SplitCandidate(j, _midpoint(float(xs[pos]), float(xs[pos + 1])))
        best = (cand, imp)
    return best


def grow_regression_tree(X, y, schema: FeatureSchema, mtry: int, min_leaf: int,
                         rng: np.random.Generator) -> UpliftTree:
    """CART regression tree on ``(X, y)`` with squared-error splits.

    Uses the uplift-tree node layout with a single "treatment"; a node is split
    only if that lowers the within-node sum of squared deviations.
    """
    tree = UpliftTree(1, schema)
    root_idx = np.arange(y.size)

    def make(nid, depth, idx):
        mean = np.array([y[idx].mean()])
        return TreeNode(nid, depth, np.array([idx.size]), mean, mean.copy())

    tree.nodes.append(make(0, 0, root_idx))
    queue = deque([(0, root_idx)])
    scale = float(np.sum(y * y)) + 1.0
    while queue:
        nid, idx = queue.popleft()
        node = tree.nodes[nid]
        if idx.size < 2 * min_leaf:
            node.leaf_reason = LEAF_MIN_SPLIT
            continue
        coords = tuple(sorted(int(j) for j in rng.choice(schema.d, size=mtry, replace=False)))
        node.drawn = coords
        found = _best_regression_split(X, y, idx, coords, schema, min_leaf)
        if found is None or found[1] <= 1e-12 * scale:
            node.leaf_reason = LEAF_NO_SPLIT
            continue
        node.split, node.gain = found
        go_left = node.split.goes_left(X[idx, node.split.coordinate])
        for side, child_idx in (("left", idx[go_left]), ("right", idx[~go_left])):
            cid = len(tree.nodes)
            tree.nodes.append(make(cid, node.depth + 1, child_idx))
            setattr(node, side, cid)
            queue.append((cid, child_idx))
    return tree


class RegressionForest:
    def __init__(self, trees: List[UpliftTree]):
        self.trees = list(trees)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        acc = np.zeros((X.shape[0], 1))
        for tree in self.trees:
            tree.accumulate(X, acc)
        return acc[:, 0] / len(self.trees)


def train_regression_forest(X, y, schema: FeatureSchema, params: RegressionForestParams,
                            stream: int = 0) -> RegressionForest:
    mtry = params.resolve_mtry(schema.d)
    trees = []
    for b in range(params.ntree):
        rng = tree_rng(params.seed, stream * 1_000_003 + b)
        if params.bootstrap:
            rows = rng.integers(0, y.size, size=y.size)
        else:
            rows = np.arange(y.size)
        trees.append(grow_regression_tree(X[rows], y[rows], schema, mtry, params.min_leaf, rng))
    return RegressionForest(trees)


class SeparateModelForest:
    """One regression forest per treatment; the policy picks the arm with the largest prediction."""

    method = "sma"

    def __init__(self, params: RegressionForestParams, schema: FeatureSchema, forests,
                 treatment_labels=None):
        self.params = params
        self.schema = schema
        self.forests = list(forests)
        self.K = len(self.forests)
        self.treatment_labels = tuple(treatment_labels or (str(k) for k in range(1, self.K + 1)))

    def predict_mu(self, X) -> np.ndarray:
        X = self.schema.check_features(X)
        return np.column_stack([f.predict(X) for f in self.forests]) if X.shape[0] else np.zeros((0, self.K))

    def select_treatment(self, X) -> np.ndarray:
        return np.argmax(self.predict_mu(X), axis=1) + 1

    __call__ = select_treatment


def train_sma(data: Dataset, params: RegressionForestParams = RegressionForestParams()) -> SeparateModelForest:
    """Fit a regression forest of response on features separately for every treatment."""
    forests = []
    for k in range(1, data.K + 1):
        rows = np.flatnonzero(data.treatments == k)
        if rows.size == 0:
            raise ValueError(f"treatment {k} has no samples")
        if rows.size < params.min_leaf:
            raise ValueError(f"treatment {k} has {rows.size} samples, fewer than min_leaf={params.min_leaf}")
        forests.append(train_regression_forest(data.features[rows], data.responses[rows],
                                               data.schema, params, stream=k))
    return SeparateModelForest(params, data.schema, forests, data.treatment_labels)


def regression_split_sse(tree: UpliftTree, X, y) -> list:
    """``(parent_sse, children_sse)`` for every split of ``tree`` on its training data."""
    idx_of = {0: np.arange(y.size)}
    out = []
    for node in tree.nodes:
        if node.is_leaf:
            continue
        idx = idx_of[node.id]
        go_left = node.split.goes_left(X[idx, node.split.coordinate])
        idx_of[node.left], idx_of[node.right] = idx[go_left], idx[~go_left]
        out.append((_sse(y[idx]), _sse(y[idx[go_left]]) + _sse(y[idx[~go_left]])))
    return out

