"""Single honest uplift tree: growth on the approximation set, estimation on the rest."""
from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from ._backend import kernels
from .data import Dataset, FeatureSchema
from .splitting import NodeStats, SplitCandidate, best_split, enumerate_candidates, min_side_count

LEAF_MIN_SPLIT = "min_split"
LEAF_NO_SPLIT = "no_regular_split"


@dataclass(frozen=True)
class GrowthParams:
    """Tree-growing knobs.

    ``mtry=None`` means ``ceil(d / 2)`` coordinates per node.
    """

    min_split: int = 25
    n_reg: float = 0.0
    alpha: float = 0.1
    mtry: Optional[int] = None
    pi: float = 0.05

    def __post_init__(self):
        if int(self.min_split) != self.min_split or self.min_split < 1:
            raise ValueError(f"min_split must be a positive integer, got {self.min_split}")
        if not (self.n_reg >= 0 and math.isfinite(self.n_reg)):
            raise ValueError(f"n_reg must be finite and >= 0, got {self.n_reg}")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if not 0.0 < self.pi < 1.0:
            raise ValueError(f"pi must lie in (0, 1), got {self.pi}")
        if self.mtry is not None and (int(self.mtry) != self.mtry or self.mtry < 1):
            raise ValueError(f"mtry must be a positive integer, got {self.mtry}")

    def resolve_mtry(self, d: int) -> int:
        mtry = math.ceil(d / 2) if self.mtry is None else int(self.mtry)
        if not 1 <= mtry <= d:
            raise ValueError(f"mtry must lie in [1, {d}], got {mtry}")
        return mtry


@dataclass
class TreeNode:
    id: int
    depth: int
    approx_counts: np.ndarray
    approx_estimates: np.ndarray
    honest_estimates: Optional[np.ndarray] = None
    split: Optional[SplitCandidate] = None
    left: int = -1
    right: int = -1
    gain: float = 0.0
    leaf_reason: Optional[str] = None
    drawn: tuple = ()

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass
class UpliftTree:
    """Nodes in breadth-first order; node 0 is the root, parents precede children."""

    K: int
    schema: FeatureSchema
    nodes: List[TreeNode] = field(default_factory=list)
    _flat: Optional[tuple] = field(default=None, init=False, repr=False, compare=False)

    @property
    def n_leaves(self) -> int:
        return sum(node.is_leaf for node in self.nodes)

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes)

    def flat(self):
        """Node arrays consumed by the routing kernel (cached)."""
        if self._flat is None or self._flat[0].shape[0] != len(self.nodes):
            n = len(self.nodes)
            width = max([c.cardinality for c in self.schema.columns if c.is_categorical] + [1])
            feature = np.full(n, -1, dtype=np.int64)
            threshold = np.zeros(n)
            left = np.full(n, -1, dtype=np.int64)
            right = np.full(n, -1, dtype=np.int64)
            is_cat = np.zeros(n, dtype=np.uint8)
            cat_left = np.zeros((n, width), dtype=np.uint8)
            for node in self.nodes:
                s = node.split
                if s is None:
                    continue
                feature[node.id], left[node.id], right[node.id] = s.coordinate, node.left, node.right
                if s.is_categorical:
                    is_cat[node.id] = 1
                    cat_left[node.id, [int(v) for v in s.left_levels]] = 1
                else:
                    threshold[node.id] = s.threshold
            self._flat = (feature, threshold, left, right, is_cat, cat_left)
        return self._flat

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id of every row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.apply_tree(X, *self.flat())

    def leaf_table(self, honest: bool = True) -> np.ndarray:
        attr = "honest_estimates" if honest else "approx_estimates"
        table = np.full((len(self.nodes), self.K), np.nan)
        for node in self.nodes:
            est = getattr(node, attr)
            if est is not None:
                table[node.id] = est
        return table

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Honest estimates of the leaf each row falls into, shape ``(n, K)``."""
        if self.nodes[0].honest_estimates is None:
            raise ValueError("tree has no honest estimates; run honest_estimate first")
        return self.leaf_table()[self.apply(X)]

    def accumulate(self, X: np.ndarray, out: np.ndarray) -> None:
        """``out += self.predict(X)`` without the intermediate arrays."""
        if self.nodes[0].honest_estimates is None:
            raise ValueError("tree has no honest estimates; run honest_estimate first")
        X = np.ascontiguousarray(X, dtype=np.float64)
        kernels.accumulate_tree(X, *self.flat(), np.ascontiguousarray(self.leaf_table()), out)

    def structure_key(self) -> str:
        """Digest of the split structure only (no estimates)."""
        h = hashlib.sha256()
        for node in self.nodes:
            s = node.split
            rule = None if s is None else (s.coordinate, s.threshold,
                                           None if s.left_levels is None else sorted(s.left_levels))
            h.update(repr((node.id, node.left, node.right, rule)).encode())
        return h.hexdigest()


def draw_coordinates(rng: np.random.Generator, d: int, mtry: int, pi: float):
    """Coordinates to search at one node.

    With probability ``pi`` a single uniformly random coordinate, otherwise
    ``mtry`` distinct ones. Returns ``(sorted coordinates, forced_single)``.
    """
    if rng.random() < pi:
        return (int(rng.integers(d)),), True
    picked = rng.choice(d, size=mtry, replace=False)
    return tuple(sorted(int(j) for j in picked)), False


def grow_tree(data: Dataset, approx_indices, params: GrowthParams, rng: np.random.Generator) -> UpliftTree:
    """Grow the partition on the approximation set.

    A node is terminal when every treatment has fewer than ``min_split``
    samples in it, or when the drawn coordinates admit no alpha-regular split.
    """
    mtry = params.resolve_mtry(data.d)
    root = NodeStats.root(data, approx_indices)
    tree = UpliftTree(data.K, data.schema)
    tree.nodes.append(TreeNode(0, 0, root.counts, root.estimates))
    queue = deque([(0, root)])
    while queue:
        nid, stats = queue.popleft()
        node = tree.nodes[nid]
        if np.all(stats.counts < params.min_split):
            node.leaf_reason = LEAF_MIN_SPLIT
            continue
        coords, _ = draw_coordinates(rng, data.d, mtry, params.pi)
        node.drawn = coords
        found = best_split(stats, coords, data, params)
        if found is None:
            node.leaf_reason = LEAF_NO_SPLIT
            continue
        node.split = found.candidate
        node.gain = found.gain
        for side, child in (("left", found.left), ("right", found.right)):
            cid = len(tree.nodes)
            tree.nodes.append(TreeNode(cid, node.depth + 1, child.counts, child.estimates))
            setattr(node, side, cid)
            queue.append((cid, child))
    return tree


def _route_members(tree: UpliftTree, data: Dataset, indices) -> list:
    """Members of every node (by id) for the given sample indices."""
    members = [None] * len(tree.nodes)
    members[0] = np.asarray(indices, dtype=np.int64)
    for node in tree.nodes:
        if node.is_leaf:
            continue
        idx = members[node.id]
        go_left = node.split.goes_left(data.features[idx, node.split.coordinate])
        members[node.left] = idx[go_left]
        members[node.right] = idx[~go_left]
    return members


def honest_estimate(tree: UpliftTree, data: Dataset, estimation_indices) -> UpliftTree:
    """Return a copy of ``tree`` whose nodes carry estimation-set means.

    A node without estimation samples of some treatment inherits its parent's
    value for that treatment.
    """
    members = _route_members(tree, data, estimation_indices)
    parent_of = {}
    for node in tree.nodes:
        if not node.is_leaf:
            parent_of[node.left] = node.id
            parent_of[node.right] = node.id
    nodes = []
    for node in tree.nodes:
        idx = members[node.id]
        t = data.treatments[idx] - 1
        counts = np.bincount(t, minlength=data.K)
        sums = np.zeros(data.K)
        np.add.at(sums, t, data.responses[idx])
        if node.id == 0:
            if np.any(counts == 0):
                missing = (np.flatnonzero(counts == 0) + 1).tolist()
                raise ValueError(f"estimation set lacks treatments {missing} at the root")
            est = sums / counts
        else:
            est = nodes[parent_of[node.id]].honest_estimates.copy()
            seen = counts > 0
            est[seen] = sums[seen] / counts[seen]
        nodes.append(replace(node, honest_estimates=est))
    return UpliftTree(tree.K, tree.schema, nodes)


def with_plain_estimates(tree: UpliftTree) -> UpliftTree:
    """Copy of ``tree`` predicting with its approximation-set estimates."""
    return UpliftTree(tree.K, tree.schema,
                      [replace(n, honest_estimates=n.approx_estimates.copy()) for n in tree.nodes])


def predict_tree(tree: UpliftTree, x, t: int) -> float:
    """Honest estimate for treatment ``t`` (1-based) at the leaf containing ``x``."""
    X = tree.schema.check_features(np.asarray(x, dtype=np.float64).reshape(1, -1))
    if not 1 <= t <= tree.K:
        raise ValueError(f"treatment must lie in 1..{tree.K}, got {t}")
    return float(tree.predict(X)[0, t - 1])


def audit_tree(tree: UpliftTree, data: Dataset, approx_indices, params: GrowthParams) -> list:
    """Check the regularity guarantees of a freshly grown tree.

    Re-routes the approximation set and verifies: every split leaves at least
    ``ceil(alpha * m)`` members per side, every leaf holds a member, internal
    nodes have some treatment with ``min_split`` samples, ``min_split`` leaves
    have none, and ``no_regular_split`` leaves truly had no regular candidate
    on the coordinates drawn there. Returns a list of violation messages.
    """
    problems = []
    members = _route_members(tree, data, approx_indices)
    for node in tree.nodes:
        idx = members[node.id]
        counts = np.bincount(data.treatments[idx] - 1, minlength=data.K)
        if not np.array_equal(counts, node.approx_counts):
            problems.append(f"node {node.id}: stored counts {node.approx_counts} != routed {counts}")
        if idx.size == 0:
            problems.append(f"node {node.id}: empty")
        can_split = bool(np.any(counts >= params.min_split))
        if node.is_leaf:
            if node.leaf_reason == LEAF_MIN_SPLIT and can_split:
                problems.append(f"leaf {node.id}: terminated although some n_t >= min_split")
            elif node.leaf_reason == LEAF_NO_SPLIT:
                if not can_split:
                    problems.append(f"leaf {node.id}: marked no-split but min_split rule applies")
                stats = NodeStats(idx, counts, np.zeros(data.K), node.approx_estimates)
                if any(enumerate_candidates(stats, j, data, params.alpha) for j in node.drawn):
                    problems.append(f"leaf {node.id}: a regular split existed on {node.drawn}")
            elif node.leaf_reason not in (LEAF_MIN_SPLIT, LEAF_NO_SPLIT):
                problems.append(f"leaf {node.id}: unknown leaf reason {node.leaf_reason!r}")
        else:
            if not can_split:
                problems.append(f"node {node.id}: split although every n_t < min_split")
            floor = min_side_count(params.alpha, idx.size)
            n_l, n_r = members[node.left].size, members[node.right].size
            if n_l < floor or n_r < floor:
                problems.append(f"node {node.id}: split sizes ({n_l}, {n_r}) below {floor}")
    return problems
