"""Candidate splits and their estimated gain in expected response."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .data import Dataset

# Full binary-partition enumeration up to this many levels present in a node.
MAX_EXHAUSTIVE_LEVELS = 10
# Beyond this many levels a node must admit at least one one-vs-rest split.
MAX_CATEGORICAL_LEVELS = 25


class CategoricalSplitError(ValueError):
    """A high-cardinality categorical column admits no regular split."""


def min_side_count(alpha: float, m: int) -> int:
    """``ceil(alpha * m)`` computed on the decimal value of ``alpha`` (at least 1)."""
    return max(1, math.ceil(Fraction(repr(float(alpha))) * m))


@dataclass(frozen=True)
class NodeStats:
    """Approximation-set summary of one node.

    ``counts``, ``sums`` and ``estimates`` are indexed by zero-based treatment.
    """

    members: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    estimates: np.ndarray

    @property
    def m(self) -> int:
        return int(self.members.shape[0])

    @classmethod
    def root(cls, data: Dataset, members) -> "NodeStats":
        members = np.asarray(members, dtype=np.int64)
        counts, sums = treatment_sums(data, members)
        if np.any(counts == 0):
            missing = (np.flatnonzero(counts == 0) + 1).tolist()
            raise ValueError(f"root node lacks samples of treatments {missing}")
        return cls(members, counts, sums, sums / counts)

    @classmethod
    def child(cls, data: Dataset, members, parent_estimates, min_split, n_reg) -> "NodeStats":
        members = np.asarray(members, dtype=np.int64)
        counts, sums = treatment_sums(data, members)
        est = estimate_child_response(counts, sums, parent_estimates, min_split, n_reg)
        return cls(members, counts, sums, est)


def treatment_sums(data: Dataset, members: np.ndarray):
    t = data.treatments[members] - 1
    counts = np.bincount(t, minlength=data.K).astype(np.int64)
    sums = np.zeros(data.K)
    np.add.at(sums, t, data.responses[members])
    return counts, sums


def estimate_child_response(counts, sums, parent_estimates, min_split: int, n_reg: float) -> np.ndarray:
    """Per-treatment child estimates, shrunk toward the parent.

    Treatments with at least ``min_split`` samples get
    ``(sum + parent * n_reg) / (count + n_reg)``; the rest inherit the parent
    estimate unchanged.
    """
    counts = np.asarray(counts)
    sums = np.asarray(sums, dtype=np.float64)
    parent = np.asarray(parent_estimates, dtype=np.float64)
    out = parent.copy()
    ok = counts >= min_split
    out[ok] = (sums[ok] + parent[ok] * n_reg) / (counts[ok] + n_reg)
    return out


@dataclass(frozen=True)
class SplitCandidate:
    """Binary rule on one coordinate.

    Numeric: left iff ``x[coordinate] <= threshold``. Categorical: left iff the
    level code is in ``left_levels``.
    """

    coordinate: int
    threshold: Optional[float] = None
    left_levels: Optional[frozenset] = None
    n_left: int = 0
    n_right: int = 0

    @property
    def is_categorical(self) -> bool:
        return self.left_levels is not None

    def goes_left(self, values: np.ndarray) -> np.ndarray:
        if self.left_levels is not None:
            return np.isin(values, np.fromiter(self.left_levels, dtype=np.float64))
        return values <= self.threshold


@dataclass(frozen=True)
class SplitScore:
    candidate: SplitCandidate
    gain: float
    left: NodeStats
    right: NodeStats


def _split_gain(m_l, m_r, est_l, est_r, parent_estimates) -> float:
    m = m_l + m_r
    return (m_l / m) * np.max(est_l) + (m_r / m) * np.max(est_r) - np.max(parent_estimates)


def score_split(parent: NodeStats, candidate: SplitCandidate, data: Dataset,
                min_split: int, n_reg: float, alpha: Optional[float] = None) -> SplitScore:
    """Gain of ``candidate`` at ``parent``: weighted best child estimate minus best parent estimate."""
    go_left = candidate.goes_left(data.features[parent.members, candidate.coordinate])
    left = NodeStats.child(data, parent.members[go_left], parent.estimates, min_split, n_reg)
    right = NodeStats.child(data, parent.members[~go_left], parent.estimates, min_split, n_reg)
    floor = 1 if alpha is None else min_side_count(alpha, parent.m)
    if left.m < floor or right.m < floor:
        raise ValueError(f"split leaves ({left.m}, {right.m}) members; each side needs >= {floor}")
    gain = _split_gain(left.m, right.m, left.estimates, right.estimates, parent.estimates)
    return SplitScore(candidate, float(gain), left, right)


def _midpoint(a: float, b: float) -> float:
    mid = (a + b) / 2
    # adjacent floats: keep b on the right
    return a if mid >= b else mid


def _categorical_subsets(levels: Sequence[int]):
    """Left-hand subsets in canonical order.

    With ``c`` levels present and ``c <= MAX_EXHAUSTIVE_LEVELS`` every binary
    partition appears once: the left side ranges over the non-empty subsets of
    the first ``c - 1`` levels, by increasing bitmask. Otherwise each level is
    split off on its own.
    """
    c = len(levels)
    if c < 2:
        return []
    if c <= MAX_EXHAUSTIVE_LEVELS:
        out = []
        for mask in range(1, 1 << (c - 1)):
            out.append(frozenset(levels[i] for i in range(c - 1) if mask >> i & 1))
        return out
    return [frozenset([lev]) for lev in levels]


def enumerate_candidates(parent: NodeStats, coordinate: int, data: Dataset, alpha: float) -> list:
    """All alpha-regular candidates on one coordinate, in deterministic order."""
    values = data.features[parent.members, coordinate]
    floor = min_side_count(alpha, parent.m)
    out = []
    if data.schema.columns[coordinate].is_categorical:
        levels, level_counts = np.unique(values, return_counts=True)
        levels = [float(v) for v in levels]
        count_of = dict(zip(levels, level_counts.tolist()))
        for subset in _categorical_subsets(levels):
            n_left = sum(count_of[v] for v in subset)
            n_right = parent.m - n_left
            if n_left >= floor and n_right >= floor:
                out.append(SplitCandidate(coordinate, None, subset, n_left, n_right))
        if len(levels) > MAX_CATEGORICAL_LEVELS and not out:
            name = data.schema.columns[coordinate].name
            raise CategoricalSplitError(
                f"column {name!r}: {len(levels)} levels in node and no one-vs-rest split "
                f"leaves {floor} members per side")
        return out
    distinct, distinct_counts = np.unique(values, return_counts=True)
    n_left = np.cumsum(distinct_counts)[:-1]
    for k in range(distinct.size - 1):
        nl = int(n_left[k])
        if nl >= floor and parent.m - nl >= floor:
            out.append(SplitCandidate(coordinate, _midpoint(float(distinct[k]), float(distinct[k + 1])),
                                      None, nl, parent.m - nl))
    return out


def _best_categorical(parent: NodeStats, coordinate: int, data: Dataset, min_split, n_reg, alpha):
    candidates = enumerate_candidates(parent, coordinate, data, alpha)
    if not candidates:
        return None
    values = data.features[parent.members, coordinate]
    levels = np.unique(values)
    code = np.searchsorted(levels, values)
    t = data.treatments[parent.members] - 1
    K = data.K
    level_counts = np.zeros((levels.size, K), dtype=np.int64)
    level_sums = np.zeros((levels.size, K))
    np.add.at(level_counts, (code, t), 1)
    np.add.at(level_sums, (code, t), data.responses[parent.members])

    masks = np.array([np.isin(levels, np.fromiter(c.left_levels, dtype=np.float64)) for c in candidates])
    left_w = masks[:, :, None]
    cnt_l = (left_w * level_counts[None]).sum(axis=1)
    cnt_r = (~left_w * level_counts[None]).sum(axis=1)
    sum_l = (left_w * level_sums[None]).sum(axis=1)
    sum_r = (~left_w * level_sums[None]).sum(axis=1)

    pe = parent.estimates[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        est_l = np.where(cnt_l >= min_split, (sum_l + pe * n_reg) / (cnt_l + n_reg), pe)
        est_r = np.where(cnt_r >= min_split, (sum_r + pe * n_reg) / (cnt_r + n_reg), pe)
    m_l = cnt_l.sum(axis=1)
    m_r = cnt_r.sum(axis=1)
    m = parent.m
    gains = (m_l / m) * est_l.max(axis=1) + (m_r / m) * est_r.max(axis=1) - parent.estimates.max()
    k = int(np.argmax(gains))
    return candidates[k], float(gains[k])


def _best_numeric(parent: NodeStats, coordinate: int, data: Dataset, min_split, n_reg, alpha):
    values = data.features[parent.members, coordinate]
    order = np.argsort(values, kind="stable")
    members = parent.members[order]
    x = np.ascontiguousarray(values[order])
    t = np.ascontiguousarray(data.treatments[members] - 1, dtype=np.int64)
    y = np.ascontiguousarray(data.responses[members])
    pos, gain, _ = kernels.uplift_scan(x, t, y, parent.estimates, int(min_split), float(n_reg),
                                       min_side_count(alpha, parent.m))
    if pos < 0:
        return None
    cand = SplitCandidate(coordinate, _midpoint(float(x[pos]), float(x[pos + 1])), None,
                          pos + 1, parent.m - pos - 1)
    return cand, gain


def best_split(parent: NodeStats, coordinates: Sequence[int], data: Dataset, params) -> Optional[SplitScore]:
    """Highest-gain alpha-regular split over ``coordinates``.

    ``params`` needs ``min_split``, ``n_reg`` and ``alpha`` attributes. Ties go
    to the earlier coordinate, then to the earlier candidate on that
    coordinate. Returns ``None`` when no coordinate admits a regular split.
    """
    if len(coordinates) == 0:
        raise ValueError("best_split needs at least one coordinate")
    best = None
    for j in coordinates:
        if data.schema.columns[j].is_categorical:
            found = _best_categorical(parent, j, data, params.min_split, params.n_reg, params.alpha)
        else:
            found = _best_numeric(parent, j, data, params.min_split, params.n_reg, params.alpha)
        if found is not None and (best is None or found[1] > best[1]):
            best = found
    if best is None:
        return None
    cand, gain = best
    go_left = cand.goes_left(data.features[parent.members, cand.coordinate])
    left = NodeStats.child(data, parent.members[go_left], parent.estimates, params.min_split, params.n_reg)
    right = NodeStats.child(data, parent.members[~go_left], parent.estimates, params.min_split, params.n_reg)
    return SplitScore(cand, gain, left, right)
