"""Reference computations written without reusing any package code paths.

These loop over raw Python lists, use ``math.fsum`` and enumerate every
partition directly, so they share no arithmetic with the vectorized search.
"""
import itertools
import math
from decimal import Decimal


def alpha_floor(alpha, m):
    return max(1, math.ceil(Decimal(repr(float(alpha))) * m))


def node_estimates(ts, ys, K):
    out = []
    for k in range(1, K + 1):
        vals = [y for t, y in zip(ts, ys) if t == k]
        out.append(math.fsum(vals) / len(vals))
    return out


def child_estimates(ts, ys, K, parent, min_split, n_reg):
    out = []
    for k in range(1, K + 1):
        vals = [y for t, y in zip(ts, ys) if t == k]
        if len(vals) >= min_split:
            out.append((math.fsum(vals) + parent[k - 1] * n_reg) / (len(vals) + n_reg))
        else:
            out.append(parent[k - 1])
    return out


def partition_gain(ts, ys, left_mask, K, parent, min_split, n_reg):
    lt = [t for t, g in zip(ts, left_mask) if g]
    ly = [y for y, g in zip(ys, left_mask) if g]
    rt = [t for t, g in zip(ts, left_mask) if not g]
    ry = [y for y, g in zip(ys, left_mask) if not g]
    m = len(ts)
    el = child_estimates(lt, ly, K, parent, min_split, n_reg)
    er = child_estimates(rt, ry, K, parent, min_split, n_reg)
    return len(lt) / m * max(el) + len(rt) / m * max(er) - max(parent)


def all_partitions(column, categorical):
    """Every left-membership mask realizable by a rule on this column."""
    values = sorted(set(column))
    if categorical:
        for r in range(1, len(values)):
            for subset in itertools.combinations(values, r):
                yield [v in subset for v in column]
    else:
        for v in values[:-1]:
            yield [x <= v for x in column]


def brute_force_best_gain(rows, ts, ys, categorical, coords, K, min_split, n_reg, alpha):
    """Best gain over all alpha-regular partitions on ``coords``; None if there is none."""
    parent = node_estimates(ts, ys, K)
    floor = alpha_floor(alpha, len(ts))
    best = None
    for j in coords:
        col = [r[j] for r in rows]
        for mask in all_partitions(col, categorical[j]):
            n_l = sum(mask)
            if n_l < floor or len(mask) - n_l < floor:
                continue
            g = partition_gain(ts, ys, mask, K, parent, min_split, n_reg)
            best = g if best is None else max(best, g)
    return best


def ips_terms(chosen, ts, ys, propensities):
    return [y / propensities[t - 1] if c == t else 0.0 for c, t, y in zip(chosen, ts, ys)]
