"""Pure NumPy split-scan kernels.

Reference implementation of the routines in ``_kernels.pyx``. Both modules
perform the same floating-point operations in the same order, so they return
bit-identical results; the compiled one is picked at import when available.
"""
import numpy as np

NAME = "python"


def uplift_scan(x, t, y, parent_est, min_split, n_reg, min_side):
    """Scan every threshold of one sorted numeric coordinate.

    Parameters
    ----------
    x : float64 array, shape (m,)
        Coordinate values, sorted ascending.
    t : int64 array, shape (m,)
        Zero-based treatment index of each sample (same order as ``x``).
    y : float64 array, shape (m,)
        Responses.
    parent_est : float64 array, shape (K,)
        Node estimates the children shrink toward or inherit.
    min_split : int
    n_reg : float
    min_side : int
        Minimum member count on each side.

    Returns
    -------
    pos : int
        Last index of the left block of the best split, or -1 if no position is
        admissible. Ties go to the smallest position.
    gain : float
    n_valid : int
        Number of admissible positions.
    """
    m = x.shape[0]
    K = parent_est.shape[0]
    if m < 2:
        return -1, 0.0, 0
    onehot = np.zeros((m, K), dtype=np.int64)
    onehot[np.arange(m), t] = 1
    weighted = np.zeros((m, K))
    weighted[np.arange(m), t] = y

    cnt_l = np.cumsum(onehot, axis=0)[:-1]
    sum_l = np.cumsum(weighted, axis=0)[:-1]
    cnt_r = np.cumsum(onehot[::-1], axis=0)[::-1][1:]
    sum_r = np.cumsum(weighted[::-1], axis=0)[::-1][1:]

    parent = parent_est[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        est_l = np.where(cnt_l >= min_split, (sum_l + parent * n_reg) / (cnt_l + n_reg), parent)
        est_r = np.where(cnt_r >= min_split, (sum_r + parent * n_reg) / (cnt_r + n_reg), parent)

    m_l = np.arange(1, m, dtype=np.int64)
    m_r = m - m_l
    gain = (m_l / m) * est_l.max(axis=1) + (m_r / m) * est_r.max(axis=1) - parent_est.max()

    valid = (x[:-1] < x[1:]) & (m_l >= min_side) & (m_r >= min_side)
    n_valid = int(valid.sum())
    if n_valid == 0:
        return -1, 0.0, 0
    gain = np.where(valid, gain, -np.inf)
    pos = int(np.argmax(gain))
    return pos, float(gain[pos]), n_valid


def sse_scan(x, y, min_leaf):
    """Best variance-reduction split of one sorted coordinate.

    Returns ``(pos, improvement)`` where improvement is the drop in the sum of
    squared deviations; ``pos == -1`` when no admissible position exists.
    """
    m = x.shape[0]
    if m < 2:
        return -1, 0.0
    s_l = np.cumsum(y)[:-1]
    s_r = np.cumsum(y[::-1])[::-1][1:]
    total = s_l[-1] + y[-1]
    n_l = np.arange(1, m, dtype=np.float64)
    n_r = m - n_l
    improvement = s_l * s_l / n_l + s_r * s_r / n_r - total * total / m
    valid = (x[:-1] < x[1:]) & (n_l >= min_leaf) & (n_r >= min_leaf)
    if not valid.any():
        return -1, 0.0
    improvement = np.where(valid, improvement, -np.inf)
    pos = int(np.argmax(improvement))
    return pos, float(improvement[pos])


def apply_tree(X, feature, threshold, left, right, is_cat, cat_left):
    """Leaf reached by each row of ``X`` in a flattened tree.

    ``feature[i] == -1`` marks a leaf. Numeric nodes send ``x <= threshold``
    left; categorical nodes send a row left when ``cat_left[i, code]`` is set.
    """
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.full(n, feature[0] >= 0)
    while active.any():
        rows = np.flatnonzero(active)
        nd = node[rows]
        xv = X[rows, feature[nd]]
        cat = is_cat[nd].astype(bool)
        code = np.where(cat, xv, 0).astype(np.int64)
        go_left = np.where(cat, cat_left[nd, code].astype(bool), xv <= threshold[nd])
        nxt = np.where(go_left, left[nd], right[nd])
        node[rows] = nxt
        active[rows] = feature[nxt] >= 0
    return node


def accumulate_tree(X, feature, threshold, left, right, is_cat, cat_left, table, out):
    """Add ``table[leaf(x)]`` to each row of ``out`` in place."""
    out += table[apply_tree(X, feature, threshold, left, right, is_cat, cat_left)]
