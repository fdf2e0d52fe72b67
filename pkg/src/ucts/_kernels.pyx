# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split-scan kernels; see ``_kernels_py`` for the reference version."""
import numpy as np

NAME = "cython"


def uplift_scan(const double[::1] x, const long long[::1] t, const double[::1] y,
                const double[::1] parent_est, long min_split, double n_reg, long min_side):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t K = parent_est.shape[0]
    cdef Py_ssize_t i, k, p
    cdef double pmax, lmax, rmax, e, g, best_gain = 0.0
    cdef long best_pos = -1, n_valid = 0
    cdef long m_l, m_r
    if m < 2:
        return -1, 0.0, 0

    # suffix statistics: row p holds samples p+1 .. m-1
    cdef long long[:, ::1] cnt_r = np.zeros((m, K), dtype=np.int64)
    cdef double[:, ::1] sum_r = np.zeros((m, K), dtype=np.float64)
    cdef long long[::1] run_c = np.zeros(K, dtype=np.int64)
    cdef double[::1] run_s = np.zeros(K, dtype=np.float64)
    for i in range(m - 1, 0, -1):
        run_c[t[i]] += 1
        run_s[t[i]] += y[i]
        for k in range(K):
            cnt_r[i - 1, k] = run_c[k]
            sum_r[i - 1, k] = run_s[k]

    pmax = parent_est[0]
    for k in range(1, K):
        if parent_est[k] > pmax:
            pmax = parent_est[k]

    run_c[:] = 0
    run_s[:] = 0.0
    with nogil:
        for p in range(m - 1):
            run_c[t[p]] += 1
            run_s[t[p]] += y[p]
            m_l = p + 1
            m_r = m - m_l
            if not (x[p] < x[p + 1] and m_l >= min_side and m_r >= min_side):
                continue
            for k in range(K):
                if run_c[k] >= min_split:
                    e = (run_s[k] + parent_est[k] * n_reg) / (<double>run_c[k] + n_reg)
                else:
                    e = parent_est[k]
                if k == 0 or e > lmax:
                    lmax = e
                if cnt_r[p, k] >= min_split:
                    e = (sum_r[p, k] + parent_est[k] * n_reg) / (<double>cnt_r[p, k] + n_reg)
                else:
                    e = parent_est[k]
                if k == 0 or e > rmax:
                    rmax = e
            g = (<double>m_l / <double>m) * lmax + (<double>m_r / <double>m) * rmax - pmax
            n_valid += 1
            if best_pos < 0 or g > best_gain:
                best_pos = p
                best_gain = g
    if best_pos < 0:
        return -1, 0.0, 0
    return best_pos, best_gain, n_valid


def sse_scan(const double[::1] x, const double[::1] y, long min_leaf):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t p
    cdef double total, imp, best_imp = 0.0, n_l, n_r
    cdef long best_pos = -1
    if m < 2:
        return -1, 0.0
    cdef double[::1] s_r = np.zeros(m, dtype=np.float64)
    cdef double run = 0.0
    for p in range(m - 1, 0, -1):
        run += y[p]
        s_r[p - 1] = run
    run = 0.0
    with nogil:
        for p in range(m):
            run += y[p]
        total = run
        run = 0.0
        for p in range(m - 1):
            run += y[p]
            n_l = <double>(p + 1)
            n_r = <double>m - n_l
            if not (x[p] < x[p + 1] and n_l >= min_leaf and n_r >= min_leaf):
                continue
            imp = run * run / n_l + s_r[p] * s_r[p] / n_r - total * total / <double>m
            if best_pos < 0 or imp > best_imp:
                best_pos = p
                best_imp = imp
    return best_pos, best_imp


def apply_tree(const double[:, ::1] X, const long long[::1] feature, const double[::1] threshold,
               const long long[::1] left, const long long[::1] right,
               const unsigned char[::1] is_cat, const unsigned char[:, ::1] cat_left):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef long long nd, f
    cdef double v
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] res = out
    with nogil:
        for i in range(n):
            nd = 0
            while feature[nd] >= 0:
                f = feature[nd]
                v = X[i, f]
                if is_cat[nd]:
                    if cat_left[nd, <Py_ssize_t>v]:
                        nd = left[nd]
                    else:
                        nd = right[nd]
                elif v <= threshold[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            res[i] = nd
    return out


def accumulate_tree(const double[:, ::1] X, const long long[::1] feature, const double[::1] threshold,
                    const long long[::1] left, const long long[::1] right,
                    const unsigned char[::1] is_cat, const unsigned char[:, ::1] cat_left,
                    const double[:, ::1] table, double[:, ::1] out):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t K = table.shape[1]
    cdef Py_ssize_t i, k
    cdef long long nd
    cdef double v
    with nogil:
        for i in range(n):
            nd = 0
            while feature[nd] >= 0:
                v = X[i, feature[nd]]
                if is_cat[nd]:
                    if cat_left[nd, <Py_ssize_t>v]:
                        nd = left[nd]
                    else:
                        nd = right[nd]
                elif v <= threshold[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            for k in range(K):
                out[i, k] += table[nd, k]
