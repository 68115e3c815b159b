# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`dbg4eth._pykernels`."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pava(double[::1] y, double[::1] w):
    """Weighted least-squares non-decreasing fit of ``y`` (pool adjacent violators)."""
    cdef Py_ssize_t n = y.shape[0]
    cdef double[::1] val = np.empty(n)
    cdef double[::1] wt = np.empty(n)
    cdef Py_ssize_t[::1] start = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t i, k = -1, j, stop
    cdef double nw
    for i in range(n):
        k += 1
        val[k] = y[i]
        wt[k] = w[i]
        start[k] = i
        while k > 0 and val[k - 1] > val[k]:
            nw = wt[k - 1] + wt[k]
            val[k - 1] = (wt[k - 1] * val[k - 1] + wt[k] * val[k]) / nw
            wt[k - 1] = nw
            k -= 1
    out = np.empty(n)
    cdef double[::1] o = out
    for j in range(k + 1):
        stop = start[j + 1] if j < k else n
        for i in range(start[j], stop):
            o[i] = val[j]
    return out


def best_split(double[::1] x, double[::1] g, double[::1] h,
               double reg_lambda, Py_ssize_t min_leaf, double min_hess):
    """Scan a feature sorted ascending; return (gain, n_left) of the best cut.

    ``n_left`` is 0 when no admissible cut exists.
    """
    cdef Py_ssize_t n = x.shape[0], i
    cdef double G = 0.0, H = 0.0, GL = 0.0, HL = 0.0, GR, HR, gain
    cdef double best = 0.0
    cdef Py_ssize_t best_i = 0
    for i in range(n):
        G += g[i]
        H += h[i]
    cdef double parent = G * G / (H + reg_lambda)
    for i in range(n - 1):
        GL += g[i]
        HL += h[i]
        if x[i] == x[i + 1]:
            continue
        if i + 1 < min_leaf or n - i - 1 < min_leaf:
            continue
        GR = G - GL
        HR = H - HL
        if HL < min_hess or HR < min_hess:
            continue
        gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
        if gain > best:
            best = gain
            best_i = i + 1
    return best, best_i


def bin_stats(double[::1] conf, double[::1] labels, Py_ssize_t n_bins):
    """Per equal-width bin: (count, sum of confidences, sum of labels)."""
    cdef Py_ssize_t n = conf.shape[0], i, b
    count = np.zeros(n_bins)
    sconf = np.zeros(n_bins)
    slab = np.zeros(n_bins)
    cdef double[::1] c = count, sc = sconf, sl = slab
    for i in range(n):
        b = <Py_ssize_t>(conf[i] * n_bins)
        if b >= n_bins:
            b = n_bins - 1
        elif b < 0:
            b = 0
        c[b] += 1.0
        sc[b] += conf[i]
        sl[b] += labels[i]
    return count, sconf, slab
