"""Pure-Python fallbacks for the compiled kernels in ``_ckernels.pyx``."""

from __future__ import annotations

import numpy as np


def pava(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of ``y`` (pool adjacent violators)."""
    vals: list[float] = []
    wts: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v, wt, s = vals.pop(), wts.pop(), sizes.pop()
            nw = wts[-1] + wt
            vals[-1] = (wts[-1] * vals[-1] + wt * v) / nw
            wts[-1] = nw
            sizes[-1] += s
    return np.repeat(np.asarray(vals, dtype=float), sizes)


def best_split(x, g, h, reg_lambda, min_leaf, min_hess):
    n = len(x)
    if n < 2:
        return 0.0, 0
    G, H = g.sum(), h.sum()
    GL = np.cumsum(g)[:-1]
    HL = np.cumsum(h)[:-1]
    GR, HR = G - GL, H - HL
    n_left = np.arange(1, n)
    ok = (x[:-1] != x[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    ok &= (HL >= min_hess) & (HR >= min_hess)
    if not ok.any():
        return 0.0, 0
    gain = GL**2 / (HL + reg_lambda) + GR**2 / (HR + reg_lambda) - G**2 / (H + reg_lambda)
    gain = np.where(ok, gain, -np.inf)
    i = int(np.argmax(gain))
    if not gain[i] > 0.0:
        return 0.0, 0
    return float(gain[i]), i + 1


def bin_stats(conf, labels, n_bins):
    idx = np.clip((conf * n_bins).astype(np.intp), 0, n_bins - 1)
    count = np.bincount(idx, minlength=n_bins).astype(float)
    sconf = np.bincount(idx, weights=conf, minlength=n_bins)
    slab = np.bincount(idx, weights=labels, minlength=n_bins)
    return count, sconf, slab
