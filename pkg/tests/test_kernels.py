import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import isotonic_regression

from dbg4eth import _pykernels, kernels

BACKENDS = [_pykernels]
try:
    from dbg4eth import _ckernels

    BACKENDS.append(_ckernels)
except ImportError:  # extension not built
    pass


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__)
@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.integers(0, 2**31))
def test_pava_matches_scipy(mod, ys, seed):
    y = np.array(ys)
    w = np.random.default_rng(seed).uniform(0.5, 3.0, y.size)
    want = isotonic_regression(y, weights=w).x
    assert np.allclose(mod.pava(y, w), want, atol=1e-9)


def _brute_split(x, g, h, lam, min_leaf, min_hess):
    order = np.argsort(x, kind="stable")
    xs, gs, hs = x[order], g[order], h[order]
    G, H = gs.sum(), hs.sum()
    best, where = 0.0, 0
    for k in range(1, len(x)):
        if xs[k] == xs[k - 1] or k < min_leaf or len(x) - k < min_leaf:
            continue
        gl, hl = gs[:k].sum(), hs[:k].sum()
        if hl < min_hess or H - hl < min_hess:
            continue
        gain = gl**2 / (hl + lam) + (G - gl) ** 2 / (H - hl + lam) - G**2 / (H + lam)
        if gain > best + 1e-12:
            best, where = gain, k
    return best, where


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__)
@pytest.mark.parametrize("seed", range(15))
def test_best_split_matches_brute_force(mod, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 30))
    x = np.sort(rng.integers(0, 8, n).astype(float))
    g, h = rng.normal(size=n), rng.uniform(0.05, 0.25, n)
    gain, k = mod.best_split(x, g, h, 1.0, 2, 1e-3)
    bg, bk = _brute_split(x, g, h, 1.0, 2, 1e-3)
    assert gain == pytest.approx(bg, rel=1e-9, abs=1e-12)
    if bk:
        assert k == bk


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__)
def test_bin_stats(mod):
    conf = np.array([0.0, 0.05, 0.5, 0.99, 1.0])
    y = np.array([0.0, 1.0, 1.0, 0.0, 1.0])
    cnt, sc, sy = mod.bin_stats(conf, y, 10)
    assert cnt.tolist() == [2, 0, 0, 0, 0, 1, 0, 0, 0, 2]
    assert sc[9] == pytest.approx(1.99) and sy[9] == 1.0


def test_backends_agree():
    rng = np.random.default_rng(0)
    y, w = rng.normal(size=500), rng.uniform(1, 2, 500)
    outs = [m.pava(y, w) for m in BACKENDS]
    for o in outs[1:]:
        assert np.allclose(o, outs[0], atol=1e-12)


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, DBG4ETH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import dbg4eth.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
