"""Compiled loops, their interpreted bodies and the numpy fallbacks must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from svsde._jit import py_func
from svsde.inference import _kernels as K


def _sparse_rows(rng, n_rows, n_coef, k):
    idx = np.stack([rng.choice(n_coef, k, replace=False) for _ in range(n_rows)])
    vals = rng.normal(size=(n_rows, k))
    return idx.astype(np.int64), vals


def _tridiag(rng, lens):
    n = sum(lens)
    starts = np.cumsum([0] + list(lens[:-1])).astype(np.int64)
    off = rng.normal(0, 0.4, n)
    diag = 1.0 + np.abs(off) + np.abs(np.roll(off, 1)) + rng.uniform(0.1, 1.0, n)
    return starts, np.asarray(lens, np.int64), diag, off, rng.normal(size=n), rng.normal(size=n)


@given(seed=st.integers(0, 10_000), n_rows=st.integers(1, 40))
def test_sparse_kernels_agree(seed, n_rows):
    rng = np.random.default_rng(seed)
    idx, vals = _sparse_rows(rng, n_rows, 16, 4)
    coef = rng.normal(size=16)
    w = rng.uniform(0, 2, n_rows)
    w[rng.uniform(size=n_rows) < 0.2] = 0.0
    dense = np.zeros((n_rows, 16))
    for i in range(n_rows):
        dense[i, idx[i]] = vals[i]
    for fn in (K.sparse_matvec_loop, py_func(K.sparse_matvec_loop), K.sparse_matvec_numpy):
        out = np.empty(n_rows)
        fn(idx, vals, coef, out)
        np.testing.assert_allclose(out, dense @ coef, atol=1e-12)
    for fn in (K.sparse_rmatvec_loop, py_func(K.sparse_rmatvec_loop), K.sparse_rmatvec_numpy):
        out = np.full(16, 7.0)
        fn(idx, vals, w, out)
        np.testing.assert_allclose(out, dense.T @ w, atol=1e-12)
    for fn in (K.sparse_gram_loop, py_func(K.sparse_gram_loop), K.sparse_gram_numpy):
        out = np.full((16, 16), 7.0)
        fn(idx, vals, w, out)
        np.testing.assert_allclose(out, dense.T @ (w[:, None] * dense), atol=1e-12)


@given(seed=st.integers(0, 10_000),
       lens=st.lists(st.integers(1, 12), min_size=1, max_size=5))
def test_tridiag_sample_agrees_with_dense(seed, lens):
    rng = np.random.default_rng(seed)
    starts, ln, diag, off, lin, z = _tridiag(rng, lens)
    n = diag.size
    P = np.diag(diag)
    for s, m in zip(starts, ln):
        for i in range(s, s + m - 1):
            P[i, i + 1] = P[i + 1, i] = off[i]
    L = np.linalg.cholesky(P)
    ref = np.linalg.solve(P, lin) + np.linalg.solve(L.T, z)
    for fn in (K.tridiag_sample_loop, py_func(K.tridiag_sample_loop), K.tridiag_sample_numpy):
        out = np.empty(n)
        assert fn(starts, ln, diag, off.copy(), lin, z, out) == -1
        np.testing.assert_allclose(out, ref, atol=1e-10)


def test_tridiag_sample_reports_bad_pivot():
    starts = np.array([0], np.int64)
    ln = np.array([3], np.int64)
    diag = np.array([1.0, -1.0, 1.0])
    off = np.zeros(3)
    for fn in (K.tridiag_sample_loop, py_func(K.tridiag_sample_loop), K.tridiag_sample_numpy):
        assert fn(starts, ln, diag, off, np.zeros(3), np.zeros(3), np.empty(3)) == 1


def test_site_sweep_matches_manual_updates():
    rng = np.random.default_rng(3)
    starts, ln, diag, off, lin, z = _tridiag(rng, [5, 1, 4])
    v0 = rng.normal(size=diag.size)
    manual = v0.copy()
    for s, m in zip(starts, ln):
        for i in range(s, s + m):
            b = lin[i]
            if i > s:
                b -= off[i - 1] * manual[i - 1]
            if i < s + m - 1:
                b -= off[i] * manual[i + 1]
            manual[i] = b / diag[i] + z[i] / np.sqrt(diag[i])
    for fn in (K.tridiag_site_sweep_loop, py_func(K.tridiag_site_sweep_loop)):
        v = v0.copy()
        assert fn(starts, ln, diag, off, lin, z, v) == -1
        np.testing.assert_allclose(v, manual, atol=1e-13)


_SCRIPT = """
import json, numpy as np
from svsde._jit import JIT_DISABLED
from svsde.params import ModelParams
from svsde.sde import SimConfig, SimState, simulate
from svsde.surfaces import AnalyticField, WallField
from svsde.inference import ChainConfig, run_chain
from svsde.data_io import from_simulation
from svsde.sde import simulate_individuals
cfg = SimConfig(delta=0.1, n_steps=300, initial=SimState(0.1, -0.2, 0.5, 0.3), seed=17,
                potential=AnalyticField.quadratic(1, 1), motility=AnalyticField.quadrant(0.5, 1),
                wall=WallField((-2, 2, -2, 2), 1.5))
p = ModelParams(beta=1.5, kappa2=0.01)
path = simulate(cfg, p)
data = from_simulation(simulate_individuals(cfg.replace(n_steps=60), p, 2), 0.1)
ch = run_chain(data, ChainConfig(iterations=25, basis=(3, 3), order=3, seed=2))
print(json.dumps({"jit_disabled": JIT_DISABLED, "path": np.stack([path.x, path.y, path.vx, path.vy]).tolist(),
                  "beta": ch.scalars["beta"].tolist(), "gamma": ch.gamma[-1].tolist()}))
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("SVSDE_DISABLE_JIT", None)
    if disable:
        env["SVSDE_DISABLE_JIT"] = "1"
    res = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_disable_jit_gives_same_results():
    fast, slow = _run(False), _run(True)
    assert fast["jit_disabled"] is False and slow["jit_disabled"] is True
    np.testing.assert_allclose(fast["path"], slow["path"], rtol=0, atol=1e-10)
    np.testing.assert_allclose(fast["beta"], slow["beta"], rtol=1e-8)
    np.testing.assert_allclose(fast["gamma"], slow["gamma"], rtol=1e-6, atol=1e-8)
