"""Inner loops for the sampler.

Each kernel exists as a numba-compiled loop (``*_loop``) and as a vectorized
numpy/scipy routine (``*_numpy``). The public names bind to the loops unless
``SVSDE_DISABLE_JIT`` is set, in which case the numpy versions are used. Both
write into caller-provided output arrays and agree to rounding error.
"""
import math

import numpy as np
from scipy import linalg

from .._jit import JIT_DISABLED, njit


@njit
def sparse_matvec_loop(idx, vals, coef, out):
    for i in range(idx.shape[0]):
        s = 0.0
        for m in range(idx.shape[1]):
            s += vals[i, m] * coef[idx[i, m]]
        out[i] = s


@njit
def sparse_rmatvec_loop(idx, vals, w, out):
    out[:] = 0.0
    for i in range(idx.shape[0]):
        wi = w[i]
        if wi == 0.0:
            continue
        for m in range(idx.shape[1]):
            out[idx[i, m]] += vals[i, m] * wi


@njit
def sparse_gram_loop(idx, vals, w, out):
    """out = sum_i w_i b_i b_i' for sparse rows b_i."""
    out[:, :] = 0.0
    k = idx.shape[1]
    for i in range(idx.shape[0]):
        wi = w[i]
        if wi == 0.0:
            continue
        for a in range(k):
            va = vals[i, a] * wi
            if va == 0.0:
                continue
            ia = idx[i, a]
            for b in range(k):
                out[ia, idx[i, b]] += va * vals[i, b]


@njit
def tridiag_sample_loop(seg_start, seg_len, diag, off, lin, z, out):
    """Joint Gaussian draw for each segment's symmetric tridiagonal system.

    Precision has diagonal ``diag`` and super-diagonal ``off[i]`` (coupling i and
    i+1); the linear term is ``lin``. Writes mean + L^-T z. Returns -1 on
    success or the first index with a nonpositive pivot.
    """
    n_total = diag.shape[0]
    ld = np.empty(n_total)
    sub = np.empty(n_total)
    w = np.empty(n_total)
    for s in range(seg_start.shape[0]):
        a = seg_start[s]
        n = seg_len[s]
        # forward: Cholesky and L w = lin
        piv = diag[a]
        if not piv > 0.0:
            return a
        ld[a] = math.sqrt(piv)
        w[a] = lin[a] / ld[a]
        for i in range(a + 1, a + n):
            sub[i] = off[i - 1] / ld[i - 1]
            piv = diag[i] - sub[i] * sub[i]
            if not piv > 0.0:
                return i
            ld[i] = math.sqrt(piv)
            w[i] = (lin[i] - sub[i] * w[i - 1]) / ld[i]
        # backward: L' out = w + z
        last = a + n - 1
        out[last] = (w[last] + z[last]) / ld[last]
        for i in range(last - 1, a - 1, -1):
            out[i] = (w[i] + z[i] - sub[i + 1] * out[i + 1]) / ld[i]
    return -1


@njit
def tridiag_site_sweep_loop(seg_start, seg_len, diag, off, lin, z, v):
    """Sequential single-site Gibbs sweep over the same tridiagonal system."""
    for s in range(seg_start.shape[0]):
        a = seg_start[s]
        n = seg_len[s]
        for i in range(a, a + n):
            b = lin[i]
            if i > a:
                b -= off[i - 1] * v[i - 1]
            if i < a + n - 1:
                b -= off[i] * v[i + 1]
            if not diag[i] > 0.0:
                return i
            v[i] = b / diag[i] + z[i] / math.sqrt(diag[i])
    return -1


# ---------------------------------------------------------------------------
# vectorized fallbacks
# ---------------------------------------------------------------------------

def sparse_matvec_numpy(idx, vals, coef, out):
    out[:] = np.einsum("ij,ij->i", vals, coef[idx])


def sparse_rmatvec_numpy(idx, vals, w, out):
    out[:] = np.bincount(idx.ravel(), weights=(vals * w[:, None]).ravel(), minlength=out.size)


def sparse_gram_numpy(idx, vals, w, out):
    n = out.shape[0]
    flat = (idx[:, :, None] * n + idx[:, None, :]).ravel()
    contrib = ((vals * w[:, None])[:, :, None] * vals[:, None, :]).ravel()
    out[:, :] = np.bincount(flat, weights=contrib, minlength=n * n).reshape(n, n)


def tridiag_sample_numpy(seg_start, seg_len, diag, off, lin, z, out):
    """Banded Cholesky of the whole block-diagonal system in one call."""
    n = diag.size
    sup = off.copy()
    sup[seg_start + seg_len - 1] = 0.0  # no coupling across segments
    ab = np.empty((2, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = sup[:-1]
    ab[1] = diag
    try:
        u = linalg.cholesky_banded(ab, lower=False)
    except linalg.LinAlgError:
        bad = np.flatnonzero(~(diag > 0))
        return int(bad[0]) if bad.size else 0
    mean = linalg.cho_solve_banded((u, False), lin)
    out[:] = mean + linalg.solve_banded((0, 1), u, z)
    return -1


if JIT_DISABLED:
    sparse_matvec = sparse_matvec_numpy
    sparse_rmatvec = sparse_rmatvec_numpy
    sparse_gram = sparse_gram_numpy
    tridiag_sample = tridiag_sample_numpy
else:
    sparse_matvec = sparse_matvec_loop
    sparse_rmatvec = sparse_rmatvec_loop
    sparse_gram = sparse_gram_loop
    tridiag_sample = tridiag_sample_loop
# the single-site sweep is sequential by nature; it runs interpreted when disabled
tridiag_site_sweep = tridiag_site_sweep_loop
