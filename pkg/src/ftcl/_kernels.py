"""Hot dynamic-programming loops shared by the sequence-distance and
common-subsequence operators.

Each kernel is written once as a plain-Python/numpy function and compiled
with numba's ``@njit`` when available.  Setting the environment variable
``FTCL_DISABLE_NUMBA=1`` (checked at import time) selects the uncompiled
fallback, which computes bit-identical results.  ``benchmarks/bench_kernels.py``
times the two paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

MODE_HARD = 0
MODE_NORMALIZED = 1
MODE_PAPER_EXACT = 2


def _env_disabled() -> bool:
    return os.environ.get("FTCL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


def _fsd_fill(mu, g, h, gamma, mode):
    """Fill the (M+1)x(N+1) accumulator and per-cell branch weights.

    Cell (i, j) takes mu[i-1,j-1] plus the (smooth) max over the diagonal,
    insert (g + up) and delete (h + left) branches.  Row 0 and column 0 stay
    exactly zero.  Branch weights are one-hot in hard mode (first branch wins
    ties, order match > insert > delete) and a softmax over gamma-scaled
    branch values otherwise.
    """
    m_len, n_len = mu.shape
    table = np.zeros((m_len + 1, n_len + 1))
    weights = np.zeros((m_len, n_len, 3))
    for i in range(1, m_len + 1):
        for j in range(1, n_len + 1):
            b0 = table[i - 1, j - 1]
            b1 = g[i - 1, j - 1] + table[i - 1, j]
            b2 = h[i - 1, j - 1] + table[i, j - 1]
            if mode == MODE_HARD:
                best = b0
                k = 0
                if b1 > best:
                    best = b1
                    k = 1
                if b2 > best:
                    best = b2
                    k = 2
                weights[i - 1, j - 1, k] = 1.0
                val = best
            else:
                z0 = gamma * b0
                z1 = gamma * b1
                z2 = gamma * b2
                zm = z0
                if z1 > zm:
                    zm = z1
                if z2 > zm:
                    zm = z2
                e0 = math.exp(z0 - zm)
                e1 = math.exp(z1 - zm)
                e2 = math.exp(z2 - zm)
                tot = e0 + e1 + e2
                weights[i - 1, j - 1, 0] = e0 / tot
                weights[i - 1, j - 1, 1] = e1 / tot
                weights[i - 1, j - 1, 2] = e2 / tot
                lse = zm + math.log(tot)
                if mode == MODE_NORMALIZED:
                    val = lse / gamma
                else:
                    val = lse
            table[i, j] = mu[i - 1, j - 1] + val
    return table, weights


def _fsd_sweep(weights, gamma, mode, upstream):
    """Reverse sweep of the accumulator: adjoints flow from (M, N) back to
    each predecessor weighted by the branch derivatives.

    The derivative of the branch combiner w.r.t. branch k is weights[k] in
    hard/normalized mode and gamma * weights[k] in paper-exact mode (the
    un-normalized log-sum-exp scales by gamma).
    """
    m_len, n_len = weights.shape[0], weights.shape[1]
    scale = 1.0
    if mode == MODE_PAPER_EXACT:
        scale = gamma
    adj = np.zeros((m_len + 1, n_len + 1))
    adj[m_len, n_len] = upstream
    dmu = np.zeros((m_len, n_len))
    dg = np.zeros((m_len, n_len))
    dh = np.zeros((m_len, n_len))
    for i in range(m_len, 0, -1):
        for j in range(n_len, 0, -1):
            e = adj[i, j]
            dmu[i - 1, j - 1] = e
            d0 = e * scale * weights[i - 1, j - 1, 0]
            d1 = e * scale * weights[i - 1, j - 1, 1]
            d2 = e * scale * weights[i - 1, j - 1, 2]
            adj[i - 1, j - 1] += d0
            adj[i - 1, j] += d1
            adj[i, j - 1] += d2
            dg[i - 1, j - 1] = d1
            dh[i - 1, j - 1] = d2
    return dmu, dg, dh


def _lcs_fill(sim, tau):
    """Fill the thresholded common-subsequence length table.

    Matched cells (sim >= tau) extend the diagonal by their similarity;
    unmatched cells keep the larger of the up/left prefixes, preferring the
    up branch on exact ties.
    """
    tx, tz = sim.shape
    table = np.zeros((tx + 1, tz + 1))
    for i in range(1, tx + 1):
        for j in range(1, tz + 1):
            c = sim[i - 1, j - 1]
            if c >= tau:
                table[i, j] = table[i - 1, j - 1] + c
            else:
                up = table[i - 1, j]
                left = table[i, j - 1]
                table[i, j] = up if up >= left else left
    return table


try:  # pragma: no cover - exercised indirectly through the selected backend
    if _env_disabled():
        raise ImportError("numba disabled via FTCL_DISABLE_NUMBA")
    from numba import njit

    fsd_fill_jit = njit(cache=True)(_fsd_fill)
    fsd_sweep_jit = njit(cache=True)(_fsd_sweep)
    lcs_fill_jit = njit(cache=True)(_lcs_fill)
    fsd_fill = fsd_fill_jit
    fsd_sweep = fsd_sweep_jit
    lcs_fill = lcs_fill_jit
    BACKEND = "numba"
except ImportError:
    fsd_fill_jit = None
    fsd_sweep_jit = None
    lcs_fill_jit = None
    fsd_fill = _fsd_fill
    fsd_sweep = _fsd_sweep
    lcs_fill = _lcs_fill
    BACKEND = "numpy"


def backend_name() -> str:
    """Return which kernel backend was selected at import time."""
    return BACKEND
