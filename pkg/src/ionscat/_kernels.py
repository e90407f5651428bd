"""Compiled inner loop of the log-derivative propagator."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _solve(a, b, out, work):
    """Solve ``a @ out = b`` for a square right-hand side.

    Gaussian elimination with partial pivoting on row-contiguous updates;
    returns False if ``a`` is singular.  ``a`` and ``b`` are left untouched.
    """
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = a[i, j]
            out[i, j] = b[i, j]
    for col in range(n):
        piv = col
        best = abs(work[col, col])
        for r in range(col + 1, n):
            v = abs(work[r, col])
            if v > best:
                best = v
                piv = r
        if best == 0.0 or not np.isfinite(best):
            return False
        if piv != col:
            for j in range(n):
                t = work[col, j]
                work[col, j] = work[piv, j]
                work[piv, j] = t
                t = out[col, j]
                out[col, j] = out[piv, j]
                out[piv, j] = t
        d = work[col, col]
        for r in range(col + 1, n):
            f = work[r, col] / d
            if f != 0.0:
                for j in range(col + 1, n):
                    work[r, j] -= f * work[col, j]
                for j in range(n):
                    out[r, j] -= f * out[col, j]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            f = work[i, k]
            if f != 0.0:
                for j in range(n):
                    out[i, j] -= f * out[k, j]
        inv_d = 1.0 / work[i, i]
        for j in range(n):
            out[i, j] *= inv_d
    return True


@njit(cache=True)
def _fill_w(k, r, w_sr, n_sr, a0, a4, a6, lfac, two_mu, energy, out):
    """W at grid point k: stored short-range values or the exact tail form."""
    n = out.shape[0]
    if k < n_sr:
        for i in range(n):
            for j in range(n):
                out[i, j] = w_sr[k, i, j]
    else:
        r2 = r * r
        r4 = r2 * r2
        r6 = r4 * r2
        for i in range(n):
            for j in range(n):
                out[i, j] = two_mu * (a0[i, j] + a4[i, j] / r4 + a6[i, j] / r6)
            out[i, i] += lfac[i] / r2
    for i in range(n):
        out[i, i] -= two_mu * energy


@njit(cache=True)
def propagate(w_sr, r_min, h, n_steps, a0, a4, a6, lfac, two_mu, energy, y0):
    """Johnson log-derivative propagation of psi'' = W psi.

    Parameters
    ----------
    w_sr : (n_sr, n, n)
        ``2 mu V + l(l+1)/R^2`` at grid points ``r_min + k h`` for ``k < n_sr``.
    a0, a4, a6, lfac
        Tail coefficients used for ``k >= n_sr``.
    y0 : (n, n)
        Log-derivative at ``r_min``.

    Returns
    -------
    (Y, status)
        ``status`` is -1 on success, otherwise the grid index where the
        propagation became singular.
    """
    n = y0.shape[0]
    n_sr = w_sr.shape[0]
    y = np.empty((n, n))
    w = np.empty((n, n))
    u = np.empty((n, n))
    m = np.empty((n, n))
    t = np.empty((n, n))
    work = np.empty((n, n))
    c = h / 3.0
    h26 = h * h / 6.0

    _fill_w(0, r_min, w_sr, n_sr, a0, a4, a6, lfac, two_mu, energy, w)
    for i in range(n):
        for j in range(n):
            y[i, j] = y0[i, j] + c * w[i, j]

    for k in range(1, n_steps + 1):
        r = r_min + k * h
        _fill_w(k, r, w_sr, n_sr, a0, a4, a6, lfac, two_mu, energy, w)
        if k % 2 == 1:
            for i in range(n):
                for j in range(n):
                    m[i, j] = -h26 * w[i, j]
                m[i, i] += 1.0
            if not _solve(m, w, u, work):
                return y, k
            wt = 4.0
        else:
            for i in range(n):
                for j in range(n):
                    u[i, j] = w[i, j]
            wt = 1.0 if k == n_steps else 2.0
        for i in range(n):
            for j in range(n):
                m[i, j] = h * y[i, j]
            m[i, i] += 1.0
        if not _solve(m, y, t, work):
            return y, k
        for i in range(n):
            for j in range(i, n):
                v = 0.5 * (t[i, j] + t[j, i]) + c * wt * 0.5 * (u[i, j] + u[j, i])
                y[i, j] = v
                y[j, i] = v
    return y, -1
