"""Numba kernel for the ridged Row-Column iteration.

Used by :func:`globalfactor.completion.rc_complete` when ``ridge > 0``:
the per-column/per-row normal systems are SPD, so each solve is a small
Cholesky handled inline without LAPACK call overhead.  Semantics match the
numpy path up to floating-point summation order.
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ModuleNotFoundError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


def have_kernel() -> bool:
    return _HAVE_NUMBA


if _HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=False)
    def _cholesky_solve(gram, rhs, out):
        """In-place SPD solve; returns False when a pivot is not positive."""
        r = gram.shape[0]
        chol = np.zeros((r, r))
        for i in range(r):
            acc = gram[i, i]
            for k in range(i):
                acc -= chol[i, k] * chol[i, k]
            if acc <= 0.0:
                return False
            chol[i, i] = np.sqrt(acc)
            for j in range(i + 1, r):
                acc2 = gram[j, i]
                for k in range(i):
                    acc2 -= chol[j, k] * chol[i, k]
                chol[j, i] = acc2 / chol[i, i]
        # forward: L y = rhs
        for i in range(r):
            acc = rhs[i]
            for k in range(i):
                acc -= chol[i, k] * out[k]
            out[i] = acc / chol[i, i]
        # backward: L^T x = y
        for i in range(r - 1, -1, -1):
            acc = out[i]
            for k in range(i + 1, r):
                acc -= chol[k, i] * out[k]
            out[i] = acc / chol[i, i]
        return True

    @numba.njit(cache=True, fastmath=False)
    def rc_ridge_iterations(values, mask, col_space, max_iter, tol, ridge):
        """Alternating ridged least squares; returns (A, B, trace, n, ok).

        ``ok`` is False when a Cholesky pivot failed (caller falls back to
        the numpy path).
        """
        n_rows, n_cols = values.shape
        r = col_space.shape[1]
        a_mat = col_space.copy()
        b_mat = np.zeros((r, n_cols))
        trace = np.zeros(max_iter)
        gram = np.zeros((r, r))
        rhs = np.zeros(r)
        sol = np.zeros(r)
        prev = -1.0
        n_done = 0
        for _ in range(max_iter):
            for p in range(n_cols):
                for i in range(r):
                    rhs[i] = 0.0
                    for j in range(r):
                        gram[i, j] = 0.0
                for f in range(n_rows):
                    if mask[f, p] > 0.0:
                        w = values[f, p]
                        for i in range(r):
                            afi = a_mat[f, i]
                            rhs[i] += afi * w
                            for j in range(i, r):
                                gram[i, j] += afi * a_mat[f, j]
                for i in range(r):
                    for j in range(i + 1, r):
                        gram[j, i] = gram[i, j]
                    gram[i, i] += ridge
                if not _cholesky_solve(gram, rhs, sol):
                    return a_mat, b_mat, trace[:n_done], n_done, False
                for i in range(r):
                    b_mat[i, p] = sol[i]
            for f in range(n_rows):
                for i in range(r):
                    rhs[i] = 0.0
                    for j in range(r):
                        gram[i, j] = 0.0
                for p in range(n_cols):
                    if mask[f, p] > 0.0:
                        w = values[f, p]
                        for i in range(r):
                            bip = b_mat[i, p]
                            rhs[i] += bip * w
                            for j in range(i, r):
                                gram[i, j] += bip * b_mat[j, p]
                for i in range(r):
                    for j in range(i + 1, r):
                        gram[j, i] = gram[i, j]
                    gram[i, i] += ridge
                if not _cholesky_solve(gram, rhs, sol):
                    return a_mat, b_mat, trace[:n_done], n_done, False
                for i in range(r):
                    a_mat[f, i] = sol[i]
            err2 = 0.0
            for f in range(n_rows):
                for p in range(n_cols):
                    if mask[f, p] > 0.0:
                        pred = 0.0
                        for i in range(r):
                            pred += a_mat[f, i] * b_mat[i, p]
                        diff = values[f, p] - pred
                        err2 += diff * diff
            err = np.sqrt(err2)
            trace[n_done] = err
            n_done += 1
            if err == 0.0:
                break
            if prev >= 0.0 and (prev - err) < tol * prev:
                break
            prev = err
        return a_mat, b_mat, trace[:n_done], n_done, True
