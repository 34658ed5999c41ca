"""Small dense solves: max-norm equilibration and full-pivot elimination.

Works on float arrays and on object arrays of mpmath numbers alike; the
matrices here are 5x5 so plain loops are fine.
"""
from __future__ import annotations

import numpy as np


def equilibrate(a, passes: int = 1):
    """Max-norm scaling: columns, then rows, repeated, then a final column step.

    Returns ``(b, row_scales, col_scales)`` with
    ``b[i, j] = a[i, j] / (row_scales[i] * col_scales[j])`` and every column
    of ``b`` having max magnitude exactly 1.
    """
    b = np.array(a, dtype=float)
    n, m = b.shape
    rs = np.ones(n)
    cs = np.ones(m)

    def col_step():
        c = np.abs(b).max(axis=0)
        c[c == 0] = 1.0
        b[:] = b / c[None, :]
        cs[:] = cs * c

    for _ in range(passes):
        col_step()
        r = np.abs(b).max(axis=1)
        r[r == 0] = 1.0
        b /= r[:, None]
        rs *= r
    col_step()
    return b, rs, cs


def full_pivot_factor(a):
    """Gaussian elimination with complete pivoting.

    Returns ``(lu, row_perm, col_perm, det)``; ``lu`` holds U in its upper
    triangle and the multipliers below it.  Raises ``ZeroDivisionError`` on
    an exactly singular matrix.
    """
    lu = np.array(a, dtype=a.dtype if isinstance(a, np.ndarray) else float, copy=True)
    n = lu.shape[0]
    rp = list(range(n))
    cp = list(range(n))
    det = 1
    for k in range(n):
        sub = np.abs(lu[k:, k:]).astype(float) if lu.dtype != object else np.array(
            [[abs(v) for v in row] for row in lu[k:, k:]], dtype=object
        )
        flat = int(np.argmax(sub)) if lu.dtype != object else max(
            range(sub.size), key=lambda t: sub.flat[t]
        )
        i, j = divmod(flat, n - k)
        i += k
        j += k
        if i != k:
            lu[[k, i], :] = lu[[i, k], :]
            rp[k], rp[i] = rp[i], rp[k]
            det = -det
        if j != k:
            lu[:, [k, j]] = lu[:, [j, k]]
            cp[k], cp[j] = cp[j], cp[k]
            det = -det
        piv = lu[k, k]
        if piv == 0:
            raise ZeroDivisionError("matrix is singular")
        det = det * piv
        for r in range(k + 1, n):
            f = lu[r, k] / piv
            lu[r, k] = f
            lu[r, k + 1:] = lu[r, k + 1:] - f * lu[k, k + 1:]
    return lu, rp, cp, det


def full_pivot_solve(a, b):
    """Solve ``a x = b`` by complete-pivoting elimination."""
    lu, rp, cp, _ = full_pivot_factor(a)
    n = lu.shape[0]
    b = np.asarray(b)
    y = [b[rp[i]] for i in range(n)]
    for i in range(n):
        for j in range(i):
            y[i] = y[i] - lu[i, j] * y[j]
    z = [0] * n
    for i in reversed(range(n)):
        s = y[i]
        for j in range(i + 1, n):
            s = s - lu[i, j] * z[j]
        z[i] = s / lu[i, i]
    x = [0] * n
    for i in range(n):
        x[cp[i]] = z[i]
    return np.array(x, dtype=lu.dtype)


def equilibrated_det(a) -> float:
    """Determinant of the max-norm equilibrated matrix (a scale-free size measure)."""
    b, _, _ = equilibrate(a)
    try:
        return float(full_pivot_factor(b)[3])
    except ZeroDivisionError:
        return 0.0
