"""Dense real symmetric eigensolver.

Householder reduction to tridiagonal form followed by the implicit-shift QL
iteration, both operating in place on a copy of the input.  The inner loops
are compiled with numba; the algorithm itself is the classic tred2/tqli pair.
"""

import math

import numba
import numpy as np

MAX_QL_ITERATIONS = 30


class EigensolverError(RuntimeError):
    """Raised when the QL iteration does not converge."""


@numba.njit(cache=True)
def _tred2(z, d, e, want_vectors):
    n = z.shape[0]
    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        if l > 0:
            scale = 0.0
            for k in range(i):
                scale += abs(z[i, k])
            if scale == 0.0:
                e[i] = z[i, l]
            else:
                for k in range(i):
                    z[i, k] /= scale
                    h += z[i, k] * z[i, k]
                f = z[i, l]
                g = -math.sqrt(h) if f >= 0.0 else math.sqrt(h)
                e[i] = scale * g
                h -= f * g
                z[i, l] = f - g
                # e[:i] = (A[:i, :i] @ u) / h using only the lower triangle, row-wise
                for j in range(i):
                    if want_vectors:
                        z[j, i] = z[i, j] / h
                    e[j] = 0.0
                for j in range(i):
                    uj = z[i, j]
                    acc = z[j, j] * uj
                    for k in range(j):
                        acc += z[j, k] * z[i, k]
                        e[k] += z[j, k] * uj
                    e[j] += acc
                f = 0.0
                for j in range(i):
                    e[j] /= h
                    f += e[j] * z[i, j]
                hh = f / (h + h)
                for j in range(i):
                    f = z[i, j]
                    g = e[j] - hh * f
                    e[j] = g
                    for k in range(j + 1):
                        z[j, k] -= f * e[k] + g * z[i, k]
        else:
            e[i] = z[i, l]
        d[i] = h
    d[0] = 0.0
    e[0] = 0.0
    if want_vectors:
        work = np.zeros(n)
        for i in range(n):
            if d[i] != 0.0:
                for j in range(i):
                    work[j] = 0.0
                for k in range(i):
                    zik = z[i, k]
                    for j in range(i):
                        work[j] += zik * z[k, j]
                for k in range(i):
                    zki = z[k, i]
                    for j in range(i):
                        z[k, j] -= zki * work[j]
            d[i] = z[i, i]
            z[i, i] = 1.0
            for j in range(i):
                z[j, i] = 0.0
                z[i, j] = 0.0
    else:
        for i in range(n):
            d[i] = z[i, i]


@numba.njit(cache=True)
def _tqli(d, e, zt, want_vectors, max_iter):
    """Returns 0 on success, or 1 + the index that failed to converge."""
    n = d.shape[0]
    eps = 2.220446049250313e-16
    for i in range(1, n):
        e[i - 1] = e[i]
    if n > 0:
        e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                return l + 1
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (abs(r) if g >= 0.0 else -abs(r)))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    # zt holds eigenvectors as rows so the rotation is contiguous
                    for k in range(n):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


def symmetric_eig(a, want_vectors=True):
    """Eigenvalues (ascending) and optionally orthonormal eigenvectors.

    Parameters
    ----------
    a : (m, m) array_like
        Real symmetric matrix. Only the lower triangle is read.
    want_vectors : bool
        When False the transformation matrix is not accumulated, which
        roughly halves the cost.

    Returns
    -------
    values : ndarray
    vectors : ndarray or None
        Columns are the eigenvectors, in the order of ``values``.
    """
    z = np.array(a, dtype=np.float64, order="C", copy=True)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {z.shape}")
    m = z.shape[0]
    if m == 0:
        return np.zeros(0), (np.zeros((0, 0)) if want_vectors else None)
    if not np.all(np.isfinite(z)):
        raise ValueError("matrix has non-finite entries")
    d = np.zeros(m)
    e = np.zeros(m)
    _tred2(z, d, e, want_vectors)
    zt = np.ascontiguousarray(z.T) if want_vectors else z
    status = _tqli(d, e, zt, want_vectors, MAX_QL_ITERATIONS)
    if status:
        raise EigensolverError(
            f"QL iteration did not converge for eigenvalue {status - 1} "
            f"after {MAX_QL_ITERATIONS} sweeps"
        )
    order = np.argsort(d, kind="stable")
    values = d[order]
    if not want_vectors:
        return values, None
    return values, np.ascontiguousarray(zt[order].T)
