"""Compiled inner loops for the dense Hermitian eigensolver.

Everything here works on plain arrays and runs single-threaded with a fixed
loop order, so identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny


@njit(cache=True, nogil=True)
def householder_tridiagonal(a, want_q=True):
    """Reduce a Hermitian matrix to real symmetric tridiagonal form.

    ``a`` is overwritten. Returns ``(d, e, q)`` with ``q^H a q = T`` where
    ``T`` has diagonal ``d`` and real non-negative off-diagonal ``e``.
    Only the lower triangle of ``a`` is read. With ``want_q=False`` the
    returned ``q`` is an empty placeholder.
    """
    n = a.shape[0]
    q = np.eye(n if want_q else 0, dtype=np.complex128)
    for k in range(n - 2):
        m = n - k - 1
        v = np.empty(m, dtype=np.complex128)
        alpha2 = 0.0
        for i in range(m):
            v[i] = a[k + 1 + i, k]
            alpha2 += v[i].real * v[i].real + v[i].imag * v[i].imag
        tail2 = alpha2 - (v[0].real * v[0].real + v[0].imag * v[0].imag)
        if tail2 == 0.0:
            continue
        alpha = math.sqrt(alpha2)
        x0 = abs(v[0])
        phase = v[0] / x0 if x0 > 0.0 else 1.0 + 0.0j
        v[0] += phase * alpha
        vv = 0.0
        for i in range(m):
            vv += v[i].real * v[i].real + v[i].imag * v[i].imag
        w = 2.0 / vv
        # p = w * B v, reading only the lower triangle of the trailing block
        p = np.zeros(m, dtype=np.complex128)
        for i in range(m):
            row = k + 1 + i
            vi = v[i]
            acc = a[row, row].real * vi
            for j in range(i):
                aij = a[row, k + 1 + j]
                acc += aij * v[j]
                p[j] += aij.conjugate() * vi
            p[i] += acc
        for i in range(m):
            p[i] *= w
        vp = 0.0 + 0.0j
        for i in range(m):
            vp += v[i].conjugate() * p[i]
        half = 0.5 * w * vp.real
        for i in range(m):
            p[i] -= half * v[i]
        for i in range(m):
            row = k + 1 + i
            vi = v[i]
            pi = p[i]
            for j in range(i + 1):
                a[row, k + 1 + j] -= vi * p[j].conjugate() + pi * v[j].conjugate()
        a[k + 1, k] = -phase * alpha
        for i in range(k + 2, n):
            a[i, k] = 0.0
        # q <- q (I - w v v^H)
        for r in range(q.shape[0]):
            s = 0.0 + 0.0j
            for j in range(m):
                s += q[r, k + 1 + j] * v[j]
            s *= w
            for j in range(m):
                q[r, k + 1 + j] -= s * v[j].conjugate()

    d = np.empty(n)
    e = np.zeros(n)
    for i in range(n):
        d[i] = a[i, i].real
    # diagonal unitary that makes the sub-diagonal real and non-negative
    phase_j = 1.0 + 0.0j
    for i in range(n - 1):
        sub = a[i + 1, i]
        mag = abs(sub)
        e[i] = mag
        if mag > 0.0:
            phase_j = phase_j * (sub / mag)
        for r in range(q.shape[0]):
            q[r, i + 1] *= phase_j
    return d, e, q


@njit(cache=True, nogil=True)
def tql_implicit(d, e, z, want_vectors, max_iter):
    """Implicit-shift QL on a real symmetric tridiagonal matrix.

    ``d`` holds the diagonal, ``e[i]`` couples ``i`` and ``i + 1`` and
    ``e[n-1]`` is ignored. Rotations are accumulated into ``z`` when
    ``want_vectors`` is true. Returns ``(status, residual)`` where status
    is 0 on success and the residual is the largest unreduced coupling.
    """
    n = d.shape[0]
    if n > 0:
        e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd or abs(e[m]) < _TINY:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                worst = 0.0
                for i in range(n - 1):
                    worst = max(worst, abs(e[i]))
                return 1, worst
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            restart = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    restart = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(z.shape[0]):
                        zf = z[k, i + 1]
                        z[k, i + 1] = s * z[k, i] + c * zf
                        z[k, i] = c * z[k, i] - s * zf
                i -= 1
            if restart:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0, 0.0


@njit(cache=True, nogil=True)
def sturm_count(d, e, x):
    """Number of eigenvalues of the tridiagonal matrix strictly below ``x``."""
    n = d.shape[0]
    count = 0
    q = d[0] - x
    if q < 0.0:
        count += 1
    for i in range(1, n):
        if q == 0.0:
            q = _EPS * (abs(e[i - 1]) + _TINY)
        q = d[i] - x - e[i - 1] * e[i - 1] / q
        if q < 0.0:
            count += 1
    return count


@njit(cache=True, nogil=True)
def bisect_smallest(d, e, k):
    """The ``k`` smallest eigenvalues of a symmetric tridiagonal, by bisection."""
    n = d.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        rad = 0.0
        if i > 0:
            rad += abs(e[i - 1])
        if i < n - 1:
            rad += abs(e[i])
        lo = min(lo, d[i] - rad)
        hi = max(hi, d[i] + rad)
    span = max(hi - lo, _TINY)
    lo -= 2.0 * _EPS * span + _TINY
    hi += 2.0 * _EPS * span + _TINY
    out = np.empty(k)
    left = lo
    for j in range(k):
        a = left
        b = hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if b - a <= 2.0 * _EPS * max(abs(a), abs(b)) + _TINY:
                break
            if sturm_count(d, e, mid) > j:
                b = mid
            else:
                a = mid
        out[j] = 0.5 * (a + b)
        left = a
    return out


@njit(cache=True, nogil=True)
def _gt_factor_solve(d, e, mu, b):
    """Solve ``(T - mu I) y = b`` with partial pivoting (LAPACK gttrf/gttrs)."""
    n = d.shape[0]
    dl = np.empty(max(n - 1, 0))
    du = np.empty(max(n - 1, 0))
    du2 = np.zeros(max(n - 2, 0))
    dd = np.empty(n)
    piv = np.zeros(max(n - 1, 0), dtype=np.int64)
    for i in range(n):
        dd[i] = d[i] - mu
    for i in range(n - 1):
        dl[i] = e[i]
        du[i] = e[i]
    floor = _EPS * (np.max(np.abs(d)) + np.max(np.abs(e)) + abs(mu)) + _TINY
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] == 0.0:
                dd[i] = floor
            fact = dl[i] / dd[i]
            dl[i] = fact
            dd[i + 1] -= fact * du[i]
            piv[i] = 0
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = 1
    for i in range(n):
        if abs(dd[i]) < floor:
            dd[i] = floor if dd[i] >= 0.0 else -floor
    y = b.copy()
    for i in range(n - 1):
        if piv[i] == 0:
            y[i + 1] -= dl[i] * y[i]
        else:
            temp = y[i]
            y[i] = y[i + 1]
            y[i + 1] = temp - dl[i] * y[i]
    y[n - 1] /= dd[n - 1]
    if n > 1:
        y[n - 2] = (y[n - 2] - du[n - 2] * y[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        y[i] = (y[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / dd[i]
    return y


@njit(cache=True, nogil=True)
def inverse_iteration(d, e, values, cluster_gap, sweeps):
    """Eigenvectors of a symmetric tridiagonal for the given eigenvalues.

    Members of a cluster (consecutive values closer than ``cluster_gap``)
    are orthogonalised against earlier members after every solve.
    """
    n = d.shape[0]
    k = values.shape[0]
    y = np.zeros((n, k))
    start = 0
    for j in range(k):
        if j > 0 and values[j] - values[j - 1] > cluster_gap:
            start = j
        # deterministic, non-degenerate starting vector
        x = np.empty(n)
        for i in range(n):
            x[i] = 1.0 + 0.5 * math.sin(1.0 + 0.7 * i + 1.3 * j)
        nx = math.sqrt(np.sum(x * x))
        x /= nx
        for _ in range(sweeps):
            x = _gt_factor_solve(d, e, values[j], x)
            for _pass in range(2):
                for c in range(start, j):
                    dot = 0.0
                    for i in range(n):
                        dot += y[i, c] * x[i]
                    for i in range(n):
                        x[i] -= dot * y[i, c]
            nx = math.sqrt(np.sum(x * x))
            if nx == 0.0:
                for i in range(n):
                    x[i] = math.cos(0.3 * i + j)
                nx = math.sqrt(np.sum(x * x))
            x /= nx
        for i in range(n):
            y[i, j] = x[i]
    return y


@njit(cache=True, nogil=True)
def back_transform(q, z):
    """``q @ z`` for complex ``q`` and real ``z`` with a fixed summation order."""
    n = q.shape[0]
    m = q.shape[1]
    k = z.shape[1]
    out = np.zeros((n, k), dtype=np.complex128)
    for r in range(n):
        for c in range(k):
            s = 0.0 + 0.0j
            for j in range(m):
                s += q[r, j] * z[j, c]
            out[r, c] = s
    return out
