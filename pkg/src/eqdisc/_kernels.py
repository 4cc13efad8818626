"""Compiled inner loops for the Dirac spike-and-slab z-sweep.

Everything is expressed through the Gram quantities ``G = D'D``,
``b = D'y`` and ``yy = y'y`` so one evaluation costs O(r^3) in the number of
active columns and never touches the N-length data.
"""

import math

import numpy as np
from numba import njit

# Kept in sync with linalg.JITTER_SCHEDULE; the leading 0 is the plain attempt.
_JITTER = np.array([0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6])

OK = 0
SINGULAR = 1
NEGATIVE_SCALE = 2


@njit(cache=True)
def _chol_shifted(A, shift, L):
    r = A.shape[0]
    for j in range(r):
        s = A[j, j] + shift
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > 0.0) or not math.isfinite(s):
            return False
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, r):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / d
        for i in range(j):
            L[i, j] = 0.0
    return True


@njit(cache=True)
def _chol_jitter(A, L):
    r = A.shape[0]
    base = 0.0
    for i in range(r):
        base += A[i, i]
    base /= r
    for eps in _JITTER:
        if eps > 0.0 and not (base > 0.0 and math.isfinite(base)):
            return False
        if _chol_shifted(A, eps * base, L):
            return True
    return False


@njit(cache=True)
def log_ml(G, b, yy, z, v, gprior, n, a_sig, b_sig, const):
    """Log marginal likelihood of indicator vector ``z`` at slab variance ``v``.

    Returns ``(value, status)``; status is non-zero when the slab system is
    singular or the inverse-gamma scale is non-positive.
    """
    P = z.size
    r = 0
    for i in range(P):
        if z[i]:
            r += 1
    shape = a_sig + 0.5 * n
    if r == 0:
        return const - shape * math.log(b_sig + 0.5 * yy), OK
    idx = np.empty(r, dtype=np.int64)
    k = 0
    for i in range(P):
        if z[i]:
            idx[k] = i
            k += 1
    M = np.empty((r, r))
    L = np.empty((r, r))
    logdet_ainv = 0.0
    if gprior:
        A = np.empty((r, r))
        for i in range(r):
            for j in range(r):
                A[i, j] = G[idx[i], idx[j]] / n
                M[i, j] = G[idx[i], idx[j]] + A[i, j] / v
        if not _chol_jitter(A, L):
            return np.nan, SINGULAR
        for i in range(r):
            logdet_ainv += 2.0 * math.log(L[i, i])
    else:
        for i in range(r):
            for j in range(r):
                M[i, j] = G[idx[i], idx[j]]
            M[i, i] += 1.0 / v
    if not _chol_jitter(M, L):
        return np.nan, SINGULAR
    logdet_m = 0.0
    quad = 0.0
    w = np.empty(r)
    for i in range(r):
        logdet_m += 2.0 * math.log(L[i, i])
        s = b[idx[i]]
        for j in range(i):
            s -= L[i, j] * w[j]
        w[i] = s / L[i, i]
        quad += w[i] * w[i]
    scale = b_sig + 0.5 * (yy - quad)
    if not (scale > 0.0):
        return np.nan, NEGATIVE_SCALE
    value = const - 0.5 * r * math.log(v) + 0.5 * logdet_ainv - 0.5 * logdet_m - shape * math.log(scale)
    return value, OK


@njit(cache=True)
def z_sweep(G, b, yy, z, current, perm, unif, p0, v, gprior, n, a_sig, b_sig, const):
    """One randomly ordered sweep over the indicators, updating ``z`` in place.

    ``current`` is the log marginal likelihood of the incoming ``z``.  Returns
    ``(log_ml, status, bad_index)``.
    """
    for t in range(perm.size):
        i = perm[t]
        z[i] = 1 - z[i]
        alt, status = log_ml(G, b, yy, z, v, gprior, n, a_sig, b_sig, const)
        if status != OK:
            z[i] = 1 - z[i]
            return current, status, i
        if z[i] == 1:
            delta = current - alt
        else:
            delta = alt - current
        if delta > 700.0:
            delta = 700.0
        elif delta < -700.0:
            delta = -700.0
        xi = p0 / (p0 + (1.0 - p0) * math.exp(delta))
        proposed = 1 if unif[t] < xi else 0
        if proposed == z[i]:
            current = alt
        else:
            z[i] = 1 - z[i]
    return current, OK, -1
