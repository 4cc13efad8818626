"""Cholesky factorisation with a fixed, reproducible jitter schedule."""

import numpy as np

from .errors import ConditioningError

# Jitter as a multiple of trace/r, tried in order after a plain attempt.
JITTER_SCHEDULE = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def cholesky(M):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    If the plain factorisation fails, ``eps * trace(M)/r * I`` is added for
    each ``eps`` in :data:`JITTER_SCHEDULE` until one succeeds.
    """
    r = M.shape[0]
    L = _try_cholesky(M)
    if L is not None:
        return L
    base = np.trace(M) / r
    if not np.isfinite(base) or base <= 0:
        raise ConditioningError(f"matrix of size {r} is not positive definite (trace/r = {base})")
    eye = np.eye(r)
    for eps in JITTER_SCHEDULE:
        L = _try_cholesky(M + eps * base * eye)
        if L is not None:
            return L
    raise ConditioningError(f"Cholesky failed for a {r}x{r} system even with jitter {JITTER_SCHEDULE[-1]}*trace/r")


def _try_cholesky(M):
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    return L if np.all(np.isfinite(L)) else None


def logdet_from_cholesky(L):
    return 2.0 * float(np.sum(np.log(np.diag(L))))
