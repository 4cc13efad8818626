"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code; each oracle takes a
different route to the same quantity.
"""

import math

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln


def _log_ig_pdf(s2, a, b):
    return a * math.log(b) - gammaln(a) - (a + 1) * math.log(s2) - b / s2


def _integrate_log_sigma2(logf, log_lo=-60.0, log_hi=60.0):
    """``log of integral over sigma2 of exp(logf(sigma2))`` via a log-sigma2 substitution.

    The integrand is recentred at its grid maximum and the quadrature is
    confined to where it is not negligible.
    """
    grid = np.linspace(log_lo, log_hi, 4001)
    vals = np.array([logf(math.exp(t)) + t for t in grid])
    k = int(np.argmax(vals))
    peak = vals[k]
    keep = np.flatnonzero(vals - peak > -80.0)
    lo, hi = grid[max(keep[0] - 1, 0)], grid[min(keep[-1] + 1, grid.size - 1)]

    def g(t):
        return math.exp(logf(math.exp(t)) + t - peak)

    val, _ = integrate.quad(g, lo, hi, points=[grid[k]], limit=400, epsabs=0.0, epsrel=1e-12)
    return peak + math.log(val)


def slab_covariance(D_r, slab):
    """Prior structure matrix ``A_0r``: identity or ``N (D_r'D_r)^-1``."""
    r = D_r.shape[1]
    if slab == "gprior":
        return D_r.shape[0] * np.linalg.inv(D_r.T @ D_r)
    return np.eye(r)


def log_ml_sigma2_quadrature(y, D, z, v_s, slab, a, b):
    """Theta integrated through the dense marginal covariance of y, sigma2 by quadrature.

    ``y | sigma2 ~ N(0, sigma2 (I + v_s D_r A_0r D_r'))``.
    """
    y = np.asarray(y, float)
    n = y.size
    z = np.asarray(z, bool)
    if z.any():
        D_r = D[:, z]
        C = np.eye(n) + v_s * D_r @ slab_covariance(D_r, slab) @ D_r.T
    else:
        C = np.eye(n)
    sign, logdet = np.linalg.slogdet(C)
    assert sign > 0
    q = float(y @ np.linalg.solve(C, y))

    def logf(s2):
        return -0.5 * n * math.log(2 * math.pi * s2) - 0.5 * logdet - 0.5 * q / s2 + _log_ig_pdf(s2, a, b)

    return _integrate_log_sigma2(logf)


def log_ml_dblquad_r1(y, d, v_s, a0, a, b):
    """Brute 2-D quadrature over (theta, sigma2) for a single active column.

    ``a0`` is the scalar prior structure ``A_0r``.
    """
    y = np.asarray(y, float)
    d = np.asarray(d, float)
    n = y.size
    dd, dy, yy = float(d @ d), float(d @ y), float(y @ y)
    prec = dd + 1.0 / (v_s * a0)
    m = dy / prec

    def log_joint(theta, s2):
        rss = yy - 2 * theta * dy + theta * theta * dd
        return (-0.5 * n * math.log(2 * math.pi * s2) - 0.5 * rss / s2
                - 0.5 * math.log(2 * math.pi * s2 * v_s * a0) - 0.5 * theta * theta / (s2 * v_s * a0)
                + _log_ig_pdf(s2, a, b))

    # locate the sigma2 mass on a grid of the theta-profile
    grid = np.linspace(-60, 60, 4001)
    prof = np.array([log_joint(m, math.exp(t)) + t for t in grid])
    peak = prof.max()
    keep = np.flatnonzero(prof - peak > -80.0)
    lo, hi = grid[max(keep[0] - 1, 0)], grid[min(keep[-1] + 1, grid.size - 1)]

    def inner(t):
        s2 = math.exp(t)
        sd = math.sqrt(s2 / prec)
        f = lambda th: math.exp(log_joint(th, s2) + t - peak)
        val, _ = integrate.quad(f, m - 40 * sd, m + 40 * sd, points=[m], epsabs=0.0, epsrel=1e-12, limit=200)
        return val

    val, _ = integrate.quad(inner, lo, hi, points=[grid[int(np.argmax(prof))]], epsabs=0.0, epsrel=1e-11, limit=400)
    return peak + math.log(val)


def greedy_bruteforce(D, y, k):
    """Greedy forward selection by explicit lstsq refits."""
    chosen = []
    for _ in range(k):
        best, best_mse = None, np.inf
        for j in range(D.shape[1]):
            if j in chosen:
                continue
            S = chosen + [j]
            coef, *_ = np.linalg.lstsq(D[:, S], y, rcond=None)
            mse = float(np.mean((y - D[:, S] @ coef) ** 2))
            if mse < best_mse:
                best, best_mse = j, mse
        chosen.append(best)
    return chosen


def mpsrf_direct(chains):
    """Brooks-Gelman MPSRF with an explicit inverse, for well-posed inputs."""
    x = np.stack([np.asarray(c, float) for c in chains])
    m, n, p = x.shape
    means = x.mean(axis=1)
    W = sum(np.cov(c, rowvar=False, ddof=1).reshape(p, p) for c in x) / m
    B_n = np.cov(means, rowvar=False, ddof=1).reshape(p, p)
    lam = np.max(np.real(np.linalg.eigvals(np.linalg.inv(W) @ B_n)))
    return (n - 1) / n + (m + 1) / m * lam


def nig_posterior(y, X, V0, a, b):
    """Normal-inverse-gamma posterior for ``y ~ N(X theta, s2 I), theta ~ N(0, s2 V0)``.

    Returns posterior mean of theta, E[sigma2], and the covariance of theta.
    """
    n = y.size
    Vn = np.linalg.inv(np.linalg.inv(V0) + X.T @ X)
    mn = Vn @ X.T @ y
    an = a + n / 2
    bn = b + 0.5 * (y @ y - mn @ np.linalg.inv(Vn) @ mn)
    e_s2 = bn / (an - 1)
    return mn, e_s2, e_s2 * Vn


def inv_gamma(a, b):
    return stats.invgamma(a, scale=b)


def geweke_zscores(forward, successive, n_batches=200):
    """Marginal-conditional vs successive-conditional mean comparison.

    ``forward`` holds independent draws; ``successive`` a correlated chain,
    whose standard error comes from batch means.
    """
    M = successive.shape[0]
    bm = successive[: M - M % n_batches].reshape(n_batches, -1, successive.shape[1]).mean(axis=1)
    se = np.sqrt(forward.var(axis=0, ddof=1) / forward.shape[0] + bm.var(axis=0, ddof=1) / n_batches)
    return (successive.mean(axis=0) - forward.mean(axis=0)) / se
