"""Independent reference computations used as test oracles.

Nothing here calls into the package's numerical code; each function is a
direct, slow evaluation of the quantity being checked.
"""

import numpy as np
from scipy import stats
from scipy.special import logsumexp


def kde_log_density(values, h, t):
    """log of (1/(D h)) sum phi((t - x)/h) via scipy's normal log-pdf."""
    x = np.asarray(values, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lp = stats.norm.logpdf(t[:, None], loc=x[None, :], scale=h)
    return logsumexp(lp, axis=1) - np.log(x.size)


def brute_force_mode(values, h, lo, hi, n=100_000, chunk=2_000):
    """Argmax of the KDE over an ``n``-point uniform grid on ``[lo, hi]``.

    Sums unnormalized Gaussian kernels directly; the constant factor does
    not move the argmax. Points more than 9 bandwidths from a chunk add
    less than exp(-40) per kernel and are skipped.
    """
    x = np.sort(np.asarray(values, dtype=float))
    grid = np.linspace(lo, hi, n)
    best_t, best_v = None, -np.inf
    for i in range(0, n, chunk):
        g = grid[i:i + chunk]
        a, b = np.searchsorted(x, [g[0] - 9 * h, g[-1] + 9 * h])
        if a == b:
            continue
        u = (g[:, None] - x[None, a:b]) / h
        v = np.exp(-0.5 * u * u).sum(axis=1)
        j = int(np.argmax(v))
        if v[j] > best_v:
            best_t, best_v = g[j], v[j]
    return float(best_t), (hi - lo) / (n - 1)


def fd_log_curvature(values, h, t, step):
    """Central second difference of log p at ``t``."""
    lp = kde_log_density(values, h, [t - step, t, t + step])
    return (lp[0] - 2.0 * lp[1] + lp[2]) / (step * step)


def silverman(values):
    x = np.asarray(values, dtype=float)
    sd = x.std(ddof=1)
    iqr = stats.iqr(x)
    return 0.9 * min(sd, iqr / 1.34) * x.size ** (-0.2)


def gamma_dirichlet_moments(concentration, n, seed):
    """Monte Carlo Dirichlet moments from plain normalized Gamma draws."""
    gen = np.random.default_rng(seed)
    a = np.asarray(concentration, dtype=float)
    g = gen.gamma(a, size=(n, a.size))
    w = g / g.sum(axis=1, keepdims=True)
    return w.mean(axis=0), w.var(axis=0, ddof=1)


def bh_step_up(p, q):
    """Textbook Benjamini-Hochberg rejection set."""
    p = np.asarray(p, dtype=float)
    m = p.size
    order = np.argsort(p)
    passed = p[order] <= q * np.arange(1, m + 1) / m
    k = np.flatnonzero(passed).max() + 1 if passed.any() else 0
    reject = np.zeros(m, dtype=bool)
    reject[order[:k]] = True
    return reject
