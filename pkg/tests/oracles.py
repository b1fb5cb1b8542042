"""Independent reference computations used by several test modules."""

import numpy as np


def importance_posterior_mean(world, z, t, schedule, cond=None, N=1_000_000, seed=0, chunk=200_000):
    """Monte-Carlo ``E[x0 | z_t]``: draw x0 from the (sub-)mixture, weight by the forward likelihood."""
    g = np.random.default_rng(seed)
    a = np.sqrt(schedule.alpha_bar[t])
    v = 1 - schedule.alpha_bar[t]
    w = world.weights.copy()
    if cond is not None:
        w[np.arange(world.C) != cond] = 0
    w = (w / w.sum()).reshape(-1)
    mu = world.means.reshape(len(w), -1)
    zf = np.asarray(z).reshape(-1)
    logws, sums = [], []
    num = np.zeros_like(zf)
    den = 0.0
    shift = None
    for start in range(0, N, chunk):
        m = min(chunk, N - start)
        comp = g.choice(len(w), size=m, p=w)
        x0 = mu[comp] + world.sigma_data * g.standard_normal((m, mu.shape[1]))
        lw = -((zf - a * x0) ** 2).sum(1) / (2 * v)
        if shift is None:
            shift = lw.max()
        e = np.exp(lw - shift)
        num += e @ x0
        den += e.sum()
    return (num / den).reshape(np.shape(z))


def fd_score_eps(world, z, t, schedule, cond=None, h=1e-5):
    """``-sqrt(1 - ab) * grad log q_t`` by central differences on the closed-form log-density."""
    from dptm.oracle import log_marginal

    z = np.asarray(z, dtype=np.float64)
    grad = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        zp = z.copy()
        zm = z.copy()
        zp[idx] += h
        zm[idx] -= h
        grad[idx] = (log_marginal(world, zp, t, cond, schedule) - log_marginal(world, zm, t, cond, schedule)) / (2 * h)
    return -np.sqrt(1 - schedule.alpha_bar[t]) * grad


def eigen_nuclear_norm(P):
    """Nuclear norm via the eigenvalues of ``P^T P``."""
    P = np.asarray(P, dtype=np.float64)
    lam = np.linalg.eigvalsh(P.T @ P)
    return float(np.sqrt(np.clip(lam, 0, None)).sum())
