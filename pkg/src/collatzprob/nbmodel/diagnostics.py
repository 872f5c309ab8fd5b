"""Split R-hat and effective sample size for (chains, draws) arrays."""

import numpy as np


def split_rhat(x) -> float:
    """Potential scale reduction on chains split in half (Gelman et al.)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    half = x.shape[1] // 2
    if half < 2:
        return float("nan")
    parts = np.concatenate([x[:, :half], x[:, x.shape[1] - half :]], axis=0)
    n = parts.shape[1]
    means = parts.mean(axis=1)
    w = parts.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    if w == 0.0:
        return 1.0 if b == 0.0 else float("inf")
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x):
    n = x.size
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(), m)
    return np.fft.irfft(f * np.conj(f), m)[:n] / n


def ess(x) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence truncation."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    m, n = x.shape
    if n < 4:
        return float("nan")
    acov = np.array([_autocov(c) for c in x])
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    if w == 0.0:
        return float(m * n)
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # pair sums P_t = rho[2t] + rho[2t+1]; stop at first negative, force monotone
    total = 0.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        p = rho[t] + rho[t + 1]
        if p < 0:
            break
        p = min(p, prev)
        total += p
        prev = p
    tau = max(-1.0 + 2.0 * total, 1.0 / np.log10(m * n))
    return float(m * n / tau)
