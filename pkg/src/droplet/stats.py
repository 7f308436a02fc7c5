"""Small statistics helpers shared by the sampler and the experiment driver."""

import numpy as np
from statsmodels.stats.proportion import proportion_confint


def autocorr_time(x, c=5.0):
    """Integrated autocorrelation time with Sokal's automatic window.

    Returns tau such that var(mean) ~ 2*tau*var(x)/n; tau = 0.5 for iid data.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return 0.5
    y = x - x.mean()
    var = y @ y / n
    if var == 0:
        return 0.5
    f = np.fft.rfft(y, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    taus = np.cumsum(acf) - 0.5
    for w in range(1, n):
        if w >= c * taus[w]:
            return float(max(taus[w], 0.5))
    return float(max(taus[-1], 0.5))


def mean_with_error(x):
    """Sample mean and its standard error, corrected for autocorrelation."""
    x = np.asarray(x, dtype=float)
    tau = autocorr_time(x)
    err = np.sqrt(2.0 * tau * x.var() / x.size) if x.size > 1 else np.inf
    return float(x.mean()), float(err), tau


def batch_means_error(values, n_batches=20, stat=np.var):
    """Standard error of ``stat`` estimated from non-overlapping batches."""
    values = np.asarray(values, dtype=float)
    n_batches = max(2, min(n_batches, values.size // 2))
    batches = np.array_split(values, n_batches)
    est = np.array([stat(b) for b in batches])
    return float(est.std(ddof=1) / np.sqrt(n_batches))


def wilson_interval(successes, trials, alpha=0.05):
    if trials == 0:
        return 0.0, 1.0
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return max(0.0, float(lo)), min(1.0, float(hi))
