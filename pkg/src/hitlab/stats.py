"""Small statistics toolbox shared by the experiments: entropy, empirical
CDF distance, weighted least squares, rank tests, bootstrap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import mannwhitneyu

from .rng import RngStream

#: resamples used by every bootstrap half-width in the package
BOOTSTRAP_RESAMPLES = 1000

#: stream used when no bootstrap stream is supplied, for reproducible reports
DEFAULT_BOOTSTRAP_STREAM = RngStream(seed=0x0B00757A9, stream_id=0)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    half_width: float

    def __post_init__(self):
        if self.half_width < 0.0:
            raise ValueError("half_width must be non-negative")


def entropy_base2(probs) -> float:
    """Shannon entropy -sum p*log2(p) in bits, with 0*log(0) = 0."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty one-dimensional sequence")
    if np.any(p < 0.0):
        raise ValueError("probabilities must be non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, expected 1")
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())


def ks_distance(samples, cdf) -> float:
    """Sup-norm distance between the empirical CDF of `samples` and `cdf`."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    below = f - np.arange(0, n) / n
    above = np.arange(1, n + 1) / n - f
    return float(max(below.max(), above.max()))


def wls_fit(x, y, w=None) -> FitResult:
    """Weighted least-squares line y = slope*x + intercept.

    `half_width` is 1.96 times the slope standard error (residual-based).
    Raises on fewer than 2 points or degenerate x.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be one-dimensional and equally long")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 points to fit a line")
    if w is None:
        w = np.ones(n)
    else:
        w = np.asarray(w, dtype=float)
        if w.shape != x.shape:
            raise ValueError("weights must match x in length")
        if np.any(w <= 0.0):
            raise ValueError("weights must be positive")

    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    if sxx <= 0.0 or sxx < 1e-14 * sw * max(1.0, xbar * xbar):
        raise ValueError("x values are degenerate; slope is not identifiable")
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar

    if n > 2:
        resid = y - slope * x - intercept
        s2 = (w * resid**2).sum() / (n - 2)
        se = np.sqrt(s2 / sxx)
    else:
        se = 0.0
    return FitResult(float(slope), float(intercept), float(1.96 * se))


def binomial_stderr(p_hat: float, n: int) -> float:
    """Standard error of a binomial proportion estimate."""
    if n < 1:
        raise ValueError("n must be positive")
    p = min(max(float(p_hat), 0.0), 1.0)
    return float(np.sqrt(p * (1.0 - p) / n))


def rank_sum_less(a, b) -> float:
    """One-sided Mann-Whitney p-value for `a` stochastically less than `b`."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    return float(mannwhitneyu(a, b, alternative="less").pvalue)


def bootstrap_halfwidth(samples, statistic, rng: RngStream | None = None,
                        resamples: int = BOOTSTRAP_RESAMPLES) -> float:
    """1.96 times the bootstrap standard deviation of `statistic(samples)`."""
    x = np.asarray(samples)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples to bootstrap")
    gen = (rng or DEFAULT_BOOTSTRAP_STREAM).generator()
    vals = np.empty(resamples)
    for i in range(resamples):
        vals[i] = statistic(x[gen.integers(0, n, size=n)])
    return float(1.96 * vals.std(ddof=1))
