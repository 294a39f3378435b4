"""Monte Carlo summaries and goodness-of-fit statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import DomainError

__all__ = [
    "EmpiricalSummary",
    "summarize_mean",
    "summarize_proportion",
    "ks_statistic",
    "ks_two_sample",
    "ks_critical",
    "ks_two_sample_critical",
    "chi_square_gof",
]


@dataclass(frozen=True)
class EmpiricalSummary:
    """Monte Carlo estimate with standard error and a ``z``-sigma confidence radius."""

    estimate: float
    n: int
    std_error: float
    ci_radius: float
    z: float = 3.0

    def covers(self, value):
        return abs(value - self.estimate) <= self.ci_radius

    def margin(self, value):
        """Distance to ``value`` in units of the confidence radius."""
        if self.ci_radius == 0:
            return 0.0 if value == self.estimate else math.inf
        return abs(value - self.estimate) / self.ci_radius


def summarize_mean(samples, z=3.0):
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise DomainError("need at least two samples")
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    return EmpiricalSummary(float(x.mean()), int(x.size), se, z * se, z)


def summarize_proportion(hits, n, p_ref=None, z=3.0):
    """Binomial proportion; the standard error uses ``p_ref`` when given."""
    est = hits / n
    p = est if p_ref is None else p_ref
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return EmpiricalSummary(float(est), int(n), se, z * se, z)


def ks_statistic(samples, cdf):
    """One-sample Kolmogorov-Smirnov distance to a vectorised ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov distance."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate((a, b))
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n, alpha=0.05):
    """Exact critical value of the one-sample statistic at level ``alpha``."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def ks_two_sample_critical(n, m, alpha=0.05):
    """Asymptotic two-sample critical value ``c(alpha) sqrt((n + m) / (n m))``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def chi_square_gof(samples, edges, probs):
    """Pearson chi-square test of binned counts against bin probabilities.

    ``edges`` has ``len(probs) + 1`` entries; mass outside the outer edges is
    folded into the first and last bins by the caller.  Returns
    ``(statistic, p_value)`` with ``len(probs) - 1`` degrees of freedom.
    """
    x = np.asarray(samples, dtype=float)
    probs = np.asarray(probs, dtype=float)
    counts = np.histogram(np.clip(x, edges[0], edges[-1]), bins=edges)[0]
    expected = x.size * probs / probs.sum()
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return stat, float(stats.chi2.sf(stat, probs.size - 1))
