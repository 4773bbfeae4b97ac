"""Descriptive and inferential statistics used throughout the toolkit:
quartiles with Tukey fences, the integer stay threshold (ceiling of the
trimmed mean), chi-square and exact binomial goodness-of-fit tests, a
Lilliefors-style KS normality test, and Spearman rank correlation.

Conventions are fixed for reproducibility: quartiles use linear
interpolation; whiskers are the most extreme observations inside the
1.5*IQR fences (inclusive); KS estimates mean/std from the sample and its
p-value is the asymptotic Kolmogorov tail (approximate in this setting);
the Spearman p-value uses the t approximation with n-2 degrees of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln, ndtr, stdtr

from .errors import DegenerateDataError


@dataclass
class QuartileSummary:
    q1: float
    q2: float
    q3: float
    iqr: float
    lower_whisker: float
    upper_whisker: float
    outlier_indices: np.ndarray


def quartile_summary(values):
    """Quartiles (linear interpolation), Tukey whiskers, and outliers.

    The lower whisker is the smallest observation >= q1 - 1.5*iqr, the upper
    whisker the largest observation <= q3 + 1.5*iqr, and outliers are the
    observations strictly outside the whiskers.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 4:
        raise DegenerateDataError(
            f"quartile summary needs at least 4 values, got {arr.size}"
        )
    q1, q2, q3 = (float(q) for q in np.percentile(arr, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    lower_fence = q1 - 1.5 * iqr
    upper_fence = q3 + 1.5 * iqr
    lower_whisker = float(np.min(arr[arr >= lower_fence]))
    upper_whisker = float(np.max(arr[arr <= upper_fence]))
    outliers = np.flatnonzero((arr < lower_whisker) | (arr > upper_whisker))
    return QuartileSummary(q1, q2, q3, iqr, lower_whisker, upper_whisker, outliers)


def los_threshold_psi(values):
    """Integer stay threshold: ceiling of the mean of the supplied values
    (callers pass the stay lengths with outliers already excluded)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DegenerateDataError("threshold undefined for an empty vector")
    return int(math.ceil(float(np.mean(arr))))


def chi_square_gof(observed_counts):
    """One-sample chi-square test of equal category probabilities.

    Returns (statistic, p_value) with p from the upper chi-square tail on
    k-1 degrees of freedom (regularized incomplete gamma).
    """
    obs = np.asarray(observed_counts, dtype=np.float64)
    if obs.size < 2:
        raise DegenerateDataError("chi-square test needs at least 2 categories")
    if np.any(obs < 0):
        raise DegenerateDataError("counts must be non-negative")
    total = float(obs.sum())
    if total == 0:
        raise DegenerateDataError("chi-square test undefined for zero total count")
    expected = total / obs.size
    statistic = float(np.sum((obs - expected) ** 2 / expected))
    df = obs.size - 1
    p_value = float(gammaincc(df / 2.0, statistic / 2.0))
    return statistic, p_value


def binomial_test(successes, n, p0=0.5):
    """Exact two-sided one-sample binomial test.

    Sums the point probabilities of every outcome at most as likely as the
    observed count (log-gamma arithmetic, so large n is fine).
    """
    if not (0 <= successes <= n) or n < 1:
        raise DegenerateDataError(
            f"invalid counts: successes={successes}, n={n}"
        )
    if not 0 < p0 < 1:
        raise DegenerateDataError(f"p0 must be in (0,1), got {p0}")
    k = np.arange(n + 1)
    log_pmf = (
        gammaln(n + 1)
        - gammaln(k + 1)
        - gammaln(n - k + 1)
        + k * math.log(p0)
        + (n - k) * math.log1p(-p0)
    )
    # relative tolerance absorbs float noise when deciding "as likely as"
    cutoff = log_pmf[successes] + 1e-7
    p_value = float(np.exp(log_pmf[log_pmf <= cutoff]).sum())
    return min(p_value, 1.0)


def _kolmogorov_sf(t):
    """Asymptotic Kolmogorov survival function Q(t) = 2 sum (-1)^(k-1) exp(-2 k^2 t^2)."""
    if t <= 0.05:
        return 1.0
    total = 0.0
    for k in range(1, 201):
        term = math.exp(-2.0 * k * k * t * t)
        total += -term if k % 2 == 0 else term
        if term < 1e-16:
            break
    return float(min(max(2.0 * total, 0.0), 1.0))


def ks_normality(values):
    """One-sample KS statistic against a normal with mean/std estimated from
    the sample, with the asymptotic Kolmogorov p-value.

    The estimated-parameter setting makes the p-value approximate (it is
    reported as such); the statistic itself is exact.
    """
    arr = np.sort(np.asarray(values, dtype=np.float64))
    n = arr.size
    if n < 8:
        raise DegenerateDataError(f"KS normality test needs n >= 8, got {n}")
    mean = float(np.mean(arr))
    std = float(np.std(arr, ddof=1))
    if std == 0.0:
        raise DegenerateDataError("KS normality test undefined for a constant sample")
    cdf = ndtr((arr - mean) / std)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    statistic = float(max(d_plus, d_minus))
    p_value = _kolmogorov_sf(math.sqrt(n) * statistic)
    return statistic, p_value


def _average_ranks(values):
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # ties share the average of the ranks they span (1-based)
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y):
    """Spearman rank correlation with average ranks for ties.

    Returns (rho, p_value); p uses the t approximation with n-2 degrees of
    freedom (two-sided).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise DegenerateDataError("spearman requires equal-length vectors")
    n = x.size
    if n < 3:
        raise DegenerateDataError(f"spearman needs n >= 3, got {n}")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    sx = np.std(rx)
    sy = np.std(ry)
    if sx == 0.0 or sy == 0.0:
        raise DegenerateDataError("spearman undefined when a vector has zero rank variance")
    rho = float(np.mean((rx - np.mean(rx)) * (ry - np.mean(ry))) / (sx * sy))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p_value = float(2.0 * stdtr(n - 2, -abs(t)))
    return rho, p_value
