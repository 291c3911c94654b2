"""Correlation and small-sample test-statistic helpers.

Conventions used across the toolkit: a Pearson correlation against a
zero-variance series is reported as the caller-supplied fallback
(default 0.0) instead of NaN, and all correlations are clipped to
[-1, 1] to absorb float round-off.
"""

from __future__ import annotations

import numpy as np
from scipy import stats


def has_variance(x) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.ptp(x) > 0.0)


def pearson(x, y, undefined: float = 0.0) -> float:
    """Pearson correlation; `undefined` when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(xc @ xc)
    sy = np.sqrt(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        return undefined
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def rowwise_pearson(a: np.ndarray, b: np.ndarray, undefined: float = 0.0) -> np.ndarray:
    """Pearson correlation of a[i] with b[i] for every row i."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ac = a - a.mean(axis=1, keepdims=True)
    bc = b - b.mean(axis=1, keepdims=True)
    sa = np.sqrt((ac * ac).sum(axis=1))
    sb = np.sqrt((bc * bc).sum(axis=1))
    num = (ac * bc).sum(axis=1)
    denom = sa * sb
    out = np.full(a.shape[0], undefined, dtype=float)
    ok = denom > 0.0
    out[ok] = np.clip(num[ok] / denom[ok], -1.0, 1.0)
    return out


def spearman(x, y, undefined: float = 0.0) -> float:
    """Spearman rank correlation with the same zero-variance convention."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (has_variance(x) and has_variance(y)):
        return undefined
    return pearson(stats.rankdata(x), stats.rankdata(y), undefined=undefined)


def fisher_z_pvalue(r1: float, n1: int, r2: float, n2: int) -> float:
    """Two-sided p for equality of two independent Pearson correlations.

    Uses the Fisher z (atanh) transform with variance 1/(n-3); requires
    n > 3 on both sides, otherwise returns NaN.
    """
    if n1 <= 3 or n2 <= 3:
        return float("nan")
    z1 = np.arctanh(np.clip(r1, -0.999999, 0.999999))
    z2 = np.arctanh(np.clip(r2, -0.999999, 0.999999))
    se = np.sqrt(1.0 / (n1 - 3) + 1.0 / (n2 - 3))
    z = (z1 - z2) / se
    return float(2.0 * stats.norm.sf(abs(z)))


def student_halfwidth(values, level: float = 0.10) -> float:
    """Two-sided Student-t confidence half-width for the mean at `level`."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return 0.0
    t_crit = stats.t.ppf(1.0 - level / 2.0, df=n - 1)
    return float(t_crit * values.std(ddof=1) / np.sqrt(n))


def corr_significance_threshold(n: int, level: float = 0.10) -> float:
    """Critical |r| for the two-sided test of zero correlation on n pairs."""
    if n <= 2:
        return 1.0
    t_crit = stats.t.ppf(1.0 - level / 2.0, df=n - 2)
    return float(t_crit / np.sqrt(n - 2 + t_crit**2))


def standardize(values) -> tuple[np.ndarray, float, float]:
    """Z-score a series; constant series maps to zeros with std reported 1."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    std = float(values.std())
    if std == 0.0:
        return np.zeros_like(values), mean, 1.0
    return (values - mean) / std, mean, std
