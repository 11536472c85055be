"""
Estimators and Kolmogorov-Smirnov tests for hitting-time samples
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats as sps

from cutofflab.core.errors import EmptySample
from cutofflab.schemas.stats import KsResult
from cutofflab.services.specfun import get_drift_evaluator

logger = logging.getLogger(__name__)

Z95 = float(sps.norm.ppf(0.975))


def _as_sample(values: Iterable[float], name: str = "sample") -> np.ndarray:
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size == 0:
        raise EmptySample(f"{name} is empty")
    return arr


@dataclass(frozen=True, eq=False)
class Ecdf:
    """Right-continuous empirical distribution function"""

    sorted_values: np.ndarray

    @classmethod
    def of(cls, values: Iterable[float]) -> "Ecdf":
        return cls(_as_sample(values))

    @property
    def n_samples(self) -> int:
        return int(self.sorted_values.size)

    def evaluate(self, x):
        counts = np.searchsorted(self.sorted_values, x, side="right")
        return counts / self.n_samples

    def quantile(self, p):
        return np.quantile(self.sorted_values, p)


def _two_sample_distance(a: np.ndarray, b: np.ndarray) -> float:
    pooled = np.concatenate([a, b])
    Fa = np.searchsorted(a, pooled, side="right") / a.size
    Fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


def ks_two_sample(a: Iterable[float], b: Iterable[float]) -> KsResult:
    """Sup-distance of the two ECDFs with the asymptotic Kolmogorov p-value"""
    xa = _as_sample(a, "first sample")
    xb = _as_sample(b, "second sample")
    D = _two_sample_distance(xa, xb)
    en = math.sqrt(xa.size * xb.size / (xa.size + xb.size))
    p = float(np.clip(sps.kstwobign.sf(en * D), 0.0, 1.0))
    return KsResult(statistic=D, p_value=p, n_a=xa.size, n_b=xb.size)


def ks_against_cdf(sample: Iterable[float], cdf) -> KsResult:
    x = _as_sample(sample)
    F = np.asarray(cdf(x), dtype=float)
    k = np.arange(1, x.size + 1)
    D = float(max(np.max(k / x.size - F), np.max(F - (k - 1) / x.size)))
    D = min(max(D, 0.0), 1.0)
    p = float(np.clip(sps.kstwobign.sf(math.sqrt(x.size) * D), 0.0, 1.0))
    return KsResult(statistic=D, p_value=p, n_a=x.size, n_b=0)


def ks_against_radial_law(sample: Iterable[float], n: int) -> KsResult:
    """One-sample test against F(r) = I_n(r)/I_n(pi)"""
    x = _as_sample(sample)
    if x[0] < 0 or x[-1] > math.pi:
        raise ValueError("radial sample must lie in [0, pi]")
    return ks_against_cdf(x, get_drift_evaluator(n).radial_cdf)


def wilson_interval(k: int, N: int, z: float = Z95) -> Tuple[float, float]:
    """Score interval for a binomial proportion"""
    if N <= 0:
        raise EmptySample("binomial interval needs N >= 1")
    p = k / N
    denom = 1.0 + z * z / N
    centre = (p + z * z / (2 * N)) / denom
    half = z * math.sqrt(p * (1 - p) / N + z * z / (4 * N * N)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def tail_probability(sample: Iterable[float], threshold: float, upper: bool = True) -> Tuple[float, float, float]:
    """Empirical P[tau > threshold] (or < when upper is False) with its 95% score interval"""
    x = _as_sample(sample)
    k = int(np.count_nonzero(x > threshold if upper else x < threshold))
    lo, hi = wilson_interval(k, x.size)
    return k / x.size, lo, hi


def mean_with_ci(sample: Iterable[float]) -> Dict[str, float]:
    x = _as_sample(sample)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return {"mean": mean, "se": se, "lo": mean - Z95 * se, "hi": mean + Z95 * se, "size": int(x.size)}


def cutoff_profile(samples_by_n: Mapping[int, Sequence[float]], r_grid: Sequence[float]) -> pd.DataFrame:
    """Empirical upper and lower tails around ln(n)/n for each (n, r)"""
    if len(samples_by_n) < 2:
        raise ValueError("cutoff_profile needs at least two values of n")
    rows: List[dict] = []
    for n in sorted(samples_by_n):
        x = _as_sample(samples_by_n[n], f"sample for n={n}")
        scale = math.log(n) / n
        for r in r_grid:
            up, up_lo, up_hi = tail_probability(x, (1.0 + r) * scale, upper=True)
            low, low_lo, low_hi = tail_probability(x, (1.0 - r) * scale, upper=False)
            rows.append({
                "n": n, "r": float(r),
                "upper": up, "upper_lo": up_lo, "upper_hi": up_hi,
                "lower": low, "lower_lo": low_lo, "lower_hi": low_hi,
            })
    return pd.DataFrame(rows)
