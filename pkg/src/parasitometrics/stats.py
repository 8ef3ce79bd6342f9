"""Distribution summaries used by calibration and LoD estimation.

Conventions, applied uniformly across the package:

* Standard deviations use the population convention (divide by n), including
  the one-sided deviations. Calibration formulas treat sigma as a property of
  the distribution, and a single convention avoids n/(n-1) drift between
  modules.
* One-sided deviations reflect points across the median: sigma_right is the
  population std of {x : x >= median} measured around the median (points equal
  to the median count on both sides, so both sides stay non-empty for
  constant samples).
* Percentiles interpolate linearly between order statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import EmptyInput, NonFiniteInput, OutOfRange

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class DistSummary:
    """Summary statistics of a finite sample, with a percentile accessor."""

    n: int
    mean: float
    median: float
    std: float
    sigma_left: float
    sigma_right: float
    _sorted: tuple[float, ...]

    def percentile(self, q: float) -> float:
        """q-th percentile (q in [0, 100]), linear interpolation."""
        if not (0.0 <= q <= 100.0):
            raise OutOfRange(f"percentile q={q} outside [0, 100]")
        return float(np.percentile(self._sorted, q, method="linear"))


def summarize(values) -> DistSummary:
    """Compute mean/median/std plus the one-sided deviations of a sample."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInput("summarize requires a non-empty sample")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("summarize requires all-finite values")
    med = float(np.median(arr))
    right = arr[arr >= med] - med
    left = arr[arr <= med] - med
    return DistSummary(
        n=int(arr.size),
        mean=float(arr.mean()),
        median=med,
        std=float(arr.std()),  # population convention
        sigma_left=float(np.sqrt(np.mean(left**2))),
        sigma_right=float(np.sqrt(np.mean(right**2))),
        _sorted=tuple(np.sort(arr).tolist()),
    )


def alpha_for_specificity(K: float) -> float:
    """Standard normal quantile alpha with Phi(alpha) = K.

    Uses the stdlib NormalDist().inv_cdf, a rational approximation of the
    inverse CDF (Wichura's algorithm AS241) accurate well beyond 6 decimal
    places. K = 0.95 gives 1.6449 (commonly rounded to 1.65).
    """
    if not (0.0 < K < 1.0) or not math.isfinite(K):
        raise OutOfRange(f"target specificity K={K} outside (0, 1)")
    return _STD_NORMAL.inv_cdf(K)
