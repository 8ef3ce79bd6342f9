"""Poisson statistics of rare parasites in a finite examined volume.

At true parasitemia P per cV, the parasite count in an examined volume V is
Poisson with lambda = P * V. Two consequences matter:

* Diagnosis: if V is too small, a predictable fraction of positive patients
  present zero parasites in the examined volume, capping patient-level
  sensitivity before the detector even runs.
* Quantitation: the count's coefficient of variation 1/sqrt(P*V) is an
  irreducible relative-error floor on any parasitemia estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import poisson as _poisson

from .errors import InvalidInput


@dataclass(frozen=True)
class PoissonCurve:
    """Count pmfs for one parasitemia across several examined volumes."""

    parasitemia: float
    volumes: tuple[float, ...]
    pmf_points: tuple[tuple[tuple[int, float], ...], ...]  # one pmf per volume

    def to_csv_rows(self):
        yield ("volume", "k", "probability")
        for v, pmf in zip(self.volumes, self.pmf_points):
            for k, prob in pmf:
                yield (repr(v), k, repr(prob))


def count_pmf(P: float, V: float, k_max: int | None = None):
    """Poisson pmf of the parasite count in volume V at parasitemia P.

    Computed in log space (stable for large lambda and k). k_max defaults to
    the smallest k with cumulative probability >= 1 - 1e-9.
    """
    if P < 0 or not math.isfinite(P):
        raise InvalidInput(f"parasitemia P={P} must be finite and >= 0")
    if V <= 0 or not math.isfinite(V):
        raise InvalidInput(f"volume V={V} must be finite and > 0")
    lam = P * V
    if lam == 0.0:
        return [(0, 1.0)]

    def prob(k: int) -> float:
        return math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))

    out = []
    if k_max is not None:
        if k_max < 0:
            raise InvalidInput("k_max must be >= 0")
        return [(k, prob(k)) for k in range(k_max + 1)]
    cumulative = 0.0
    k = 0
    while cumulative < 1.0 - 1e-9:
        pk = prob(k)
        out.append((k, pk))
        cumulative += pk
        k += 1
    return out


def poisson_curve(P: float, volumes) -> PoissonCurve:
    vols = tuple(float(v) for v in volumes)
    return PoissonCurve(
        parasitemia=P,
        volumes=vols,
        pmf_points=tuple(tuple(count_pmf(P, v)) for v in vols),
    )


def min_volume_for_detection(P: float, k_min: int, confidence: float) -> float:
    """Smallest V with Pr[count >= k_min | lambda = P*V] >= confidence.

    Solved by bisection to 1e-6 relative tolerance (no closed form exists for
    k_min >= 2).
    """
    if P <= 0 or not math.isfinite(P):
        raise InvalidInput(f"parasitemia P={P} must be finite and > 0")
    if k_min < 1:
        raise InvalidInput("k_min must be >= 1")
    if not (0.0 < confidence < 1.0):
        raise InvalidInput(f"confidence={confidence} must be in (0, 1)")

    def attained(v: float) -> float:
        return float(_poisson.sf(k_min - 1, P * v))

    lo, hi = 0.0, 1.0 / P
    while attained(hi) < confidence:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if attained(mid) >= confidence:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-6 * hi:
            break
    return hi


def quantitation_relative_poisson_error(P: float, V: float) -> float:
    """Coefficient of variation 1/sqrt(P*V) of the sampled parasite count."""
    if P <= 0 or V <= 0 or not (math.isfinite(P) and math.isfinite(V)):
        raise InvalidInput("P and V must be finite and > 0")
    return 1.0 / math.sqrt(P * V)
