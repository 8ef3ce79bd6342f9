"""Threshold calibration, limit-of-detection estimation, and operating-point tuning.

The detector exposes two hyperparameters: C, a score threshold classifying
objects as parasites, and T, a per-cV count threshold diagnosing a patient as
positive when N = TP + FP >= T.

Given the per-patient FPR distribution F on validation negatives, T is set to
hit a target specificity K. Four methods are supported:

* gaussian:   T = mean(F) + alpha * std(F), alpha the normal quantile of K
* robust:     T = median(F) + alpha * sigma_right(F)    (skew-tolerant)
* percentile: T = Kth percentile of F (linear interpolation)
* manual:     T supplied by a human from a scatter of per-patient FP counts

The LoD estimate follows from requiring a just-barely-positive diagnosis of a
clean (5th-percentile FPR) sample with average sensitivity:

    L = 3.3 * std(F) / mean(S)            (gaussian; optionally +1 in the
                                           numerator to keep L >= 1/mean(S))
    L = 1.65 * (sigma_L(F) + sigma_R(F)) / median(S)     (robust)

A pessimistic variant replaces the denominator with mean(S) - beta * std(S).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .datamodel import CohortDataset
from .errors import (
    AllCandidatesDegenerate,
    DegenerateDataError,
    InsufficientPatients,
    MissingManualT,
    OutOfRange,
    ZeroSensitivity,
)
from .metrics import MetricDistribution, fpr_distribution, sensitivity_distribution
from .stats import alpha_for_specificity


class CalibrationMethod(Enum):
    GAUSSIAN = "gaussian"
    ROBUST = "robust"
    PERCENTILE = "percentile"
    MANUAL_SCATTER = "manual"


@dataclass(frozen=True)
class OperatingPoint:
    """The hyperparameter pair: object-score threshold C, per-cV count threshold T."""

    C: float
    T: float

    def __post_init__(self):
        if not (0.0 <= self.C <= 1.0) or not math.isfinite(self.C):
            raise OutOfRange(f"C={self.C} outside [0, 1]")
        if self.T < 0 or not math.isfinite(self.T):
            raise OutOfRange(f"T={self.T} must be finite and >= 0")


@dataclass(frozen=True)
class CalibrationConfig:
    K: float = 0.95
    method: CalibrationMethod = CalibrationMethod.GAUSSIAN
    beta: float | None = None            # pessimistic LoD denominator knob
    plus_one: bool = False               # +1 in the LoD numerator
    manual_T: float | None = None        # required for MANUAL_SCATTER

    def __post_init__(self):
        if not (0.0 < self.K < 1.0):
            raise OutOfRange(f"target specificity K={self.K} outside (0, 1)")
        if self.beta is not None and self.beta < 0:
            raise OutOfRange("beta must be >= 0")


@dataclass(frozen=True)
class LodEstimate:
    """Estimated limit of detection, parasites per cV, with its inputs echoed."""

    L: float
    method: CalibrationMethod
    mu_S: float
    sigma_F: float | None = None
    sigma_left_F: float | None = None
    sigma_right_F: float | None = None
    plus_one: bool = False
    beta: float | None = None


def fp_scatter(F: MetricDistribution) -> list[tuple[str, float]]:
    """Sorted per-patient FP counts per cV, for the manual scatter method."""
    return sorted(F.per_patient.items(), key=lambda kv: (kv[1], kv[0]))


def calibrate_threshold(F: MetricDistribution, cfg: CalibrationConfig) -> float:
    """Count threshold T (per cV) hitting target specificity K on F."""
    s = F.summary
    method = cfg.method
    if method is CalibrationMethod.MANUAL_SCATTER:
        if cfg.manual_T is None:
            raise MissingManualT(
                "manual-scatter calibration needs an explicit T; inspect "
                "fp_scatter(F) and supply manual_T"
            )
        return float(cfg.manual_T)
    if method in (CalibrationMethod.GAUSSIAN, CalibrationMethod.ROBUST) and s.n < 2:
        raise InsufficientPatients(
            f"{method.value} calibration needs >= 2 patients, got {s.n}"
        )
    if method is CalibrationMethod.GAUSSIAN:
        return s.mean + alpha_for_specificity(cfg.K) * s.std
    if method is CalibrationMethod.ROBUST:
        return s.median + alpha_for_specificity(cfg.K) * s.sigma_right
    return s.percentile(100.0 * cfg.K)


def estimate_lod(
    F: MetricDistribution, S: MetricDistribution, cfg: CalibrationConfig
) -> LodEstimate:
    """Limit of detection (parasites per cV) from the F and S distributions."""
    fs, ss = F.summary, S.summary
    if cfg.method is CalibrationMethod.ROBUST:
        if fs.n < 2:
            raise InsufficientPatients("robust LoD needs >= 2 negative patients")
        denom = ss.median
        if cfg.beta is not None:
            denom = ss.median - cfg.beta * ss.std
        if denom <= 0:
            raise ZeroSensitivity(f"LoD denominator {denom} <= 0")
        numer = 1.65 * (fs.sigma_left + fs.sigma_right)
        if cfg.plus_one:
            numer += 1.0
        return LodEstimate(
            L=numer / denom,
            method=cfg.method,
            mu_S=denom,
            sigma_left_F=fs.sigma_left,
            sigma_right_F=fs.sigma_right,
            plus_one=cfg.plus_one,
            beta=cfg.beta,
        )
    if fs.n < 2:
        raise InsufficientPatients("LoD needs >= 2 negative patients")
    denom = ss.mean
    if cfg.beta is not None:
        denom = ss.mean - cfg.beta * ss.std
    if denom <= 0:
        raise ZeroSensitivity(f"LoD denominator {denom} <= 0")
    numer = 3.3 * fs.std
    if cfg.plus_one:
        numer += 1.0
    return LodEstimate(
        L=numer / denom,
        method=cfg.method,
        mu_S=denom,
        sigma_F=fs.std,
        plus_one=cfg.plus_one,
        beta=cfg.beta,
    )


def lod_breakeven_check(L: float, F_mu: float, F_sigma: float, S_mu: float) -> float:
    """Residual of the LoD derivation's breakeven condition.

    At the LoD, a clean positive sample (5th-percentile FPR) must just reach
    the diagnosis threshold: L*mu(S) + mu(F) - 1.65*sigma(F) = mu(F) +
    1.65*sigma(F). The residual is zero exactly when L = 3.3*sigma(F)/mu(S).
    """
    if S_mu <= 0:
        raise ZeroSensitivity("S_mu must be > 0")
    n_at_lod = L * S_mu + F_mu - 1.65 * F_sigma
    threshold = F_mu + 1.65 * F_sigma
    return n_at_lod - threshold


@dataclass(frozen=True)
class TuningRow:
    C: float
    T: float
    lod: float
    mu_F: float
    sigma_F: float
    sigma_left_F: float
    sigma_right_F: float
    mu_S: float


def default_c_grid(cohort: CohortDataset | None = None) -> list[float]:
    """101 evenly spaced thresholds, plus observed scores when few enough."""
    grid = {round(i / 100.0, 2) for i in range(101)}
    if cohort is not None:
        observed = {o.score for p in cohort for o in p.objects}
        if len(observed) < 512:
            grid |= observed
    return sorted(grid)


def tune_operating_point(
    train_positives: CohortDataset,
    validation_negatives: CohortDataset,
    validation_positives: CohortDataset | None,
    K: float,
    C_grid,
    cfg: CalibrationConfig | None = None,
) -> tuple[OperatingPoint, list[TuningRow]]:
    """Exhaustive sweep over C: calibrate T for specificity K, pick lowest LoD.

    S is computed over validation positives when given, else (less ideal but
    workable) over the training positives. Ties in LoD break toward larger C.
    """
    cfg = cfg or CalibrationConfig()
    cfg = CalibrationConfig(
        K=K, method=cfg.method, beta=cfg.beta, plus_one=cfg.plus_one,
        manual_T=cfg.manual_T,
    )
    grid = sorted(set(float(c) for c in C_grid))
    if not grid:
        raise OutOfRange("C_grid must be non-empty")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise OutOfRange("C_grid values must lie in [0, 1]")
    s_cohort = validation_positives if validation_positives is not None else train_positives

    table: list[TuningRow] = []
    best: TuningRow | None = None
    for c in grid:
        try:
            F = fpr_distribution(validation_negatives, c, negatives_only=True)
            S = sensitivity_distribution(s_cohort, c)
            T = calibrate_threshold(F, cfg)
            lod = estimate_lod(F, S, cfg)
        except DegenerateDataError:
            continue
        row = TuningRow(
            C=c,
            T=T,
            lod=lod.L,
            mu_F=F.summary.mean,
            sigma_F=F.summary.std,
            sigma_left_F=F.summary.sigma_left,
            sigma_right_F=F.summary.sigma_right,
            mu_S=lod.mu_S,
        )
        table.append(row)
        if best is None or row.lod < best.lod or (row.lod == best.lod and row.C > best.C):
            best = row
    if best is None:
        raise AllCandidatesDegenerate(
            "no C in the grid produced a well-defined (T, LoD) pair"
        )
    return OperatingPoint(C=best.C, T=best.T), table
