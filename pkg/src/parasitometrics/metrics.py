"""Per-patient metric vectors and patient-level diagnosis metrics.

The two central quantities are the per-patient vectors:

* F — false positives per cV, one entry per patient (negatives preferred,
  since mis-annotated parasites can inflate FPR on positives), and
* S — per-patient object-level sensitivity over positive patients.

Their distributions (not pooled ratios) drive threshold calibration and LoD
estimation. Pooled variants are provided as intermediate measures but carry
imbalance warnings, since a single high-parasitemia patient can dominate the
object pool while contributing one patient to clinical accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .datamodel import (
    CohortDataset,
    GroundTruth,
    PatientRecord,
    Species,
    TrueLabel,
    patient_counts,
)
from .errors import (
    NoEligiblePatients,
    NoNegativePatients,
    NoParasiteObjects,
    UnknownPatient,
)
from .stats import DistSummary, summarize

DEFAULT_PARASITEMIA_BINS: tuple[tuple[float, float], ...] = (
    (0.0, 50.0),
    (50.0, 200.0),
    (200.0, 1000.0),
    (1000.0, float("inf")),
)
# Half-open on the left: a bin (lo, hi] holds patients with lo < P <= hi.


class MetricKind(Enum):
    FPR = "fpr"
    OBJECT_SENSITIVITY = "object_sensitivity"


@dataclass(frozen=True)
class MetricDistribution:
    """A per-patient metric vector with its distribution summary.

    Entries are keyed by patient_id; ``excluded`` lists patients that were
    filtered out (e.g. positives whose examined volume sampled no parasites).
    """

    kind: MetricKind
    per_patient: dict[str, float]
    summary: DistSummary
    excluded: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def values(self) -> list[float]:
        # deterministic order regardless of construction order
        return [self.per_patient[k] for k in sorted(self.per_patient)]


@dataclass(frozen=True)
class Stratum:
    label: str
    n_patients: int
    n_detected: int
    value: float | None


@dataclass(frozen=True)
class StratifiedResult:
    """Patient-level sensitivity stratified by parasitemia bin and species."""

    bins: tuple[tuple[float, float], ...]
    parasitemia_strata: tuple[Stratum, ...]
    species_strata: tuple[Stratum, ...]
    overall: float


@dataclass(frozen=True)
class ConfusionMatrix:
    """True species x predicted species counts over patients."""

    labels: tuple[Species, ...]
    counts: dict[Species, dict[Species, int]]

    def total(self) -> int:
        return sum(sum(row.values()) for row in self.counts.values())

    def collapse_falciparum(self) -> dict[str, dict[str, int]]:
        """2x2 collapse: falciparum (incl. mixed) vs everything else.

        Misidentifying falciparum is the highest-stakes error, so the binary
        view is always worth reporting alongside the full matrix.
        """
        def bucket(sp: Species) -> str:
            return "pf" if sp in (Species.FALCIPARUM, Species.MIXED) else "non-pf"

        out = {"pf": {"pf": 0, "non-pf": 0}, "non-pf": {"pf": 0, "non-pf": 0}}
        for true_sp, row in self.counts.items():
            for pred_sp, n in row.items():
                out[bucket(true_sp)][bucket(pred_sp)] += n
        return out


def _eligible(cohort: CohortDataset, negatives_only: bool) -> list[PatientRecord]:
    if negatives_only:
        return [p for p in cohort if p.ground_truth is GroundTruth.NEGATIVE]
    return list(cohort.patients)


def fpr_distribution(
    cohort: CohortDataset, C: float, negatives_only: bool = True
) -> MetricDistribution:
    """Per-patient false positives per cV at score threshold C."""
    patients = _eligible(cohort, negatives_only)
    if not patients:
        raise NoEligiblePatients("no negative patients for FPR distribution")
    warnings = ()
    if not negatives_only and any(
        p.ground_truth is GroundTruth.POSITIVE for p in patients
    ):
        warnings = (
            "FPR computed over positive patients; mis-/unannotated parasites "
            "can inflate these values",
        )
    per = {p.patient_id: patient_counts(p, C).FP for p in patients}
    return MetricDistribution(
        kind=MetricKind.FPR,
        per_patient=per,
        summary=summarize(per.values()),
        warnings=warnings,
    )


def sensitivity_distribution(cohort: CohortDataset, C: float) -> MetricDistribution:
    """Per-patient object sensitivity tp/(tp+fn) over positive patients.

    Positives whose examined volume sampled zero parasite objects cannot have
    a sensitivity; they are excluded and listed in ``excluded``.
    """
    per: dict[str, float] = {}
    excluded: list[str] = []
    for p in cohort.positives:
        counts = patient_counts(p, C)
        n_parasites = counts.tp + counts.fn
        if n_parasites == 0:
            excluded.append(p.patient_id)
        else:
            per[p.patient_id] = counts.tp / n_parasites
    if not per:
        raise NoEligiblePatients("no positive patients with parasite objects")
    return MetricDistribution(
        kind=MetricKind.OBJECT_SENSITIVITY,
        per_patient=per,
        summary=summarize(per.values()),
        excluded=tuple(excluded),
    )


@dataclass(frozen=True)
class PooledSensitivity:
    value: float
    imbalance_warning: str | None
    dominant_patient: str | None


def pooled_object_sensitivity(cohort: CohortDataset, C: float) -> PooledSensitivity:
    """tp/(tp+fn) over all parasite objects pooled across patients.

    Attaches a warning when a single patient contributes more than half of
    the parasite objects, since the pooled number then mostly reflects that
    one patient.
    """
    tp_total = 0
    parasites_total = 0
    contrib: dict[str, int] = {}
    for p in cohort.positives:
        counts = patient_counts(p, C)
        n = counts.tp + counts.fn
        tp_total += counts.tp
        parasites_total += n
        contrib[p.patient_id] = n
    if parasites_total == 0:
        raise NoParasiteObjects("cohort contains no parasite objects")
    dominant = max(contrib, key=contrib.get)
    warning = None
    if contrib[dominant] > 0.5 * parasites_total:
        warning = (
            f"patient {dominant!r} contributes {contrib[dominant]} of "
            f"{parasites_total} parasite objects (>50%); pooled sensitivity is "
            "dominated by one patient"
        )
    else:
        dominant = None
    return PooledSensitivity(
        value=tp_total / parasites_total,
        imbalance_warning=warning,
        dominant_patient=dominant,
    )


def patient_diagnoses(cohort: CohortDataset, op) -> dict[str, GroundTruth]:
    """Diagnose each patient: positive iff N(C) >= T, with N per-cV."""
    out = {}
    for p in cohort:
        n = patient_counts(p, op.C).N
        out[p.patient_id] = (
            GroundTruth.POSITIVE if n >= op.T else GroundTruth.NEGATIVE
        )
    return out


def _bin_label(lo: float, hi: float) -> str:
    hi_s = "inf" if hi == float("inf") else f"{hi:g}"
    return f"({lo:g}, {hi_s}]"


def patient_level_sens_spec(
    cohort: CohortDataset,
    op,
    parasitemia_bins: Sequence[tuple[float, float]] = DEFAULT_PARASITEMIA_BINS,
) -> tuple[StratifiedResult, float | None]:
    """Patient-level sensitivity (stratified) and specificity.

    Specificity is computed over negative patients only; with no negatives it
    is returned as None (absent), never as 0. Sensitivity is stratified both
    by true-parasitemia bin and by species, and the result always carries the
    bin definition — a headline sensitivity without its parasitemia
    distribution and paired specificity is not reportable.
    """
    bins = tuple(parasitemia_bins)
    for (lo1, hi1), (lo2, hi2) in zip(bins, bins[1:]):
        if hi1 != lo2:
            raise ValueError("parasitemia bins must tile (0, inf) without gaps/overlap")
    if bins and (bins[0][0] != 0.0 or bins[-1][1] != float("inf")):
        raise ValueError("parasitemia bins must start at 0 and end at inf")

    diag = patient_diagnoses(cohort, op)

    positives = cohort.positives
    if positives:
        detected = {p.patient_id for p in positives if diag[p.patient_id] is GroundTruth.POSITIVE}
        overall = len(detected) / len(positives)
    else:
        detected = set()
        overall = float("nan")

    para_strata = []
    for lo, hi in bins:
        members = [p for p in positives if lo < p.true_parasitemia <= hi]
        hits = sum(1 for p in members if p.patient_id in detected)
        para_strata.append(
            Stratum(
                label=_bin_label(lo, hi),
                n_patients=len(members),
                n_detected=hits,
                value=(hits / len(members)) if members else None,
            )
        )

    species_strata = []
    for sp in Species:
        if sp is Species.NONE:
            continue
        members = [p for p in positives if p.species is sp]
        if not members:
            continue
        hits = sum(1 for p in members if p.patient_id in detected)
        species_strata.append(
            Stratum(
                label=sp.value,
                n_patients=len(members),
                n_detected=hits,
                value=hits / len(members),
            )
        )

    negatives = cohort.negatives
    specificity = None
    if negatives:
        correct = sum(
            1 for p in negatives if diag[p.patient_id] is GroundTruth.NEGATIVE
        )
        specificity = correct / len(negatives)

    result = StratifiedResult(
        bins=bins,
        parasitemia_strata=tuple(para_strata),
        species_strata=tuple(species_strata),
        overall=overall,
    )
    return result, specificity


def species_confusion(
    cohort: CohortDataset, predicted: Mapping[str, Species]
) -> ConfusionMatrix:
    """Confusion matrix of true vs predicted species over all patients."""
    labels = tuple(Species)
    counts: dict[Species, dict[Species, int]] = {
        t: {p: 0 for p in labels} for t in labels
    }
    for p in cohort:
        if p.patient_id not in predicted:
            raise UnknownPatient(f"no species prediction for patient {p.patient_id!r}")
        counts[p.species][predicted[p.patient_id]] += 1
    extraneous = set(predicted) - {p.patient_id for p in cohort}
    if extraneous:
        raise UnknownPatient(f"predictions for unknown patient(s): {sorted(extraneous)}")
    return ConfusionMatrix(labels=labels, counts=counts)
