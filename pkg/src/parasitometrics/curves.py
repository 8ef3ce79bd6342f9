"""Curve constructions and the corrective re-expressions of misleading metrics.

Object-level ROC/AUC look flattering under heavy distractor:parasite
imbalance, so alongside the standard constructions this module provides:

* ``sliver_roc`` — the leftmost 1/D of an ROC stretched to full width, so TP
  and FP counts weigh equally under a D:1 imbalance;
* ``easy_distractor_experiment`` — shows AUC inflating when easy distractors
  are added while FROC (the clinically meaningful curve) is unchanged;
* ``precision_f1_with_reexpression`` — re-expresses a pooled precision at a
  stated limit-of-detection parasitemia, where it is usually far less
  attractive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import rankdata

from .datamodel import CohortDataset, TrueLabel, patient_counts
from .errors import DegenerateClasses, InvalidInput, InvalidRatio, NoDetections
from .metrics import patient_level_sens_spec

PRECISION_WARNING = (
    "object-level precision and F1 are misleading metrics for reporting "
    "algorithm results: they depend on the dataset's parasite:distractor "
    "balance and do not generalize to clinical parasitemias near the LoD"
)


class CurveKind(Enum):
    OBJECT_ROC = "object_roc"
    SLIVER_ROC = "sliver_roc"
    FROC = "froc"
    PATIENT_ROC = "patient_roc"
    PRECISION_RECALL = "precision_recall"


@dataclass(frozen=True)
class CurvePoints:
    """An ordered curve: (x, y, threshold) triples, thresholds descending."""

    kind: CurveKind
    points: tuple[tuple[float, float, float], ...]
    auc: float | None = None
    notes: tuple[str, ...] = ()
    # FROC: curve values interpolated onto the requested FP-per-cV grid.
    grid_points: tuple[tuple[float, float], ...] | None = None
    # patient ROC: per-point flag marking the clinically salient region
    # (specificity >= 0.9), and the cohort's positive-parasitemia values.
    salient: tuple[bool, ...] | None = None
    parasitemia_distribution: tuple[float, ...] | None = None

    def to_csv_rows(self):
        yield ("threshold", "x", "y")
        for x, y, thr in self.points:
            yield (repr(thr), repr(x), repr(y))


def _pooled_scores(patients):
    scores, is_parasite = [], []
    for p in patients:
        for o in p.objects:
            scores.append(o.score)
            is_parasite.append(o.true_label is TrueLabel.PARASITE)
    return np.asarray(scores, dtype=float), np.asarray(is_parasite, dtype=bool)


def rank_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """AUC via the Mann-Whitney rank statistic (ties handled by midranks)."""
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClasses("AUC needs at least one object of each class")
    ranks = rankdata(np.concatenate([pos_scores, neg_scores]))
    pos_rank_sum = ranks[:n_pos].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _roc_points(scores: np.ndarray, is_parasite: np.ndarray):
    n_pos = int(is_parasite.sum())
    n_neg = int((~is_parasite).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClasses(
            "ROC needs at least one parasite and one distractor object"
        )
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = is_parasite[order]
    tps = np.cumsum(sorted_pos)
    fps = np.cumsum(~sorted_pos)
    # thresholds at distinct scores only: tied objects change state together
    distinct = np.r_[np.nonzero(np.diff(sorted_scores))[0], len(sorted_scores) - 1]
    points = [(0.0, 0.0, math.inf)]  # reject-all sentinel
    for i in distinct:
        points.append(
            (float(fps[i]) / n_neg, float(tps[i]) / n_pos, float(sorted_scores[i]))
        )
    if points[-1][2] > 0.0:
        points.append((1.0, 1.0, 0.0))  # accept-all sentinel (score >= 0 always)
    return tuple(points)


def object_roc(cohort: CohortDataset, pooled: bool = True):
    """Standard object-level ROC (TP fraction vs FP fraction) with rank AUC.

    pooled=True returns one curve over all objects; pooled=False returns a
    dict patient_id -> CurvePoints, one curve per patient with both classes.
    """
    if pooled:
        scores, is_par = _pooled_scores(cohort.patients)
        return CurvePoints(
            kind=CurveKind.OBJECT_ROC,
            points=_roc_points(scores, is_par),
            auc=rank_auc(scores[is_par], scores[~is_par]),
        )
    out = {}
    for p in cohort:
        scores, is_par = _pooled_scores([p])
        if is_par.any() and (~is_par).any():
            out[p.patient_id] = CurvePoints(
                kind=CurveKind.OBJECT_ROC,
                points=_roc_points(scores, is_par),
                auc=rank_auc(scores[is_par], scores[~is_par]),
            )
    if not out:
        raise DegenerateClasses("no patient has both parasite and distractor objects")
    return out


def sliver_roc(roc: CurvePoints, D: float) -> CurvePoints:
    """Restrict an ROC to FP fraction in [0, 1/D] and stretch it to full width.

    With D the distractor-to-parasite ratio, the stretched axes weight TP and
    FP counts equally: the y = x diagonal joins operating points with equal
    numbers of TPs and FPs.
    """
    if not (D > 0) or not math.isfinite(D):
        raise InvalidRatio(f"distractor-to-parasite ratio D={D} must be positive")
    limit = 1.0 / D
    kept = [(x * D, y, thr) for x, y, thr in roc.points if x <= limit + 1e-15]
    # close the sliver at x = 1/D exactly (step curve: carry the last y forward)
    if kept and kept[-1][0] < 1.0:
        inside = [pt for pt in roc.points if pt[0] <= limit + 1e-15]
        kept.append((1.0, inside[-1][1], inside[-1][2]))
    return CurvePoints(
        kind=CurveKind.SLIVER_ROC,
        points=tuple(kept),
        notes=(
            f"x axis = original FP fraction in [0, {limit:g}] stretched by {D:g}; "
            "the y = x diagonal joins operating points with equal TP and FP counts",
        ),
    )


def froc(
    cohort: CohortDataset,
    fp_grid=None,
    pooled_sensitivity: bool = True,
) -> CurvePoints:
    """Free ROC: object sensitivity vs false positives per cV.

    The x axis is the mean FP per cV over negative patients (falling back to
    positives, with a warning, when the cohort has no negatives). y is pooled
    object sensitivity, or the mean per-patient sensitivity when
    pooled_sensitivity=False. When fp_grid is given the curve is also
    interpolated onto it (``grid_points``).
    """
    positives = [p for p in cohort.positives if p.n_parasite_objects > 0]
    if not positives:
        raise DegenerateClasses("FROC needs positive patients with parasite objects")
    fp_patients = cohort.negatives
    notes = ()
    if not fp_patients:
        fp_patients = cohort.patients
        notes = ("no negative patients: FP/cV computed over all patients",)

    all_scores = sorted(
        {o.score for p in cohort for o in p.objects}, reverse=True
    )
    thresholds = [math.inf] + all_scores
    if not thresholds or thresholds[-1] > 0.0:
        thresholds.append(0.0)

    points = []
    for thr in thresholds:
        if math.isinf(thr):  # reject-all sentinel: nothing passes
            points.append((0.0, 0.0, thr))
            continue
        c = min(max(thr, 0.0), 1.0)
        fp_rate = float(np.mean([patient_counts(p, c).FP for p in fp_patients]))
        if pooled_sensitivity:
            tp = sum(patient_counts(p, c).tp for p in positives)
            total = sum(p.n_parasite_objects for p in positives)
            sens = tp / total
        else:
            per = [
                patient_counts(p, c).tp / p.n_parasite_objects for p in positives
            ]
            sens = float(np.mean(per))
        points.append((fp_rate, sens, thr))

    grid_points = None
    if fp_grid is not None:
        grid = list(fp_grid)
        if not grid or any(g <= 0 for g in grid) or sorted(grid) != grid:
            raise InvalidInput("fp_grid must be positive and ascending")
        xs = np.asarray([pt[0] for pt in points])
        ys = np.asarray([pt[1] for pt in points])
        order = np.argsort(xs, kind="stable")
        interp = np.interp(grid, xs[order], ys[order])
        grid_points = tuple((float(g), float(v)) for g, v in zip(grid, interp))

    return CurvePoints(
        kind=CurveKind.FROC, points=tuple(points), notes=notes, grid_points=grid_points
    )


def easy_distractor_experiment(
    cohort: CohortDataset,
    n_easy: int,
    easy_score_max: float,
    fp_grid=(1.0, 10.0, 100.0),
):
    """Inject n_easy low-scoring distractors per patient; AUC inflates, FROC doesn't.

    Injected scores are spread in (0, easy_score_max). Returns
    (auc_before, auc_after, froc_unchanged) where froc_unchanged compares the
    FROC at the fp_grid points before and after for bit-identity. The FROC
    guarantee holds when easy_score_max is below every real object score.
    """
    if n_easy < 0:
        raise InvalidInput("n_easy must be >= 0")
    if not (0.0 < easy_score_max <= 1.0):
        raise InvalidInput("easy_score_max must be in (0, 1]")

    scores, is_par = _pooled_scores(cohort.patients)
    auc_before = rank_auc(scores[is_par], scores[~is_par])
    froc_before = froc(cohort, fp_grid=fp_grid).grid_points

    n_patients = len(cohort.patients)
    total_easy = n_easy * n_patients
    easy_scores = np.array(
        [easy_score_max * (k + 1) / (total_easy + 1) for k in range(total_easy)]
    )
    aug_neg = np.concatenate([scores[~is_par], easy_scores])
    auc_after = rank_auc(scores[is_par], aug_neg)

    # rebuild the cohort with the injected distractors to recompute the FROC
    from .datamodel import CohortDataset as _CD, ObjectRecord, PatientRecord

    new_patients = []
    idx = 0
    for p in cohort.patients:
        injected = []
        for k in range(n_easy):
            injected.append(
                ObjectRecord(
                    object_id=f"{p.patient_id}-easy{k}",
                    score=float(easy_scores[idx]),
                    true_label=TrueLabel.DISTRACTOR,
                )
            )
            idx += 1
        new_patients.append(
            PatientRecord(
                patient_id=p.patient_id,
                ground_truth=p.ground_truth,
                species=p.species,
                true_parasitemia=p.true_parasitemia,
                examined_volume=p.examined_volume,
                wbc_count=p.wbc_count,
                objects=p.objects + tuple(injected),
            )
        )
    augmented = _CD(
        cv_description=cohort.cv_description,
        patients=tuple(new_patients),
        provenance=cohort.provenance + f" +{n_easy} easy distractors/patient",
    )
    froc_after = froc(augmented, fp_grid=fp_grid).grid_points
    froc_unchanged = froc_before == froc_after
    return auc_before, auc_after, froc_unchanged


def patient_roc(cohort: CohortDataset, C: float, T_grid) -> CurvePoints:
    """Patient-level ROC: (1 - specificity, patient sensitivity) swept over T.

    Points with specificity >= 0.9 are flagged as the clinically salient
    region, and the positive-parasitemia distribution is attached because the
    curve depends on it.
    """
    if not cohort.positives or not cohort.negatives:
        raise DegenerateClasses("patient ROC needs both positive and negative patients")
    from .calibration import OperatingPoint

    ts = sorted(set(float(t) for t in T_grid), reverse=True)
    if not ts:
        raise InvalidInput("T_grid must be non-empty")
    points, salient = [], []
    for t in ts:
        strat, spec = patient_level_sens_spec(cohort, OperatingPoint(C=C, T=t))
        points.append((1.0 - spec, strat.overall, t))
        salient.append(spec >= 0.9)
    return CurvePoints(
        kind=CurveKind.PATIENT_ROC,
        points=tuple(points),
        salient=tuple(salient),
        parasitemia_distribution=tuple(
            sorted(p.true_parasitemia for p in cohort.positives)
        ),
        notes=(
            "only the region near clinically relevant operating points "
            "(e.g. specificity >= 0.9) is salient; the curve depends on the "
            "cohort's parasitemia distribution",
        ),
    )


@dataclass(frozen=True)
class PrecisionReport:
    precision: float
    f1: float | None
    precision_at_lod: float
    fp_per_cv: float
    warning: str = PRECISION_WARNING


def precision_f1_with_reexpression(
    cohort: CohortDataset, C: float, lod_parasitemia: float
) -> PrecisionReport:
    """Pooled precision/F1, plus precision re-expressed at a LoD parasitemia.

    The implied FP rate per cV is derived from the cohort (pooled FP count
    over pooled examined volume); precision_at_lod assumes perfect sensitivity
    on a sample at parasitemia L: L / (L + FP/cV).
    """
    if not (lod_parasitemia > 0):
        raise InvalidInput("lod_parasitemia must be > 0")
    tp = fp = fn = 0
    volume = 0.0
    for p in cohort:
        counts = patient_counts(p, C)
        tp += counts.tp
        fp += counts.fp
        fn += counts.fn
        volume += p.examined_volume
    if tp + fp == 0:
        raise NoDetections("no objects pass the score threshold")
    precision = tp / (tp + fp)
    f1 = None
    if tp + fn > 0:
        sens = tp / (tp + fn)
        if precision + sens > 0:
            f1 = 2 * precision * sens / (precision + sens)
    fp_per_cv = fp / volume
    precision_at_lod = lod_parasitemia / (lod_parasitemia + fp_per_cv)
    return PrecisionReport(
        precision=precision,
        f1=f1,
        precision_at_lod=precision_at_lod,
        fp_per_cv=fp_per_cv,
    )
