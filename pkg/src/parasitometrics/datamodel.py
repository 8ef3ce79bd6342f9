"""Core domain types, dataset file formats, and validated ingestion.

A cohort is a set of patients; each patient owns the detector-scored objects
found in their examined sample volume. All rates downstream are normalized to
the clinically relevant unit of substrate ("cV", e.g. 1 uL of blood), and
``examined_volume`` is stored directly in cV units so that per-cV rescaling is
always ``count / examined_volume``.

File formats (CSV pair or a single JSON document) are documented in the
module-level ``ingest_cohort`` / ``export_cohort`` functions.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import (
    DuplicatePatient,
    LabelContradiction,
    MissingPatient,
    OutOfRange,
    SchemaError,
)


class GroundTruth(Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"


class Species(Enum):
    FALCIPARUM = "pf"
    VIVAX = "pv"
    OVALE = "po"
    MALARIAE = "pm"
    KNOWLESI = "pk"
    MIXED = "mixed"
    NONE = "none"


class TrueLabel(Enum):
    PARASITE = "parasite"
    DISTRACTOR = "distractor"


@dataclass(frozen=True, slots=True)
class ObjectRecord:
    """One detected object: an opaque id, a detector score, and its true label."""

    object_id: str
    score: float
    true_label: TrueLabel

    def __post_init__(self):
        if not (isinstance(self.score, (int, float)) and math.isfinite(self.score)):
            raise SchemaError(f"object {self.object_id!r}: score must be finite")
        if not (0.0 <= self.score <= 1.0):
            raise SchemaError(
                f"object {self.object_id!r}: score {self.score} outside [0, 1]"
            )


@dataclass(frozen=True, slots=True)
class PatientRecord:
    """One patient's ground truth, sample metadata, and scored objects.

    ``true_parasitemia`` is parasites per cV; ``examined_volume`` is the
    examined sample volume expressed in cV units (so a thick-film exam of
    0.1 uL with cV = 1 uL blood has examined_volume = 0.1).
    """

    patient_id: str
    ground_truth: GroundTruth
    species: Species
    true_parasitemia: float
    examined_volume: float
    wbc_count: int | None = None
    objects: tuple[ObjectRecord, ...] = ()

    def __post_init__(self):
        pid = self.patient_id
        if self.examined_volume <= 0 or not math.isfinite(self.examined_volume):
            raise SchemaError(f"patient {pid!r}: examined_volume must be > 0")
        if self.true_parasitemia < 0 or not math.isfinite(self.true_parasitemia):
            raise SchemaError(f"patient {pid!r}: true_parasitemia must be >= 0")
        if self.wbc_count is not None and self.wbc_count < 0:
            raise SchemaError(f"patient {pid!r}: wbc_count must be >= 0")
        if self.ground_truth is GroundTruth.NEGATIVE:
            if self.species is not Species.NONE:
                raise SchemaError(f"patient {pid!r}: negative patient must have species=none")
            if self.true_parasitemia != 0:
                raise SchemaError(f"patient {pid!r}: negative patient must have parasitemia 0")
            for obj in self.objects:
                if obj.true_label is TrueLabel.PARASITE:
                    raise LabelContradiction(
                        f"patient {pid!r} is negative but owns parasite object "
                        f"{obj.object_id!r}"
                    )
        else:
            if self.species is Species.NONE:
                raise SchemaError(f"patient {pid!r}: positive patient must have a species")
            if self.true_parasitemia <= 0:
                raise SchemaError(f"patient {pid!r}: positive patient must have parasitemia > 0")

    @property
    def n_parasite_objects(self) -> int:
        return sum(1 for o in self.objects if o.true_label is TrueLabel.PARASITE)

    @property
    def n_distractor_objects(self) -> int:
        return len(self.objects) - self.n_parasite_objects


@dataclass(frozen=True, slots=True)
class CohortDataset:
    """Validated collection of patients sharing one clinical-volume convention."""

    cv_description: str
    patients: tuple[PatientRecord, ...]
    provenance: str = ""

    def __post_init__(self):
        if not self.patients:
            raise SchemaError("cohort must contain at least one patient")
        seen: set[str] = set()
        for p in self.patients:
            if p.patient_id in seen:
                raise DuplicatePatient(f"duplicate patient_id {p.patient_id!r}")
            seen.add(p.patient_id)

    def __iter__(self):
        return iter(self.patients)

    def __len__(self) -> int:
        return len(self.patients)

    def patient(self, patient_id: str) -> PatientRecord:
        for p in self.patients:
            if p.patient_id == patient_id:
                return p
        raise KeyError(patient_id)

    @property
    def positives(self) -> tuple[PatientRecord, ...]:
        return tuple(p for p in self.patients if p.ground_truth is GroundTruth.POSITIVE)

    @property
    def negatives(self) -> tuple[PatientRecord, ...]:
        return tuple(p for p in self.patients if p.ground_truth is GroundTruth.NEGATIVE)


@dataclass(frozen=True, slots=True)
class PatientCounts:
    """Object counts for one patient at a given score threshold.

    Lower-case fields are raw counts within the examined volume; upper-case
    TP/FP are rescaled to per-cV. N = TP + FP is the per-cV count of
    positively-labeled objects that drives diagnosis.
    """

    tp: int
    fp: int
    fn: int
    tn: int
    TP: float
    FP: float

    @property
    def N(self) -> float:
        return self.TP + self.FP


def patient_counts(patient: PatientRecord, C: float) -> PatientCounts:
    """Count objects at score threshold C (inclusive: an object passes at score >= C)."""
    if not (0.0 <= C <= 1.0):
        raise OutOfRange(f"score threshold C={C} outside [0, 1]")
    tp = fp = fn = tn = 0
    for obj in patient.objects:
        passed = obj.score >= C
        if obj.true_label is TrueLabel.PARASITE:
            if passed:
                tp += 1
            else:
                fn += 1
        else:
            if passed:
                fp += 1
            else:
                tn += 1
    v = patient.examined_volume
    return PatientCounts(tp=tp, fp=fp, fn=fn, tn=tn, TP=tp / v, FP=fp / v)


# ---------------------------------------------------------------------------
# Ingestion / export
# ---------------------------------------------------------------------------

PATIENT_COLUMNS = (
    "patient_id",
    "ground_truth",
    "species",
    "true_parasitemia",
    "examined_volume",
    "wbc_count",
)
OBJECT_COLUMNS = ("patient_id", "object_id", "score", "true_label")


def _parse_enum(enum_cls, raw: str, what: str):
    try:
        return enum_cls(raw.strip().lower())
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise SchemaError(f"{what}: {raw!r} not one of {{{allowed}}}") from None


def _parse_float(raw: str, what: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise SchemaError(f"{what}: {raw!r} is not numeric") from None


def _check_header(reader: csv.DictReader, required: Sequence[str], what: str):
    have = set(reader.fieldnames or ())
    missing = [c for c in required if c not in have]
    if missing:
        raise SchemaError(f"{what} file missing column(s): {', '.join(missing)}")


def ingest_cohort(objects_file, patients_file, cv_description: str) -> CohortDataset:
    """Ingest the CSV pair into a validated CohortDataset.

    ``objects_file`` / ``patients_file`` may be paths or open text handles.
    Every object row must join to exactly one patient row; validation errors
    raise the SchemaError family (MissingPatient, LabelContradiction,
    DuplicatePatient, SchemaError).
    """

    def _rows(src, columns, what):
        if hasattr(src, "read"):
            reader = csv.DictReader(src)
            _check_header(reader, columns, what)
            yield from reader
        else:
            with open(src, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                _check_header(reader, columns, what)
                yield from reader

    patient_rows: dict[str, dict] = {}
    for row in _rows(patients_file, PATIENT_COLUMNS, "patients"):
        pid = (row["patient_id"] or "").strip()
        if not pid:
            raise SchemaError("patients file: empty patient_id")
        if pid in patient_rows:
            raise DuplicatePatient(f"duplicate patient_id {pid!r}")
        patient_rows[pid] = row

    objects_by_patient: dict[str, list[ObjectRecord]] = {pid: [] for pid in patient_rows}
    for row in _rows(objects_file, OBJECT_COLUMNS, "objects"):
        pid = (row["patient_id"] or "").strip()
        if pid not in patient_rows:
            raise MissingPatient(f"object row references unknown patient_id {pid!r}")
        objects_by_patient[pid].append(
            ObjectRecord(
                object_id=(row["object_id"] or "").strip(),
                score=_parse_float(row["score"], f"object in patient {pid!r}: score"),
                true_label=_parse_enum(TrueLabel, row["true_label"], "true_label"),
            )
        )

    patients = []
    for pid, row in patient_rows.items():
        wbc_raw = (row.get("wbc_count") or "").strip()
        wbc = None
        if wbc_raw:
            try:
                wbc = int(wbc_raw)
            except ValueError:
                raise SchemaError(f"patient {pid!r}: wbc_count {wbc_raw!r} is not an integer")
        patients.append(
            PatientRecord(
                patient_id=pid,
                ground_truth=_parse_enum(GroundTruth, row["ground_truth"], "ground_truth"),
                species=_parse_enum(Species, row["species"], "species"),
                true_parasitemia=_parse_float(
                    row["true_parasitemia"], f"patient {pid!r}: true_parasitemia"
                ),
                examined_volume=_parse_float(
                    row["examined_volume"], f"patient {pid!r}: examined_volume"
                ),
                wbc_count=wbc,
                objects=tuple(objects_by_patient[pid]),
            )
        )

    provenance = patients_file if isinstance(patients_file, (str, os.PathLike)) else ""
    return CohortDataset(
        cv_description=cv_description,
        patients=tuple(patients),
        provenance=str(provenance),
    )


def ingest_cohort_json(source) -> CohortDataset:
    """Ingest the single-document JSON mirror of the CSV schema."""
    if hasattr(source, "read"):
        doc = json.load(source)
        provenance = ""
    else:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
        provenance = str(source)
    try:
        cv_description = doc["cv_description"]
        patient_docs = doc["patients"]
    except (KeyError, TypeError):
        raise SchemaError("JSON cohort must have keys 'cv_description' and 'patients'")
    patients = []
    seen: set[str] = set()
    for pd in patient_docs:
        try:
            pid = str(pd["patient_id"])
        except (KeyError, TypeError):
            raise SchemaError("patient document missing 'patient_id'")
        if pid in seen:
            raise DuplicatePatient(f"duplicate patient_id {pid!r}")
        seen.add(pid)
        for key in ("ground_truth", "species", "true_parasitemia", "examined_volume"):
            if key not in pd:
                raise SchemaError(f"patient {pid!r}: missing field {key!r}")
        objects = tuple(
            ObjectRecord(
                object_id=str(od["object_id"]),
                score=float(od["score"]),
                true_label=_parse_enum(TrueLabel, str(od["true_label"]), "true_label"),
            )
            for od in pd.get("objects", ())
        )
        wbc = pd.get("wbc_count")
        patients.append(
            PatientRecord(
                patient_id=pid,
                ground_truth=_parse_enum(GroundTruth, str(pd["ground_truth"]), "ground_truth"),
                species=_parse_enum(Species, str(pd["species"]), "species"),
                true_parasitemia=float(pd["true_parasitemia"]),
                examined_volume=float(pd["examined_volume"]),
                wbc_count=None if wbc is None else int(wbc),
                objects=objects,
            )
        )
    return CohortDataset(
        cv_description=str(cv_description),
        patients=tuple(patients),
        provenance=provenance or doc.get("provenance", ""),
    )


def cohort_to_json_doc(cohort: CohortDataset) -> dict:
    return {
        "cv_description": cohort.cv_description,
        "provenance": cohort.provenance,
        "patients": [
            {
                "patient_id": p.patient_id,
                "ground_truth": p.ground_truth.value,
                "species": p.species.value,
                "true_parasitemia": p.true_parasitemia,
                "examined_volume": p.examined_volume,
                "wbc_count": p.wbc_count,
                "objects": [
                    {
                        "object_id": o.object_id,
                        "score": o.score,
                        "true_label": o.true_label.value,
                    }
                    for o in p.objects
                ],
            }
            for p in cohort.patients
        ],
    }


def export_cohort(cohort: CohortDataset, objects_file, patients_file) -> None:
    """Write the cohort back to the CSV pair (inverse of ingest_cohort)."""

    def _open(dst):
        if hasattr(dst, "write"):
            return dst, False
        return open(dst, "w", newline="", encoding="utf-8"), True

    fh, close_it = _open(patients_file)
    try:
        w = csv.writer(fh)
        w.writerow(PATIENT_COLUMNS)
        for p in cohort.patients:
            w.writerow(
                [
                    p.patient_id,
                    p.ground_truth.value,
                    p.species.value,
                    repr(p.true_parasitemia),
                    repr(p.examined_volume),
                    "" if p.wbc_count is None else p.wbc_count,
                ]
            )
    finally:
        if close_it:
            fh.close()

    fh, close_it = _open(objects_file)
    try:
        w = csv.writer(fh)
        w.writerow(OBJECT_COLUMNS)
        for p in cohort.patients:
            for o in p.objects:
                w.writerow([p.patient_id, o.object_id, repr(o.score), o.true_label.value])
    finally:
        if close_it:
            fh.close()


def export_cohort_json(cohort: CohortDataset, dest) -> None:
    doc = cohort_to_json_doc(cohort)
    if hasattr(dest, "write"):
        json.dump(doc, dest, indent=2)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
