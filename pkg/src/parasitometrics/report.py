"""Evaluation report assembly and serialization (JSON document + CSV blocks).

The serializer enforces one structural rule: a patient-level sensitivity
section is only emittable together with its parasitemia bin definition and the
paired specificity. A sensitivity number without those two is uninformative
and is rejected, not silently written.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .calibration import LodEstimate, OperatingPoint
from .curves import CurvePoints
from .errors import ReportInvariantError
from .metrics import ConfusionMatrix, MetricDistribution, StratifiedResult
from .quant import QuantResult

SCHEMA_VERSION = 1


@dataclass
class EvaluationReport:
    cv_description: str
    provenance: str
    operating_point: OperatingPoint | None = None
    fpr: MetricDistribution | None = None
    sensitivity: MetricDistribution | None = None
    pooled_sensitivity: float | None = None
    patient_sensitivity: StratifiedResult | None = None
    specificity: float | None = None
    specificity_absent_reason: str | None = None
    lod_estimates: list[LodEstimate] = field(default_factory=list)
    curves: dict[str, CurvePoints] = field(default_factory=dict)
    confusion: ConfusionMatrix | None = None
    quantitation: QuantResult | None = None
    warnings: list[str] = field(default_factory=list)


def _summary_doc(md: MetricDistribution) -> dict:
    s = md.summary
    return {
        "kind": md.kind.value,
        "n": s.n,
        "mean": s.mean,
        "median": s.median,
        "std": s.std,
        "sigma_left": s.sigma_left,
        "sigma_right": s.sigma_right,
        "per_patient": {k: md.per_patient[k] for k in sorted(md.per_patient)},
        "excluded": list(md.excluded),
        "warnings": list(md.warnings),
    }


def _stratified_doc(sr: StratifiedResult) -> dict:
    return {
        "overall": sr.overall,
        "parasitemia_bins": [[lo, "inf" if hi == float("inf") else hi] for lo, hi in sr.bins],
        "parasitemia_strata": [
            {
                "label": st.label,
                "n_patients": st.n_patients,
                "n_detected": st.n_detected,
                "sensitivity": st.value,
            }
            for st in sr.parasitemia_strata
        ],
        "species_strata": [
            {
                "label": st.label,
                "n_patients": st.n_patients,
                "n_detected": st.n_detected,
                "sensitivity": st.value,
            }
            for st in sr.species_strata
        ],
    }


def report_to_doc(report: EvaluationReport) -> dict:
    """Render the report as a JSON-serializable document.

    Raises ReportInvariantError if a patient-level sensitivity section lacks
    its parasitemia bins or the paired specificity entry.
    """
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "metadata": {
            "cv_description": report.cv_description,
            "provenance": report.provenance,
            "operating_point": (
                None
                if report.operating_point is None
                else {"C": report.operating_point.C, "T": report.operating_point.T}
            ),
        },
        "warnings": list(report.warnings),
    }
    if report.fpr is not None:
        doc["fpr_distribution"] = _summary_doc(report.fpr)
    if report.sensitivity is not None:
        doc["sensitivity_distribution"] = _summary_doc(report.sensitivity)
    if report.pooled_sensitivity is not None:
        doc["pooled_object_sensitivity"] = report.pooled_sensitivity
    if report.patient_sensitivity is not None:
        if not report.patient_sensitivity.bins:
            raise ReportInvariantError(
                "patient-level sensitivity requires the parasitemia bin definition"
            )
        if report.specificity is None and report.specificity_absent_reason is None:
            raise ReportInvariantError(
                "patient-level sensitivity requires the paired specificity "
                "(or an explicit absence reason)"
            )
        doc["patient_level"] = {
            "sensitivity": _stratified_doc(report.patient_sensitivity),
            "specificity": report.specificity,
        }
        if report.specificity is None:
            doc["patient_level"]["specificity_absent_reason"] = (
                report.specificity_absent_reason
            )
    if report.lod_estimates:
        doc["lod_estimates"] = [
            {
                "L": e.L,
                "method": e.method.value,
                "mu_S": e.mu_S,
                "sigma_F": e.sigma_F,
                "sigma_left_F": e.sigma_left_F,
                "sigma_right_F": e.sigma_right_F,
                "plus_one": e.plus_one,
                "beta": e.beta,
            }
            for e in report.lod_estimates
        ]
    if report.curves:
        doc["curves"] = {
            name: {
                "kind": c.kind.value,
                "auc": c.auc,
                "points": [list(pt) for pt in c.points],
                "notes": list(c.notes),
            }
            for name, c in report.curves.items()
        }
    if report.confusion is not None:
        doc["species_confusion"] = {
            "labels": [sp.value for sp in report.confusion.labels],
            "counts": {
                t.value: {p.value: n for p, n in row.items()}
                for t, row in report.confusion.counts.items()
            },
            "falciparum_collapse": report.confusion.collapse_falciparum(),
        }
    if report.quantitation is not None:
        q = report.quantitation
        doc["quantitation"] = {
            "per_patient": {
                pid: {"P_hat": v[0], "P_true": v[1], "rel_error": v[2]}
                for pid, v in q.per_patient.items()
            },
            "fom": q.fom,
            "bland_altman": [list(pair) for pair in q.bland_altman],
            "r2_linear": q.r2_linear,
            "r2_log": q.r2_log,
            "clamped_patients": list(q.clamped_patients),
            "notes": list(q.notes),
        }
    return doc


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_report(report: EvaluationReport, out_dir, fmt: str = "json") -> list[str]:
    """Write the report to ``out_dir``; returns the list of files written.

    fmt="json" writes report.json only; fmt="csv" additionally writes the
    tabular sections as plot-ready CSV blocks. Output is a pure function of
    the report content (no timestamps).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report_to_doc(report)  # validates invariants for either format
    written = []

    json_path = out / "report.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(str(json_path))

    if fmt == "csv":
        if report.fpr is not None:
            path = out / "per_patient_fpr.csv"
            _write_csv(
                path,
                ("patient_id", "fp_per_cv"),
                [(k, repr(v)) for k, v in sorted(report.fpr.per_patient.items())],
            )
            written.append(str(path))
        if report.sensitivity is not None:
            path = out / "per_patient_sensitivity.csv"
            _write_csv(
                path,
                ("patient_id", "object_sensitivity"),
                [(k, repr(v)) for k, v in sorted(report.sensitivity.per_patient.items())],
            )
            written.append(str(path))
        if report.patient_sensitivity is not None:
            path = out / "stratified_sensitivity.csv"
            rows = [
                ("parasitemia", st.label, st.n_patients, st.n_detected,
                 "" if st.value is None else repr(st.value))
                for st in report.patient_sensitivity.parasitemia_strata
            ] + [
                ("species", st.label, st.n_patients, st.n_detected,
                 "" if st.value is None else repr(st.value))
                for st in report.patient_sensitivity.species_strata
            ]
            _write_csv(
                path, ("stratum_type", "label", "n_patients", "n_detected", "sensitivity"), rows
            )
            written.append(str(path))
        for name, curve in report.curves.items():
            path = out / f"curve_{name}.csv"
            rows = list(curve.to_csv_rows())
            _write_csv(path, rows[0], rows[1:])
            written.append(str(path))
        if report.quantitation is not None:
            q = report.quantitation
            path = out / "quantitation.csv"
            _write_csv(
                path,
                ("patient_id", "P_true", "P_hat", "rel_error"),
                [
                    (pid, repr(v[1]), repr(v[0]), repr(v[2]))
                    for pid, v in sorted(q.per_patient.items())
                ],
            )
            written.append(str(path))
            path = out / "bland_altman.csv"
            _write_csv(
                path,
                ("mean_log10", "diff_log10"),
                [(repr(a), repr(b)) for a, b in q.bland_altman],
            )
            written.append(str(path))
    return written
