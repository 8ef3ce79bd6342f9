import json

import pytest

from parasitometrics.calibration import OperatingPoint
from parasitometrics.errors import ReportInvariantError
from parasitometrics.metrics import (
    DEFAULT_PARASITEMIA_BINS,
    fpr_distribution,
    patient_level_sens_spec,
    sensitivity_distribution,
)
from parasitometrics.report import EvaluationReport, report_to_doc, write_report


@pytest.fixture
def full_report(mixed_cohort):
    op = OperatingPoint(C=0.5, T=2.0)
    strat, spec = patient_level_sens_spec(mixed_cohort, op, DEFAULT_PARASITEMIA_BINS)
    return EvaluationReport(
        cv_description=mixed_cohort.cv_description,
        provenance="test fixture",
        operating_point=op,
        fpr=fpr_distribution(mixed_cohort, 0.5),
        sensitivity=sensitivity_distribution(mixed_cohort, 0.5),
        patient_sensitivity=strat,
        specificity=spec,
    )


class TestStructuralInvariant:
    def test_full_report_serializes(self, full_report):
        doc = report_to_doc(full_report)
        assert doc["schema_version"] == 1
        assert doc["patient_level"]["specificity"] is not None
        assert doc["patient_level"]["sensitivity"]["parasitemia_bins"]

    def test_sensitivity_without_specificity_rejected(self, full_report):
        full_report.specificity = None
        full_report.specificity_absent_reason = None
        with pytest.raises(ReportInvariantError):
            report_to_doc(full_report)

    def test_explicit_absence_reason_is_accepted(self, full_report):
        full_report.specificity = None
        full_report.specificity_absent_reason = "cohort has no negative patients"
        doc = report_to_doc(full_report)
        assert doc["patient_level"]["specificity_absent_reason"]


class TestWriteReport:
    def test_repeated_writes_byte_identical(self, full_report, tmp_path):
        write_report(full_report, tmp_path / "a", fmt="json")
        write_report(full_report, tmp_path / "b", fmt="json")
        assert (tmp_path / "a" / "report.json").read_bytes() == \
            (tmp_path / "b" / "report.json").read_bytes()

    def test_csv_format_emits_per_patient_tables(self, full_report, tmp_path):
        paths = write_report(full_report, tmp_path / "r", fmt="csv")
        emitted = {str(p).rsplit("/", 1)[-1] for p in paths}
        assert "report.json" in emitted
        assert "per_patient_fpr.csv" in emitted
        assert "per_patient_sensitivity.csv" in emitted

    def test_json_is_valid_and_sorted(self, full_report, tmp_path):
        write_report(full_report, tmp_path / "r", fmt="json")
        doc = json.loads((tmp_path / "r" / "report.json").read_text())
        assert list(doc) == sorted(doc)
