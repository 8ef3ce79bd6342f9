import json
import math

import pytest
from click.testing import CliRunner

from parasitometrics.cli import main
from parasitometrics.datamodel import export_cohort, export_cohort_json
from parasitometrics.simulator import SimConfig, generate_cohort

from conftest import make_cohort, make_patient


@pytest.fixture
def runner():
    return CliRunner()


def _write_mixed_cohort_csvs(tmp_path):
    cohort = make_cohort(
        make_patient("neg1", positive=False, distractor_scores=(0.8, 0.6, 0.2),
                     volume=0.5),
        make_patient("neg2", positive=False, distractor_scores=(0.3,)),
        make_patient("pos1", positive=True, parasitemia=400.0,
                     parasite_scores=(0.9, 0.7, 0.7, 0.1),
                     distractor_scores=(0.75, 0.4)),
        make_patient("pos2", positive=True, parasitemia=80.0, volume=0.5,
                     parasite_scores=(0.95, 0.3), distractor_scores=(0.5,)),
    )
    objects = tmp_path / "objects.csv"
    patients = tmp_path / "patients.csv"
    export_cohort(cohort, objects, patients)
    return patients, objects


class TestEvaluate:
    def test_explicit_operating_point_json(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        out = tmp_path / "report"
        result = runner.invoke(main, [
            "evaluate", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--T", "2.0", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "report.json").read_text())
        assert doc["metadata"]["operating_point"] == {"C": 0.5, "T": 2.0}
        assert doc["patient_level"]["specificity"] is not None
        assert doc["sensitivity_distribution"] is not None

    def test_calibrated_threshold(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        out = tmp_path / "report"
        result = runner.invoke(main, [
            "evaluate", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--spec-target", "0.95", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "report.json").read_text())
        assert doc["metadata"]["operating_point"]["T"] > 0

    def test_csv_format_writes_tables(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        out = tmp_path / "report"
        result = runner.invoke(main, [
            "evaluate", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--T", "2.0", "--out", str(out), "--format", "csv",
            "--curves",
        ])
        assert result.exit_code == 0, result.output
        assert (out / "report.json").exists()
        assert (out / "per_patient_fpr.csv").exists()
        assert (out / "stratified_sensitivity.csv").exists()

    def test_missing_dataset_is_input_error(self, runner, tmp_path):
        result = runner.invoke(main, [
            "evaluate", "--C", "0.5", "--T", "1.0", "--out", str(tmp_path / "r"),
        ])
        assert result.exit_code == 2

    def test_bad_csv_schema_is_input_error(self, runner, tmp_path):
        bad = tmp_path / "patients.csv"
        bad.write_text("wrong,header\n1,2\n")
        objects = tmp_path / "objects.csv"
        objects.write_text("patient_id,object_id,score,true_label\n")
        result = runner.invoke(main, [
            "evaluate", "--patients", str(bad), "--objects", str(objects),
            "--C", "0.5", "--T", "1.0", "--out", str(tmp_path / "r"),
        ])
        assert result.exit_code == 2

    def test_missing_file_is_io_error(self, runner, tmp_path):
        result = runner.invoke(main, [
            "evaluate", "--json", str(tmp_path / "nope.json"),
            "--C", "0.5", "--T", "1.0", "--out", str(tmp_path / "r"),
        ])
        assert result.exit_code == 2


class TestCalibrateAndLod:
    def test_calibrate_prints_threshold(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        result = runner.invoke(main, [
            "calibrate", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5",
        ])
        assert result.exit_code == 0, result.output
        assert result.output.startswith("T = ")

    def test_calibrate_scatter_out(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        scatter = tmp_path / "scatter.csv"
        result = runner.invoke(main, [
            "calibrate", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--scatter-out", str(scatter),
        ])
        assert result.exit_code == 0, result.output
        lines = scatter.read_text().strip().splitlines()
        assert lines[0] == "patient_id,fp_count_per_cv"
        assert len(lines) == 3  # header + two negatives

    def test_no_negatives_is_degenerate(self, runner, tmp_path):
        cohort = make_cohort(
            make_patient("pos1", positive=True, parasite_scores=(0.9, 0.8)),
            make_patient("pos2", positive=True, parasite_scores=(0.7,)),
        )
        path = tmp_path / "cohort.json"
        export_cohort_json(cohort, path)
        result = runner.invoke(main, ["calibrate", "--json", str(path), "--C", "0.5"])
        assert result.exit_code == 3

    def test_lod_command(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        result = runner.invoke(main, [
            "lod", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--method", "robust",
        ])
        assert result.exit_code == 0, result.output
        assert result.output.startswith("LoD = ")
        assert "(robust)" in result.output

    def test_unknown_method_is_input_error(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        result = runner.invoke(main, [
            "lod", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--method", "bogus",
        ])
        assert result.exit_code == 2


class TestTune:
    def test_tune_end_to_end(self, runner, tmp_path):
        train = generate_cohort(SimConfig(seed=11, n_negative=0, n_positive=10,
                                          examined_volume=0.2))
        val_neg = generate_cohort(SimConfig(seed=12, n_negative=10, n_positive=0,
                                            examined_volume=0.2))
        train_path = tmp_path / "train.json"
        neg_path = tmp_path / "neg.json"
        export_cohort_json(train, train_path)
        export_cohort_json(val_neg, neg_path)
        table = tmp_path / "table.csv"
        result = runner.invoke(main, [
            "tune", "--train-positives", str(train_path),
            "--validation-negatives", str(neg_path),
            "--c-grid", "0.3,0.5,0.7", "--out", str(table),
        ])
        assert result.exit_code == 0, result.output
        assert "best C = " in result.output
        lines = table.read_text().strip().splitlines()
        assert lines[0] == "C,T,LoD,mu_F,sigma_F,sigma_L,sigma_R,mu_S"
        assert len(lines) >= 2

    def test_tune_rejects_positive_only_validation(self, runner, tmp_path):
        pos = generate_cohort(SimConfig(seed=13, n_negative=0, n_positive=5))
        p = tmp_path / "pos.json"
        export_cohort_json(pos, p)
        result = runner.invoke(main, [
            "tune", "--train-positives", str(p),
            "--validation-negatives", str(p), "--out", str(tmp_path / "t.csv"),
        ])
        assert result.exit_code == 2


class TestQuantCommand:
    def test_quant_with_explicit_rates(self, runner, tmp_path):
        patients, objects = _write_mixed_cohort_csvs(tmp_path)
        out = tmp_path / "q"
        result = runner.invoke(main, [
            "quant", "--patients", str(patients), "--objects", str(objects),
            "--C", "0.5", "--f-hat", "3.0", "--s-hat", "0.7", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "report.json").read_text())
        assert "quantitation" in doc
        assert len(doc["quantitation"]["per_patient"]) == 2


class TestPoissonCommand:
    def test_pmf_to_stdout(self, runner):
        result = runner.invoke(main, ["poisson", "-p", "100", "-v", "0.01"])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0] == "volume,k,probability"
        k0 = float(lines[1].split(",")[2])
        assert k0 == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_min_volume_mode(self, runner):
        result = runner.invoke(main, [
            "poisson", "-p", "100", "--k-min", "1",
            "--confidence", str(1 - math.exp(-1)),
        ])
        assert result.exit_code == 0, result.output
        v = float(result.output.split("=")[1].split()[0])
        assert v == pytest.approx(0.01, abs=1e-6)

    def test_half_specified_min_volume_is_input_error(self, runner):
        result = runner.invoke(main, ["poisson", "-p", "100", "--k-min", "1"])
        assert result.exit_code == 2


class TestSimulateCommand:
    def test_deterministic_output(self, runner, tmp_path):
        args = ["simulate", "--seed", "42", "--n-negative", "4", "--n-positive", "4"]
        r1 = runner.invoke(main, args + ["--out", str(tmp_path / "a")])
        r2 = runner.invoke(main, args + ["--out", str(tmp_path / "b")])
        assert r1.exit_code == 0 and r2.exit_code == 0
        for name in ("patients.csv", "objects.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_seed_env_var_default(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("PARASITOMETRICS_SEED", "7")
        r_env = runner.invoke(main, [
            "simulate", "--n-negative", "3", "--n-positive", "0",
            "--out", str(tmp_path / "env"),
        ])
        r_explicit = runner.invoke(main, [
            "simulate", "--seed", "7", "--n-negative", "3", "--n-positive", "0",
            "--out", str(tmp_path / "explicit"),
        ])
        assert r_env.exit_code == 0 and r_explicit.exit_code == 0
        assert (tmp_path / "env" / "objects.csv").read_bytes() == \
            (tmp_path / "explicit" / "objects.csv").read_bytes()

    def test_json_output_roundtrips_through_evaluate(self, runner, tmp_path):
        sim = runner.invoke(main, [
            "simulate", "--seed", "3", "--out", str(tmp_path / "sim"),
            "--format", "json",
        ])
        assert sim.exit_code == 0, sim.output
        out = tmp_path / "report"
        ev = runner.invoke(main, [
            "evaluate", "--json", str(tmp_path / "sim" / "cohort.json"),
            "--C", "0.5", "--spec-target", "0.95", "--out", str(out),
        ])
        assert ev.exit_code == 0, ev.output
        assert (out / "report.json").exists()

    def test_who56_preset(self, runner, tmp_path):
        result = runner.invoke(main, [
            "simulate", "--preset", "who56", "--seed", "1",
            "--out", str(tmp_path / "w"), "--format", "json",
        ])
        assert result.exit_code == 0, result.output
        doc = json.loads((tmp_path / "w" / "cohort.json").read_text())
        assert len(doc["patients"]) == 40


class TestReproducePaper:
    def test_all_checks_pass(self, runner, tmp_path):
        out = tmp_path / "repro"
        result = runner.invoke(main, ["reproduce-paper", "--out", str(out)])
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest and all(c["passed"] for c in manifest)
        pass_lines = [l for l in result.output.splitlines() if l.startswith("PASS")]
        assert len(pass_lines) == len(manifest)
