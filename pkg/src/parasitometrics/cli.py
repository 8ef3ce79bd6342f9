"""Command-line surface.

Datasets are passed either as a single JSON document (``--json cohort.json``)
or as the CSV pair (``--patients patients.csv --objects objects.csv``).

Exit codes: 0 ok; 1 reproduction-check failure; 2 input/schema error;
3 degenerate cohort (the requested metric is undefined on the data).
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from . import __version__
from .calibration import (
    CalibrationConfig,
    CalibrationMethod,
    OperatingPoint,
    calibrate_threshold,
    default_c_grid,
    estimate_lod,
    fp_scatter,
    tune_operating_point,
)
from .curves import froc, object_roc, patient_roc
from .datamodel import export_cohort, export_cohort_json, ingest_cohort, ingest_cohort_json
from .errors import (
    DegenerateDataError,
    InputError,
    ParasitometricsError,
    ReproductionFailure,
    SchemaError,
)
from .metrics import (
    DEFAULT_PARASITEMIA_BINS,
    fpr_distribution,
    patient_level_sens_spec,
    pooled_object_sensitivity,
    sensitivity_distribution,
)
from .poisson import min_volume_for_detection, poisson_curve
from .quant import ExpectedRates, quant_report
from .report import EvaluationReport, write_report
from .reproduce import run_all
from .simulator import SimConfig, generate_cohort, who56_preset


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SchemaError, InputError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DegenerateDataError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except ReproductionFailure as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _dataset_options(fn):
    fn = click.option("--json", "json_path", type=click.Path(), default=None,
                      help="cohort as a single JSON document")(fn)
    fn = click.option("--patients", type=click.Path(), default=None,
                      help="patients CSV (with --objects)")(fn)
    fn = click.option("--objects", type=click.Path(), default=None,
                      help="objects CSV (with --patients)")(fn)
    fn = click.option("--cv", "cv_description", default="1 uL blood",
                      help="name of the clinical volume unit")(fn)
    return fn


def _load_cohort(json_path, patients, objects, cv_description):
    if json_path is not None:
        return ingest_cohort_json(json_path)
    if patients is None or objects is None:
        raise InputError("provide either --json or both --patients and --objects")
    return ingest_cohort(objects, patients, cv_description)


def _parse_bins(spec: str):
    """Comma-separated interior bin edges, e.g. '50,200,1000'."""
    try:
        edges = [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"could not parse bin edges {spec!r}")
    if edges != sorted(edges) or any(e <= 0 for e in edges):
        raise InputError("bin edges must be positive and ascending")
    bounds = [0.0] + edges + [float("inf")]
    return tuple(zip(bounds, bounds[1:]))


def _parse_method(name: str) -> CalibrationMethod:
    try:
        return CalibrationMethod(name)
    except ValueError:
        raise InputError(
            f"unknown calibration method {name!r}; "
            f"choose from {[m.value for m in CalibrationMethod]}"
        )


@click.group()
@click.version_option(version=__version__)
def main():
    """Clinically grounded evaluation metrics for parasitemia diagnosis."""


@main.command()
@_dataset_options
@click.option("--C", "c_threshold", type=float, default=None, help="object-score threshold")
@click.option("--T", "t_threshold", type=float, default=None, help="per-cV count threshold")
@click.option("--spec-target", type=float, default=None, help="target specificity K for calibration")
@click.option("--calib-method", default="gaussian", show_default=True)
@click.option("--bins", default="50,200,1000", show_default=True,
              help="interior parasitemia bin edges (per cV)")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json",
              show_default=True)
@click.option("--curves/--no-curves", "with_curves", default=False,
              help="include object ROC / FROC / patient ROC in the report")
@_handle_errors
def evaluate(json_path, patients, objects, cv_description, c_threshold, t_threshold,
             spec_target, calib_method, bins, out_dir, fmt, with_curves):
    """Full evaluation report at an operating point (explicit or calibrated)."""
    cohort = _load_cohort(json_path, patients, objects, cv_description)
    parasitemia_bins = _parse_bins(bins)
    warnings: list[str] = []

    if c_threshold is None:
        raise InputError("--C is required")
    fpr = None
    if cohort.negatives:
        fpr = fpr_distribution(cohort, c_threshold, negatives_only=True)

    if t_threshold is None:
        if spec_target is None:
            raise InputError("provide --T, or --spec-target with --calib-method")
        if fpr is None:
            raise DegenerateDataError("calibration requires negative patients")
        cfg = CalibrationConfig(K=spec_target, method=_parse_method(calib_method))
        t_threshold = calibrate_threshold(fpr, cfg)
    op = OperatingPoint(C=c_threshold, T=t_threshold)

    sens = None
    pooled = None
    if cohort.positives:
        try:
            sens = sensitivity_distribution(cohort, c_threshold)
            pooled_res = pooled_object_sensitivity(cohort, c_threshold)
            pooled = pooled_res.value
            if pooled_res.imbalance_warning:
                warnings.append(pooled_res.imbalance_warning)
        except DegenerateDataError as exc:
            warnings.append(str(exc))

    strat, specificity = patient_level_sens_spec(cohort, op, parasitemia_bins)

    lods = []
    if fpr is not None and sens is not None:
        for method in (CalibrationMethod.GAUSSIAN, CalibrationMethod.ROBUST):
            try:
                lods.append(estimate_lod(fpr, sens, CalibrationConfig(method=method)))
            except DegenerateDataError:
                pass

    report = EvaluationReport(
        cv_description=cohort.cv_description,
        provenance=cohort.provenance,
        operating_point=op,
        fpr=fpr,
        sensitivity=sens,
        pooled_sensitivity=pooled,
        patient_sensitivity=strat,
        specificity=specificity,
        specificity_absent_reason=(
            None if specificity is not None else "cohort has no negative patients"
        ),
        lod_estimates=lods,
        warnings=warnings,
    )
    if with_curves:
        try:
            report.curves["object_roc"] = object_roc(cohort)
            report.curves["froc"] = froc(cohort)
            t_grid = [op.T * k / 10.0 for k in range(0, 41)] if op.T > 0 else list(range(0, 41))
            report.curves["patient_roc"] = patient_roc(cohort, c_threshold, t_grid)
        except DegenerateDataError as exc:
            warnings.append(f"curves skipped: {exc}")

    for path in write_report(report, out_dir, fmt=fmt):
        click.echo(path)
    for w in warnings:
        click.echo(f"warning: {w}", err=True)


@main.command()
@_dataset_options
@click.option("--C", "c_threshold", type=float, required=True)
@click.option("--spec-target", type=float, default=0.95, show_default=True)
@click.option("--method", default="gaussian", show_default=True)
@click.option("--manual-t", type=float, default=None,
              help="explicit T for the manual-scatter method")
@click.option("--scatter-out", type=click.Path(), default=None,
              help="write the per-patient FP scatter CSV here")
@_handle_errors
def calibrate(json_path, patients, objects, cv_description, c_threshold, spec_target,
              method, manual_t, scatter_out):
    """Calibrate the count threshold T for a target specificity."""
    cohort = _load_cohort(json_path, patients, objects, cv_description)
    fpr = fpr_distribution(cohort, c_threshold, negatives_only=True)
    if scatter_out:
        with open(scatter_out, "w", encoding="utf-8") as fh:
            fh.write("patient_id,fp_count_per_cv\n")
            for pid, v in fp_scatter(fpr):
                fh.write(f"{pid},{v!r}\n")
        click.echo(scatter_out)
    cfg = CalibrationConfig(K=spec_target, method=_parse_method(method), manual_T=manual_t)
    t = calibrate_threshold(fpr, cfg)
    click.echo(f"T = {t!r}")


@main.command()
@_dataset_options
@click.option("--C", "c_threshold", type=float, required=True)
@click.option("--method", default="gaussian", show_default=True)
@click.option("--beta", type=float, default=None, help="pessimistic denominator knob")
@click.option("--plus-one", is_flag=True, default=False)
@_handle_errors
def lod(json_path, patients, objects, cv_description, c_threshold, method, beta, plus_one):
    """Estimate the limit of detection from a cohort's F and S distributions."""
    cohort = _load_cohort(json_path, patients, objects, cv_description)
    fpr = fpr_distribution(cohort, c_threshold, negatives_only=True)
    sens = sensitivity_distribution(cohort, c_threshold)
    cfg = CalibrationConfig(method=_parse_method(method), beta=beta, plus_one=plus_one)
    est = estimate_lod(fpr, sens, cfg)
    click.echo(f"LoD = {est.L!r} parasites per cV ({est.method.value})")


@main.command()
@click.option("--train-positives", "train_pos", type=click.Path(), required=True,
              help="JSON cohort of training positives")
@click.option("--validation-negatives", "val_neg", type=click.Path(), required=True,
              help="JSON cohort of validation negatives")
@click.option("--validation-positives", "val_pos", type=click.Path(), default=None)
@click.option("--spec-target", type=float, default=0.95, show_default=True)
@click.option("--c-grid", default=None,
              help="comma-separated C values (default: 101-point sweep)")
@click.option("--calib-method", default="gaussian", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="tuning table CSV")
@_handle_errors
def tune(train_pos, val_neg, val_pos, spec_target, c_grid, calib_method, out_path):
    """Sweep C, calibrate T at each, and pick the operating point with lowest LoD."""
    train = ingest_cohort_json(train_pos)
    negatives = ingest_cohort_json(val_neg)
    if not negatives.negatives:
        raise SchemaError(
            "operating-point tuning requires a validation set of negative patients"
        )
    positives = ingest_cohort_json(val_pos) if val_pos else None
    grid = (
        [float(tok) for tok in c_grid.split(",")] if c_grid else default_c_grid(train)
    )
    cfg = CalibrationConfig(K=spec_target, method=_parse_method(calib_method))
    best, table = tune_operating_point(train, negatives, positives, spec_target, grid, cfg)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("C,T,LoD,mu_F,sigma_F,sigma_L,sigma_R,mu_S\n")
        for row in table:
            fh.write(
                f"{row.C!r},{row.T!r},{row.lod!r},{row.mu_F!r},{row.sigma_F!r},"
                f"{row.sigma_left_F!r},{row.sigma_right_F!r},{row.mu_S!r}\n"
            )
    click.echo(out_path)
    click.echo(f"best C = {best.C!r}, T = {best.T!r}")


@main.command()
@_dataset_options
@click.option("--C", "c_threshold", type=float, required=True)
@click.option("--T", "t_threshold", type=float, default=0.0, show_default=True)
@click.option("--f-hat", type=float, default=None,
              help="expected FPR per cV (default: mean FPR of the cohort's negatives)")
@click.option("--s-hat", type=float, default=None,
              help="expected sensitivity (default: mean per-patient sensitivity)")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json",
              show_default=True)
@_handle_errors
def quant(json_path, patients, objects, cv_description, c_threshold, t_threshold,
          f_hat, s_hat, out_dir, fmt):
    """Quantitation report: per-patient parasitemia estimates vs ground truth."""
    cohort = _load_cohort(json_path, patients, objects, cv_description)
    fom_inputs = None
    fpr = sens = None
    if f_hat is None or s_hat is None:
        fpr = fpr_distribution(cohort, c_threshold, negatives_only=bool(cohort.negatives))
        sens = sensitivity_distribution(cohort, c_threshold)
        f_hat = fpr.summary.mean if f_hat is None else f_hat
        s_hat = sens.summary.mean if s_hat is None else s_hat
        fom_inputs = (sens, fpr)
    rates = ExpectedRates(F_hat=f_hat, S_hat=s_hat)
    result = quant_report(
        cohort, OperatingPoint(C=c_threshold, T=t_threshold), rates, fom_inputs
    )
    report = EvaluationReport(
        cv_description=cohort.cv_description,
        provenance=cohort.provenance,
        operating_point=OperatingPoint(C=c_threshold, T=t_threshold),
        quantitation=result,
    )
    for path in write_report(report, out_dir, fmt=fmt):
        click.echo(path)


@main.command()
@click.option("--parasitemia", "-p", type=float, required=True, help="parasites per cV")
@click.option("--volume", "-v", "volumes", type=float, multiple=True,
              help="examined volume(s) in cV; repeatable")
@click.option("--k-min", type=int, default=None,
              help="with --confidence: solve the minimum volume for k-min parasites")
@click.option("--confidence", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="pmf CSV destination (default stdout)")
@_handle_errors
def poisson(parasitemia, volumes, k_min, confidence, out_path):
    """Poisson count pmfs per examined volume, or the minimum-volume solution."""
    if k_min is not None or confidence is not None:
        if k_min is None or confidence is None:
            raise InputError("--k-min and --confidence must be given together")
        v = min_volume_for_detection(parasitemia, k_min, confidence)
        click.echo(f"min volume = {v!r} cV")
        return
    if not volumes:
        volumes = (0.001, 0.01, 0.1)
    curve = poisson_curve(parasitemia, volumes)
    rows = list(curve.to_csv_rows())
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(",".join(str(c) for c in row) + "\n")
        click.echo(out_path)
    else:
        for row in rows:
            click.echo(",".join(str(c) for c in row))


@main.command()
@click.option("--seed", type=int, default=None,
              help="RNG seed (PARASITOMETRICS_SEED env var overrides the default)")
@click.option("--preset", type=click.Choice(["default", "who56"]), default="default",
              show_default=True)
@click.option("--n-negative", type=int, default=20, show_default=True)
@click.option("--n-positive", type=int, default=20, show_default=True)
@click.option("--volume", type=float, default=1.0, show_default=True,
              help="examined volume per patient, in cV")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@_handle_errors
def simulate(seed, preset, n_negative, n_positive, volume, out_dir, fmt):
    """Generate a synthetic cohort (deterministic for a fixed seed)."""
    if seed is None:
        seed = int(os.environ.get("PARASITOMETRICS_SEED", "0"))
    if preset == "who56":
        cfg = who56_preset(seed=seed)
    else:
        cfg = SimConfig(
            seed=seed,
            n_negative=n_negative,
            n_positive=n_positive,
            examined_volume=volume,
        )
    cohort = generate_cohort(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "cohort.json"
        export_cohort_json(cohort, path)
        click.echo(str(path))
    else:
        patients_path = out / "patients.csv"
        objects_path = out / "objects.csv"
        export_cohort(cohort, objects_path, patients_path)
        click.echo(str(patients_path))
        click.echo(str(objects_path))


@main.command("reproduce-paper")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_handle_errors
def reproduce_paper(out_dir):
    """Re-derive every headline number and write a pass/fail manifest."""
    checks = run_all()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = [
        {"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks
    ]
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for c in checks:
        click.echo(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    failed = [c for c in checks if not c.passed]
    if failed:
        raise ReproductionFailure(f"first failing check: {failed[0].name}")
    click.echo(f"{len(checks)} checks passed; manifest at {out / 'manifest.json'}")


if __name__ == "__main__":
    main()
