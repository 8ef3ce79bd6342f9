import pytest

from parasitometrics.datamodel import (
    CohortDataset,
    GroundTruth,
    ObjectRecord,
    PatientRecord,
    Species,
    TrueLabel,
)
from parasitometrics.metrics import MetricDistribution, MetricKind
from parasitometrics.stats import summarize


def make_patient(
    pid,
    positive=False,
    species=Species.FALCIPARUM,
    parasitemia=None,
    volume=1.0,
    parasite_scores=(),
    distractor_scores=(),
    wbc_count=None,
):
    objects = [
        ObjectRecord(f"{pid}-p{i}", s, TrueLabel.PARASITE)
        for i, s in enumerate(parasite_scores)
    ] + [
        ObjectRecord(f"{pid}-d{i}", s, TrueLabel.DISTRACTOR)
        for i, s in enumerate(distractor_scores)
    ]
    if positive:
        if parasitemia is None:
            parasitemia = max(len(parasite_scores) / volume, 1.0)
    else:
        species = Species.NONE
        parasitemia = 0.0
    return PatientRecord(
        patient_id=pid,
        ground_truth=GroundTruth.POSITIVE if positive else GroundTruth.NEGATIVE,
        species=species,
        true_parasitemia=parasitemia,
        examined_volume=volume,
        wbc_count=wbc_count,
        objects=tuple(objects),
    )


def make_cohort(*patients, cv="1 uL blood"):
    return CohortDataset(cv_description=cv, patients=tuple(patients), provenance="test")


def make_dist(kind, values):
    per = {f"pt{i:03d}": float(v) for i, v in enumerate(values)}
    return MetricDistribution(kind=kind, per_patient=per, summary=summarize(values))


@pytest.fixture
def fpr_dist():
    def _build(values):
        return make_dist(MetricKind.FPR, values)

    return _build


@pytest.fixture
def sens_dist():
    def _build(values):
        return make_dist(MetricKind.OBJECT_SENSITIVITY, values)

    return _build


@pytest.fixture
def mixed_cohort():
    """2 negatives + 2 positives with hand-countable objects."""
    return make_cohort(
        make_patient("neg1", distractor_scores=(0.8, 0.6, 0.2), volume=0.5),
        make_patient("neg2", distractor_scores=(0.3,), volume=1.0),
        make_patient(
            "pos1",
            positive=True,
            parasitemia=400.0,
            parasite_scores=(0.9, 0.7, 0.7, 0.1),
            distractor_scores=(0.75, 0.4),
            volume=1.0,
        ),
        make_patient(
            "pos2",
            positive=True,
            parasitemia=80.0,
            species=Species.VIVAX,
            parasite_scores=(0.95, 0.3),
            distractor_scores=(0.5,),
            volume=0.5,
        ),
    )
