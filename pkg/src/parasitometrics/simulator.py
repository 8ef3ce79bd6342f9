"""Seeded Monte-Carlo cohort generator.

Realizes the statistical model the metrics assume: each patient draws a
parasitemia P, a species, an object-level sensitivity s, and an FPR rate f;
object counts are Poisson in the examined volume (parasites ~ Poisson(P*V),
high-scoring distractors ~ Poisson(f*V), background low-scoring distractors
~ Poisson(bg*V)).

Score model: scores live on [0, 1] and 0.5 is the reference threshold. Each
parasite score is drawn from a beta(a, b) whose ``a`` is solved (bisection on
the regularized incomplete beta) so that Pr[score >= 0.5] = s exactly; the
realized per-patient sensitivity at C = 0.5 is then binomial around s.
Distractor scores above/below 0.5 are drawn from the configured beta
conditioned to the matching half, via inverse-CDF sampling in the tail.

Determinism: each patient uses an independent substream derived from
numpy's SeedSequence(seed, spawn_key=(patient_index,)), so output is
byte-identical for a fixed config regardless of generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc, betaincinv

from .datamodel import (
    CohortDataset,
    GroundTruth,
    ObjectRecord,
    PatientRecord,
    Species,
    TrueLabel,
)
from .errors import InvalidConfig

REFERENCE_THRESHOLD = 0.5


# --- distribution specs -------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    value: float


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 < self.lo <= self.hi):
            raise InvalidConfig(f"log-uniform bounds ({self.lo}, {self.hi}) invalid")


@dataclass(frozen=True)
class Choice:
    values: tuple[float, ...]


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mu, sigma) with draws resampled/clipped at 0."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidConfig("sigma must be >= 0")


@dataclass(frozen=True)
class LogNormal:
    mu_log: float
    sigma_log: float


@dataclass(frozen=True)
class Mixture:
    components: tuple
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise InvalidConfig("mixture needs matching components and weights")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise InvalidConfig("mixture weights must be >= 0 and sum to 1")


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise InvalidConfig("beta parameters must be > 0")


def _draw_positive_rate(spec, rng: np.random.Generator) -> float:
    if isinstance(spec, Fixed):
        return max(spec.value, 0.0)
    if isinstance(spec, TruncatedNormal):
        return max(float(rng.normal(spec.mu, spec.sigma)), 0.0)
    if isinstance(spec, LogNormal):
        return float(rng.lognormal(spec.mu_log, spec.sigma_log))
    if isinstance(spec, LogUniform):
        return float(np.exp(rng.uniform(math.log(spec.lo), math.log(spec.hi))))
    if isinstance(spec, Choice):
        return float(rng.choice(spec.values))
    if isinstance(spec, Mixture):
        idx = rng.choice(len(spec.components), p=spec.weights)
        return _draw_positive_rate(spec.components[idx], rng)
    raise InvalidConfig(f"unsupported distribution spec {spec!r}")


def _draw_sensitivity(spec, rng: np.random.Generator) -> float:
    if isinstance(spec, Fixed):
        if not (0.0 <= spec.value <= 1.0):
            raise InvalidConfig("fixed sensitivity must be in [0, 1]")
        return spec.value
    if isinstance(spec, Beta):
        return float(rng.beta(spec.a, spec.b))
    raise InvalidConfig(f"unsupported sensitivity spec {spec!r}")


DEFAULT_SPECIES_MIX = {
    Species.FALCIPARUM: 0.6,
    Species.VIVAX: 0.25,
    Species.OVALE: 0.05,
    Species.MALARIAE: 0.05,
    Species.KNOWLESI: 0.03,
    Species.MIXED: 0.02,
}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_negative: int = 20
    n_positive: int = 20
    examined_volume: float = 1.0
    parasitemia_dist: object = LogUniform(80.0, 200.0)
    species_mix: dict = field(default_factory=lambda: dict(DEFAULT_SPECIES_MIX))
    fpr_dist: object = TruncatedNormal(50.0, 20.0)
    patient_sensitivity_dist: object = Beta(8.0, 2.0)
    parasite_score_dist: object = Beta(4.0, 2.0)   # b is kept; a re-solved per patient
    distractor_score_dist: object = Beta(2.0, 4.0)
    background_distractor_rate: float = 100.0      # low-score distractors per cV

    def __post_init__(self):
        if self.n_negative < 0 or self.n_positive < 0:
            raise InvalidConfig("patient counts must be >= 0")
        if self.n_negative + self.n_positive == 0:
            raise InvalidConfig("cohort must contain at least one patient")
        if self.examined_volume <= 0:
            raise InvalidConfig("examined_volume must be > 0")
        if self.background_distractor_rate < 0:
            raise InvalidConfig("background_distractor_rate must be >= 0")
        weights = list(self.species_mix.values())
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise InvalidConfig("species_mix weights must be >= 0 and sum to 1")


def solve_beta_a(target_tail: float, b: float) -> float:
    """Solve a so that Pr[Beta(a, b) >= 0.5] = target_tail (monotone in a)."""
    t = min(max(target_tail, 1e-9), 1.0 - 1e-9)

    def gap(log_a: float) -> float:
        a = math.exp(log_a)
        return (1.0 - betainc(a, b, REFERENCE_THRESHOLD)) - t

    lo, hi = math.log(1e-8), math.log(1e8)
    return math.exp(brentq(gap, lo, hi, xtol=1e-12, rtol=1e-12))


def _tail_scores(spec: Beta, n: int, rng: np.random.Generator, upper: bool) -> np.ndarray:
    """Draw n scores from Beta(a, b) conditioned to one side of 0.5."""
    if n == 0:
        return np.empty(0)
    cdf_half = float(betainc(spec.a, spec.b, REFERENCE_THRESHOLD))
    if upper:
        u = rng.uniform(cdf_half, 1.0, size=n)
    else:
        u = rng.uniform(0.0, cdf_half, size=n)
    return np.clip(betaincinv(spec.a, spec.b, u), 0.0, 1.0)


def _distractors(cfg: SimConfig, patient_id: str, f: float, rng) -> list[ObjectRecord]:
    v = cfg.examined_volume
    n_high = int(rng.poisson(f * v))
    n_low = int(rng.poisson(cfg.background_distractor_rate * v))
    scores = np.concatenate(
        [
            _tail_scores(cfg.distractor_score_dist, n_high, rng, upper=True),
            _tail_scores(cfg.distractor_score_dist, n_low, rng, upper=False),
        ]
    )
    return [
        ObjectRecord(
            object_id=f"{patient_id}-d{i:05d}",
            score=float(s),
            true_label=TrueLabel.DISTRACTOR,
        )
        for i, s in enumerate(scores)
    ]


def generate_cohort(cfg: SimConfig) -> CohortDataset:
    """Generate a synthetic cohort; deterministic for a fixed config."""
    species_labels = list(cfg.species_mix.keys())
    species_weights = list(cfg.species_mix.values())
    b_parasite = cfg.parasite_score_dist.b

    patients = []
    for i in range(cfg.n_negative):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        pid = f"neg{i:04d}"
        f = _draw_positive_rate(cfg.fpr_dist, rng)
        patients.append(
            PatientRecord(
                patient_id=pid,
                ground_truth=GroundTruth.NEGATIVE,
                species=Species.NONE,
                true_parasitemia=0.0,
                examined_volume=cfg.examined_volume,
                objects=tuple(_distractors(cfg, pid, f, rng)),
            )
        )

    for j in range(cfg.n_positive):
        idx = cfg.n_negative + j
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(idx,)))
        pid = f"pos{j:04d}"
        parasitemia = _draw_positive_rate(cfg.parasitemia_dist, rng)
        if parasitemia <= 0:
            parasitemia = 1e-9  # positive patients must have P > 0
        sp = species_labels[int(rng.choice(len(species_labels), p=species_weights))]
        s = _draw_sensitivity(cfg.patient_sensitivity_dist, rng)
        f = _draw_positive_rate(cfg.fpr_dist, rng)

        n_parasites = int(rng.poisson(parasitemia * cfg.examined_volume))
        a = solve_beta_a(s, b_parasite)
        parasite_scores = rng.beta(a, b_parasite, size=n_parasites)
        objects = [
            ObjectRecord(
                object_id=f"{pid}-p{i:05d}",
                score=float(np.clip(sc, 0.0, 1.0)),
                true_label=TrueLabel.PARASITE,
            )
            for i, sc in enumerate(parasite_scores)
        ]
        objects.extend(_distractors(cfg, pid, f, rng))
        patients.append(
            PatientRecord(
                patient_id=pid,
                ground_truth=GroundTruth.POSITIVE,
                species=sp,
                true_parasitemia=parasitemia,
                examined_volume=cfg.examined_volume,
                objects=tuple(objects),
            )
        )

    return CohortDataset(
        cv_description="1 uL blood (simulated)",
        patients=tuple(patients),
        provenance=f"simulator(seed={cfg.seed})",
    )


def who56_preset(seed: int = 0) -> SimConfig:
    """Config mirroring the diagnosis portion of the WHO 56 slide set.

    20 negative and 20 positive slides, positive parasitemias log-uniform in
    [80, 200] per cV. The full WHO set also covers species-ID and
    quantitation slides; only the diagnosis distribution is modeled here.
    """
    return SimConfig(
        seed=seed,
        n_negative=20,
        n_positive=20,
        examined_volume=0.1,
        parasitemia_dist=LogUniform(80.0, 200.0),
    )


def _uniform_patient(pid, gt, species, parasitemia, volume, objects):
    return PatientRecord(
        patient_id=pid,
        ground_truth=gt,
        species=species,
        true_parasitemia=parasitemia,
        examined_volume=volume,
        objects=tuple(objects),
    )


def _parasites(pid: str, n: int, score: float) -> list[ObjectRecord]:
    return [
        ObjectRecord(f"{pid}-p{i:06d}", score, TrueLabel.PARASITE) for i in range(n)
    ]


def _distractor_objects(pid: str, n: int, score: float, tag="d") -> list[ObjectRecord]:
    return [
        ObjectRecord(f"{pid}-{tag}{i:06d}", score, TrueLabel.DISTRACTOR)
        for i in range(n)
    ]


def paper_worked_examples() -> list[dict]:
    """Deterministic fixture cohorts for the three worked examples.

    Each entry carries the cohort, the operating point or parameters to apply,
    and the expected values (computed by hand from the definitions).
    """
    examples = []

    # 1. pooled vs patient-level sensitivity: one high-parasitemia patient
    #    fully detected, three low-parasitemia patients fully missed.
    p1 = _uniform_patient(
        "pt1", GroundTruth.POSITIVE, Species.FALCIPARUM, 50_000.0, 1.0,
        _parasites("pt1", 50_000, 0.9),
    )
    rest = [
        _uniform_patient(
            f"pt{k}", GroundTruth.POSITIVE, Species.FALCIPARUM, 300.0, 1.0,
            _parasites(f"pt{k}", 300, 0.1),
        )
        for k in (2, 3, 4)
    ]
    examples.append(
        {
            "name": "patient-level",
            "cohort": CohortDataset(
                cv_description="1 uL blood",
                patients=(p1, *rest),
                provenance="worked example: pooled vs patient-level sensitivity",
            ),
            "C": 0.5,
            "T": 1.0,
            "expected": {
                "pooled_sensitivity": 50_000 / 50_900,
                "patient_level_sensitivity": 0.25,
            },
        }
    )

    # 2. precision re-expression: 10,000 TP/cV with 100 FP/cV looks like
    #    precision 0.99, but at LoD parasitemia 100 it is 0.5.
    quant_patient = _uniform_patient(
        "q1", GroundTruth.POSITIVE, Species.FALCIPARUM, 10_000.0, 1.0,
        _parasites("q1", 10_000, 0.9) + _distractor_objects("q1", 100, 0.9),
    )
    examples.append(
        {
            "name": "precision",
            "cohort": CohortDataset(
                cv_description="1 uL blood",
                patients=(quant_patient,),
                provenance="worked example: precision re-expression at LoD",
            ),
            "C": 0.5,
            "lod_parasitemia": 100.0,
            "expected": {
                "precision": 10_000 / 10_100,
                "precision_at_lod": 0.5,
            },
        }
    )

    # 3. AUC/imbalance coexistence: 50,000 distractors per parasite; at the
    #    full-sensitivity threshold there are 50 FPs per parasite, yet
    #    AUC = 1 - 50/50,000 = 0.999.
    auc_patient = _uniform_patient(
        "a1", GroundTruth.POSITIVE, Species.FALCIPARUM, 1.0, 1.0,
        _parasites("a1", 1, 0.9)
        + _distractor_objects("a1", 50, 0.95, tag="hard")
        + _distractor_objects("a1", 49_950, 0.1, tag="easy"),
    )
    examples.append(
        {
            "name": "auc-imbalance",
            "cohort": CohortDataset(
                cv_description="1 uL blood",
                patients=(auc_patient,),
                provenance="worked example: AUC under 50,000:1 imbalance",
            ),
            "full_sensitivity_threshold": 0.9,
            "expected": {
                "auc": 0.999,
                "fp_per_parasite": 50,
            },
        }
    )

    return examples
