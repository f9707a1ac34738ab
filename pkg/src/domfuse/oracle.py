"""Straight-line reference for fusion and the self-check built on it.

``oracle_fuse`` deliberately repeats the adjustment procedure step by step
instead of calling into :mod:`domfuse.fusion` or :mod:`domfuse.dominance`;
the mean uses exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

from .dominance import DominanceSummary, FusionConfig
from .fixtures import ScenarioSpec, SplitMix64, generate
from .fusion import DEFAULT_ABSTAIN_THRESHOLD, FusedPrediction, adjust_scores, fuse
from .records import (
    NEGATIVE,
    PERSON,
    POSITIVE,
    BoundingBox,
    ClassifierScores,
    ImageRecord,
    PersonDetection,
    VadTriplet,
)

SELF_CHECK_SEED = 20190722
SELF_CHECK_RECORDS = 10_000
SCORE_TOLERANCE = 1e-12


def oracle_fuse(
    record: ImageRecord,
    config: Optional[FusionConfig] = None,
    abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD,
) -> FusedPrediction:
    config = config or FusionConfig()
    s_pos = record.classifier.pos
    s_neg = record.classifier.neg

    dominances = []
    for det in record.detections:
        if det.class_label == PERSON and det.score >= config.person_score_threshold:
            dominances.append(det.vad.dominance)

    summary = None
    applied = 0.0
    if len(dominances) > 0:
        total = Fraction(0)
        for d in dominances:
            total += Fraction(d)
        weight = float(total / len(dominances))
        summary = DominanceSummary(weight, len(dominances))

        if weight >= config.neutral_low and weight <= config.neutral_high:
            pass
        elif weight > config.neutral_high:
            diff = weight - config.neutral_high
            adj = diff * config.unit_adjustment
            s_pos = s_pos - adj
            s_neg = s_neg + adj
            applied = -adj
        elif weight < config.neutral_low:
            diff = config.neutral_low - weight
            adj = diff * config.unit_adjustment
            s_pos = s_pos + adj
            s_neg = s_neg - adj
            applied = adj

        if s_pos < 0.0 or s_neg > 1.0:
            s_pos, s_neg = 0.0, 1.0
            applied = 0.0 - record.classifier.pos
        elif s_pos > 1.0 or s_neg < 0.0:
            s_pos, s_neg = 1.0, 0.0
            applied = 1.0 - record.classifier.pos

    if s_pos > s_neg:
        label = POSITIVE
    else:
        label = NEGATIVE
    top = s_pos if s_pos >= s_neg else s_neg
    return FusedPrediction(
        record_id=record.id,
        pos=s_pos,
        neg=s_neg,
        label=label,
        abstained=top < abstain_threshold,
        adjustment=applied,
        dominance=summary,
        fallback=summary is None,
    )


def mismatch(a: FusedPrediction, b: FusedPrediction, tol: float = SCORE_TOLERANCE) -> Optional[str]:
    """Describe the first difference between two predictions, or None if they agree."""
    for name in ("record_id", "label", "abstained", "fallback"):
        if getattr(a, name) != getattr(b, name):
            return f"{name}: {getattr(a, name)!r} != {getattr(b, name)!r}"
    for name in ("pos", "neg", "adjustment"):
        if abs(getattr(a, name) - getattr(b, name)) > tol:
            return f"{name}: {getattr(a, name)!r} != {getattr(b, name)!r}"
    if (a.dominance is None) != (b.dominance is None):
        return f"dominance: {a.dominance!r} != {b.dominance!r}"
    if a.dominance is not None:
        if a.dominance.person_count != b.dominance.person_count:
            return f"person_count: {a.dominance.person_count} != {b.dominance.person_count}"
        if abs(a.dominance.overall - b.dominance.overall) > tol:
            return f"overall_dominance: {a.dominance.overall!r} != {b.dominance.overall!r}"
    return None


def _person(dominance: float, score: float = 0.95) -> PersonDetection:
    return PersonDetection(PERSON, score, BoundingBox(0.0, 0.0, 10.0, 10.0), VadTriplet(5.0, 5.0, dominance))


def edge_records() -> list[ImageRecord]:
    """Band boundaries, saturation, thresholds and person-free images."""

    def rec(rid: str, pos: float, dets: Iterable[PersonDetection]) -> ImageRecord:
        return ImageRecord(rid, ClassifierScores(pos, 1.0 - pos), tuple(dets), POSITIVE)

    car = PersonDetection("car", 0.99, BoundingBox(1.0, 1.0, 5.0, 5.0))
    return [
        rec("edge_low", 0.6, [_person(4.5)]),
        rec("edge_low_mean", 0.6, [_person(4.0), _person(5.0)]),
        rec("edge_high", 0.6, [_person(5.5)]),
        rec("edge_high_mean", 0.4, [_person(5.0), _person(6.0)]),
        rec("just_below", 0.5, [_person(4.499999999999999)]),
        rec("just_above", 0.5, [_person(5.500000000000001)]),
        rec("scale_min", 0.7, [_person(1.0)]),
        rec("scale_max", 0.3, [_person(10.0)]),
        rec("saturate_low", 0.3, [_person(10.0)]),
        rec("saturate_high", 0.8, [_person(1.0), _person(1.5)]),
        rec("saturate_exact", 0.495, [_person(10.0)]),
        rec("tie_neutral", 0.5, [_person(5.0)]),
        rec("no_detections", 0.8, []),
        rec("only_car", 0.2, [car]),
        rec("low_confidence", 0.45, [_person(1.0, score=0.49)]),
        rec("threshold_exact", 0.45, [_person(2.5, score=0.5), car]),
    ]


def worked_examples() -> list[tuple[str, bool]]:
    """Hand-evaluated adjustments; each entry is ``(description, passed)``."""
    cfg = FusionConfig()
    out = []

    def scores_close(got, want) -> bool:
        return all(abs(g - w) <= SCORE_TOLERANCE for g, w in zip(got, want))

    out.append(("pos 0.6, units +2.0 -> (0.38, 0.62)",
                scores_close(adjust_scores(ClassifierScores(0.6, 0.4), 2.0, cfg), (0.38, 0.62, -0.22))))
    out.append(("pos 0.5, units -1.0 -> (0.61, 0.39)",
                scores_close(adjust_scores(ClassifierScores(0.5, 0.5), -1.0, cfg), (0.61, 0.39, 0.11))))
    out.append(("pos 0.3, units +4.5 saturates to (0, 1)",
                scores_close(adjust_scores(ClassifierScores(0.3, 0.7), 4.5, cfg), (0.0, 1.0, -0.3))))
    for overall in (4.5, 5.0, 5.5):
        r = ImageRecord(f"neutral_{overall}", ClassifierScores(0.8, 0.2), (_person(overall),))
        f = fuse(r, cfg)
        out.append((f"neutral identity at overall {overall}",
                    f.pos == 0.8 and f.neg == 0.2 and f.adjustment == 0.0 and not f.fallback))
    r = ImageRecord("person_free", ClassifierScores(0.8, 0.2))
    f = fuse(r, cfg)
    out.append(("person-free pass-through",
                f.pos == 0.8 and f.neg == 0.2 and f.fallback and f.label == POSITIVE))
    r = ImageRecord("flip", ClassifierScores(0.45, 0.55), (_person(2.0), _person(3.0)))
    f = fuse(r, cfg)
    out.append(("mean dominance 2.5 flips 0.45 to 0.67",
                abs(f.pos - 0.67) <= SCORE_TOLERANCE and f.label == POSITIVE))
    return out


def self_check_records(seed: int = SELF_CHECK_SEED, n: int = SELF_CHECK_RECORDS) -> list[ImageRecord]:
    """Mixed regimes with sharp scores (so adjustments saturate) plus the edge cases."""
    spec = ScenarioSpec(
        n_records=n,
        seed=seed,
        person_count_range=(0, 4),
        dominance_regime="mixed",
        classifier_sharpness=3.0,
    )
    return generate(spec) + edge_records()


@dataclass(frozen=True)
class SelfCheckResult:
    checked: int
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def run_self_check(
    fuse_fn: Callable[[ImageRecord, FusionConfig], FusedPrediction] = fuse,
    records: Optional[list[ImageRecord]] = None,
    config: Optional[FusionConfig] = None,
    stop_at_first: bool = True,
) -> SelfCheckResult:
    config = config or FusionConfig()
    records = self_check_records() if records is None else records
    failures = [f"worked example failed: {desc}" for desc, ok in worked_examples() if not ok]
    for record in records:
        got = fuse_fn(record, config)
        want = oracle_fuse(record, config)
        diff = mismatch(got, want)
        if diff:
            failures.append(f"record {record.id}: {diff}\n  engine: {got}\n  oracle: {want}")
            if stop_at_first:
                break
    return SelfCheckResult(checked=len(records), failures=failures)


def random_config(rng: SplitMix64) -> FusionConfig:
    """A valid non-default config, for sweeping the oracle comparison."""
    low = rng.between(1.0, 9.0)
    return FusionConfig(
        neutral_low=low,
        neutral_high=rng.between(low, 10.0),
        unit_adjustment=rng.between(0.01, 0.3),
        person_score_threshold=rng.uniform(),
    )
