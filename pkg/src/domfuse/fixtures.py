"""Deterministic synthetic datasets.

Generation uses SplitMix64 and only IEEE-754 +, -, *, / on its outputs, so a
given :class:`ScenarioSpec` yields the same records (and the same JSON bytes)
on any platform or in any language that reproduces those steps.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from .dominance import FusionConfig
from .fusion import fuse
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

MASK64 = (1 << 64) - 1
REGIMES = ("submissive", "neutral", "dominant", "mixed")
DISTRACTORS = ("car", "backpack", "dog", "tent")


class SplitMix64:
    """SplitMix64 (Steele, Lea and Flood). Seed 0 yields 0xE220A8397B1DCDAF first."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def between(self, low: float, high: float) -> float:
        return low + (high - low) * self.uniform()

    def below(self, n: int) -> int:
        """Integer in [0, n) by multiply-shift on the top 32 bits."""
        return ((self.next_u64() >> 32) * n) >> 32


@dataclass(frozen=True)
class ScenarioSpec:
    n_records: int = 100
    seed: int = 0
    person_count_range: tuple[int, int] = (0, 4)
    dominance_regime: str = "mixed"
    classifier_sharpness: float = 1.0
    positive_fraction: float = 0.5
    id_prefix: str = "img_"

    def __post_init__(self) -> None:
        lo, hi = self.person_count_range
        object.__setattr__(self, "person_count_range", (int(lo), int(hi)))
        if self.n_records < 0:
            raise ValueError(f"n_records must be non-negative, got {self.n_records}")
        if not 0 <= lo <= hi:
            raise ValueError(f"person_count_range must satisfy 0 <= min <= max, got {self.person_count_range}")
        if self.dominance_regime not in REGIMES:
            raise ValueError(f"dominance_regime must be one of {REGIMES}, got {self.dominance_regime!r}")
        if not self.classifier_sharpness > 0:
            raise ValueError(f"classifier_sharpness must be positive, got {self.classifier_sharpness}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ValueError(f"positive_fraction must lie in [0, 1], got {self.positive_fraction}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_mapping(cls, data: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        data = dict(data)
        if "person_count_range" in data:
            data["person_count_range"] = tuple(data["person_count_range"])
        return cls(**data)


def _dominance(rng: SplitMix64, regime: str) -> float:
    u = rng.uniform()
    if regime == "submissive":  # [1, 4.5)
        return 1.0 + 3.5 * u
    if regime == "neutral":  # [4.5, 5.5]
        return 4.5 + 1.0 * u
    return 10.0 - 4.5 * u  # (5.5, 10]


def _box(rng: SplitMix64) -> BoundingBox:
    x0 = 500.0 * rng.uniform()
    y0 = 400.0 * rng.uniform()
    return BoundingBox(x0, y0, x0 + 10.0 + 130.0 * rng.uniform(), y0 + 10.0 + 70.0 * rng.uniform())


def _classifier(rng: SplitMix64, sharpness: float) -> ClassifierScores:
    # stretch |t| toward 1 for sharpness > 1 and toward 0 below it
    t = 2.0 * rng.uniform() - 1.0
    a = abs(t)
    f = a * sharpness / (a * sharpness + (1.0 - a))
    pos = 0.5 + 0.5 * f if t >= 0 else 0.5 - 0.5 * f
    return ClassifierScores(pos, 1.0 - pos)


def _person(rng: SplitMix64, regime: str, score: Optional[float] = None) -> PersonDetection:
    if score is None:
        score = rng.between(0.3, 1.0)
    box = _box(rng)
    vad = VadTriplet(
        valence=rng.between(1.0, 10.0),
        arousal=rng.between(1.0, 10.0),
        dominance=_dominance(rng, regime),
    )
    return PersonDetection(PERSON, score, box, vad)


def generate(spec: ScenarioSpec) -> list[ImageRecord]:
    rng = SplitMix64(spec.seed)
    lo, hi = spec.person_count_range
    width = len(str(max(spec.n_records - 1, 0)))
    records = []
    for i in range(spec.n_records):
        regime = spec.dominance_regime
        if regime == "mixed":
            regime = REGIMES[rng.below(3)]
        classifier = _classifier(rng, spec.classifier_sharpness)
        detections = [_person(rng, regime) for _ in range(lo + rng.below(hi - lo + 1))]
        if rng.uniform() < 0.2:
            detections.insert(
                rng.below(len(detections) + 1),
                PersonDetection(DISTRACTORS[rng.below(len(DISTRACTORS))], rng.uniform(), _box(rng)),
            )
        truth = POSITIVE if rng.uniform() < spec.positive_fraction else NEGATIVE
        records.append(ImageRecord(f"{spec.id_prefix}{i:0{width}d}", classifier, tuple(detections), truth))
    return records


def _fixed_person(rng: SplitMix64, dominance: float) -> PersonDetection:
    return PersonDetection(
        PERSON,
        rng.between(0.9, 1.0),
        _box(rng),
        VadTriplet(rng.between(1.0, 10.0), rng.between(1.0, 10.0), dominance),
    )


def flip_scenario(seed: int = 0, per_kind: int = 6) -> list[ImageRecord]:
    """Borderline images paired with a strong dominance signal.

    Emits label flips in both directions, strengthened decisions and
    neutral controls. Ground truth follows the dominance direction, so
    fusion should fix the raw classifier on these records. Every flip and
    strengthen is verified under the default config before returning.
    """
    rng = SplitMix64(seed)
    config = FusionConfig()
    records: list[ImageRecord] = []
    expected: dict[str, str] = {}

    def add(kind: str, pos: float, dominances: list[float], truth: str) -> None:
        rid = f"{kind}_{sum(1 for r in records if r.id.startswith(kind)):03d}"
        persons = tuple(_fixed_person(rng, d) for d in dominances)
        records.append(ImageRecord(rid, ClassifierScores(pos, 1.0 - pos), persons, truth))
        expected[rid] = kind

    # anchor cases: mean dominance 2.5 lifts 0.45 to 0.67 and 0.60 to 0.82
    add("flip", 0.45, [2.0, 3.0], POSITIVE)
    add("strengthen", 0.60, [2.5], POSITIVE)
    add("neutral", 0.50, [5.0], NEGATIVE)

    for _ in range(per_kind):
        n = 1 + rng.below(3)
        add("flip", rng.between(0.40, 0.49), [rng.between(1.5, 3.0) for _ in range(n)], POSITIVE)
        n = 1 + rng.below(3)
        add("flip", rng.between(0.51, 0.60), [rng.between(8.0, 9.5) for _ in range(n)], NEGATIVE)
        n = 1 + rng.below(3)
        add("strengthen", rng.between(0.55, 0.70), [rng.between(1.0, 2.5) for _ in range(n)], POSITIVE)
        n = 1 + rng.below(3)
        add("strengthen", rng.between(0.30, 0.45), [rng.between(8.0, 10.0) for _ in range(n)], NEGATIVE)
        pos = rng.between(0.30, 0.70)
        add("neutral", pos, [rng.between(4.5, 5.5)], POSITIVE if pos > 0.5 else NEGATIVE)

    for record in records:
        raw = record.classifier
        fused = fuse(record, config)
        kind = expected[record.id]
        if kind == "flip":
            ok = fused.label != raw.label
        elif kind == "strengthen":
            ok = fused.label == raw.label and max(fused.pos, fused.neg) > max(raw.pos, raw.neg)
        else:
            ok = fused.pos == raw.pos and fused.neg == raw.neg
        if not ok:
            raise AssertionError(f"flip scenario record {record.id} does not behave as a {kind}")
    return records
