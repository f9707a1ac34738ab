"""Overall image dominance and its distance from the neutral band."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

from .records import ImageRecord, PersonDetection


class EmptyPersonList(ValueError):
    """Dominance was requested for an image without eligible persons."""


@dataclass(frozen=True)
class FusionConfig:
    """Knobs of the dominance adjustment.

    ``unit_adjustment`` is the probability mass moved per dominance unit
    outside the inclusive neutral band ``[neutral_low, neutral_high]``.
    Persons scoring below ``person_score_threshold`` are ignored.
    """

    neutral_low: float = 4.5
    neutral_high: float = 5.5
    unit_adjustment: float = 0.11
    person_score_threshold: float = 0.5

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{f.name} must be a finite number, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        if not 1.0 <= self.neutral_low <= self.neutral_high <= 10.0:
            raise ValueError(
                f"neutral band must satisfy 1 <= low <= high <= 10, got [{self.neutral_low}, {self.neutral_high}]"
            )
        # zero is accepted so that fusion can be switched off for identity checks
        if self.unit_adjustment < 0:
            raise ValueError(f"unit_adjustment must be non-negative, got {self.unit_adjustment}")
        if not 0.0 <= self.person_score_threshold <= 1.0:
            raise ValueError(f"person_score_threshold must lie in [0, 1], got {self.person_score_threshold}")


@dataclass(frozen=True)
class DominanceSummary:
    overall: float
    person_count: int


def eligible_persons(record: ImageRecord, config: FusionConfig) -> list[PersonDetection]:
    return [
        det
        for det in record.detections
        if det.is_person and det.vad is not None and det.score >= config.person_score_threshold
    ]


def overall_dominance(persons: Sequence[PersonDetection]) -> DominanceSummary:
    """Unweighted mean of per-person dominance.

    ``math.fsum`` rounds the sum once, so the mean does not depend on the
    order of ``persons``.
    """
    if not persons:
        raise EmptyPersonList("overall dominance needs at least one person; use plain classification instead")
    values = [p.vad.dominance for p in persons]
    mean = math.fsum(values) / len(values)
    # keep the mean inside the input range despite the final division rounding
    mean = min(max(mean, min(values)), max(values))
    return DominanceSummary(overall=mean, person_count=len(values))


def dominance_units(overall: float, config: FusionConfig) -> float:
    """Signed distance from the nearest edge of the neutral band, zero inside it."""
    if config.neutral_low <= overall <= config.neutral_high:
        return 0.0
    if overall > config.neutral_high:
        return overall - config.neutral_high
    return overall - config.neutral_low
