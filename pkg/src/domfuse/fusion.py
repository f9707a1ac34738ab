"""Dominance-adjusted classification.

An image with eligible persons has its raw displaced-people probability
shifted against the overall dominance: in-control crowds lower it,
submissive crowds raise it. Images without eligible persons keep the raw
classifier scores unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .dominance import (
    DominanceSummary,
    FusionConfig,
    dominance_units,
    eligible_persons,
    overall_dominance,
)
from .records import NEGATIVE, POSITIVE, ClassifierScores, ImageRecord

DEFAULT_ABSTAIN_THRESHOLD = 0.75


@dataclass(frozen=True)
class FusedPrediction:
    record_id: str
    pos: float
    neg: float
    label: str
    abstained: bool
    adjustment: float = 0.0
    dominance: Optional[DominanceSummary] = None
    fallback: bool = False

    @property
    def confidence(self) -> float:
        return max(self.pos, self.neg)

    def to_dict(self) -> dict:
        return {
            "id": self.record_id,
            "pos": self.pos,
            "neg": self.neg,
            "label": self.label,
            "abstained": self.abstained,
            "fallback": self.fallback,
            "adjustment": self.adjustment,
            "overall_dominance": None if self.dominance is None else self.dominance.overall,
            "person_count": 0 if self.dominance is None else self.dominance.person_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(", ", ": "), allow_nan=False)


def argmax_label(pos: float, neg: float) -> str:
    # a tie carries no evidence of displacement
    return POSITIVE if pos > neg else NEGATIVE


def adjust_scores(scores: ClassifierScores, units: float, config: FusionConfig) -> tuple[float, float, float]:
    """Move ``|units| * unit_adjustment`` of probability mass between the classes.

    Positive units (dominant) move mass from ``pos`` to ``neg``, negative units
    (submissive) the other way. A pair pushed outside [0, 1] is saturated at
    (0, 1) or (1, 0). Returns ``(pos, neg, adjustment)`` where ``adjustment``
    is the change actually applied to ``pos``.
    """
    pos, neg = scores.pos, scores.neg
    if units == 0:
        return pos, neg, 0.0
    adj = abs(units) * config.unit_adjustment
    if units > 0:
        new_pos, new_neg, applied = pos - adj, neg + adj, -adj
    else:
        new_pos, new_neg, applied = pos + adj, neg - adj, adj
    if new_pos < 0.0 or new_neg > 1.0:
        new_pos, new_neg = 0.0, 1.0
        applied = new_pos - pos
    elif new_pos > 1.0 or new_neg < 0.0:
        new_pos, new_neg = 1.0, 0.0
        applied = new_pos - pos
    return new_pos, new_neg, applied


def plain_prediction(
    record: ImageRecord, abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD
) -> FusedPrediction:
    """Raw classifier decision, used for person-free images and as the vanilla baseline."""
    pos, neg = record.classifier.pos, record.classifier.neg
    return FusedPrediction(
        record_id=record.id,
        pos=pos,
        neg=neg,
        label=argmax_label(pos, neg),
        abstained=max(pos, neg) < abstain_threshold,
        fallback=True,
    )


def fuse(
    record: ImageRecord,
    config: Optional[FusionConfig] = None,
    abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD,
) -> FusedPrediction:
    config = config or FusionConfig()
    persons = eligible_persons(record, config)
    if not persons:
        return plain_prediction(record, abstain_threshold)
    summary = overall_dominance(persons)
    units = dominance_units(summary.overall, config)
    pos, neg, applied = adjust_scores(record.classifier, units, config)
    return FusedPrediction(
        record_id=record.id,
        pos=pos,
        neg=neg,
        label=argmax_label(pos, neg),
        abstained=max(pos, neg) < abstain_threshold,
        adjustment=applied,
        dominance=summary,
        fallback=False,
    )


def prediction_from_dict(obj: dict) -> FusedPrediction:
    """Rebuild a prediction from one line of fused output."""
    overall = obj.get("overall_dominance")
    summary = None if overall is None else DominanceSummary(float(overall), int(obj.get("person_count", 0)))
    return FusedPrediction(
        record_id=obj["id"],
        pos=float(obj["pos"]),
        neg=float(obj["neg"]),
        label=obj["label"],
        abstained=bool(obj["abstained"]),
        adjustment=float(obj.get("adjustment", 0.0)),
        dominance=summary,
        fallback=bool(obj.get("fallback", False)),
    )
