"""Accuracy, coverage and vanilla-vs-fused comparison reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .fusion import DEFAULT_ABSTAIN_THRESHOLD, FusedPrediction
from .records import LABELS, POSITIVE


class MissingGroundTruth(ValueError):
    def __init__(self, record_ids: Sequence[str]):
        self.record_ids = list(record_ids)
        shown = ", ".join(self.record_ids[:20])
        more = f" (+{len(self.record_ids) - 20} more)" if len(self.record_ids) > 20 else ""
        super().__init__(f"records without ground truth: {shown}{more}")


class EmptyDataset(ValueError):
    pass


class MismatchedDatasets(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationConfig:
    abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD

    def __post_init__(self) -> None:
        t = self.abstain_threshold
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0.5 <= t <= 1.0:
            raise ValueError(f"abstain_threshold must lie in [0.5, 1.0], got {t!r}")
        object.__setattr__(self, "abstain_threshold", float(t))


@dataclass
class Counts:
    """Additive tallies; partial counts from any split of the data sum to the same total."""

    n_total: int = 0
    n_covered: int = 0
    n_correct: int = 0
    n_correct_covered: int = 0
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def add(self, prediction: FusedPrediction, truth: str, threshold: float) -> None:
        covered = max(prediction.pos, prediction.neg) >= threshold
        correct = prediction.label == truth
        self.n_total += 1
        self.n_covered += covered
        self.n_correct += correct
        self.n_correct_covered += covered and correct
        if prediction.label == POSITIVE:
            if correct:
                self.tp += 1
            else:
                self.fp += 1
        elif correct:
            self.tn += 1
        else:
            self.fn += 1

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(*(a + b for a, b in zip(self._values(), other._values())))

    def _values(self) -> tuple[int, ...]:
        return (self.n_total, self.n_covered, self.n_correct, self.n_correct_covered,
                self.tp, self.fp, self.tn, self.fn)


@dataclass(frozen=True)
class EvaluationReport:
    n_total: int
    n_covered: int
    n_correct: int
    n_correct_covered: int
    accuracy: float
    coverage: float
    selective_accuracy: Optional[float]
    confusion: dict = field(default_factory=dict)
    abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD

    @classmethod
    def from_counts(cls, counts: Counts, threshold: float) -> "EvaluationReport":
        if counts.n_total == 0:
            raise EmptyDataset("cannot evaluate an empty dataset")
        selective = counts.n_correct_covered / counts.n_covered if counts.n_covered else None
        return cls(
            n_total=counts.n_total,
            n_covered=counts.n_covered,
            n_correct=counts.n_correct,
            n_correct_covered=counts.n_correct_covered,
            accuracy=counts.n_correct / counts.n_total,
            coverage=counts.n_covered / counts.n_total,
            selective_accuracy=selective,
            confusion={"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn},
            abstain_threshold=threshold,
        )

    def to_dict(self) -> dict:
        out = {
            "n_total": self.n_total,
            "n_covered": self.n_covered,
            "n_correct": self.n_correct,
            "n_correct_covered": self.n_correct_covered,
            "accuracy": self.accuracy,
            "coverage": self.coverage,
            "confusion": dict(self.confusion),
            "abstain_threshold": self.abstain_threshold,
        }
        if self.selective_accuracy is not None:
            out["selective_accuracy"] = self.selective_accuracy
        return out


def evaluate(
    pairs: Iterable[tuple[FusedPrediction, Optional[str]]],
    config: Optional[EvaluationConfig] = None,
) -> EvaluationReport:
    """Score ``(prediction, ground_truth)`` pairs.

    Accuracy uses the argmax label of every record; coverage counts records
    whose top probability reaches the abstain threshold, and selective
    accuracy is accuracy over that covered subset.
    """
    config = config or EvaluationConfig()
    counts = Counts()
    missing = []
    for prediction, truth in pairs:
        if truth not in LABELS:
            missing.append(prediction.record_id)
            continue
        counts.add(prediction, truth, config.abstain_threshold)
    if missing:
        raise MissingGroundTruth(missing)
    return EvaluationReport.from_counts(counts, config.abstain_threshold)


def coverage_curve(predictions: Sequence[FusedPrediction], thresholds: Sequence[float]) -> list[float]:
    if not predictions:
        raise EmptyDataset("cannot compute coverage of an empty dataset")
    conf = [p.confidence for p in predictions]
    return [sum(c >= t for c in conf) / len(conf) for t in thresholds]


@dataclass(frozen=True)
class ReportRow:
    """One backbone's vanilla and fused metrics with their differences.

    Accuracy and coverage deltas are in percentage points; the relative
    coverage change is a percentage of the vanilla coverage and is None when
    vanilla coverage is zero.
    """

    backbone: str
    vanilla_accuracy: float
    vanilla_coverage: float
    fused_accuracy: float
    fused_coverage: float
    accuracy_delta_pts: float
    coverage_delta_pts: float
    coverage_relative_pct: Optional[float]
    accuracy_relative_pct: Optional[float]

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone,
            "vanilla": {"accuracy": self.vanilla_accuracy, "coverage": self.vanilla_coverage},
            "fused": {"accuracy": self.fused_accuracy, "coverage": self.fused_coverage},
            "accuracy_delta_pts": self.accuracy_delta_pts,
            "coverage_delta_pts": self.coverage_delta_pts,
            "coverage_relative_pct": self.coverage_relative_pct,
            "accuracy_relative_pct": self.accuracy_relative_pct,
        }


def _relative(new: float, old: float) -> Optional[float]:
    return None if old == 0 else (new - old) / old * 100.0


def _row(backbone: str, v_acc: float, v_cov: float, f_acc: float, f_cov: float) -> ReportRow:
    return ReportRow(
        backbone=backbone,
        vanilla_accuracy=v_acc,
        vanilla_coverage=v_cov,
        fused_accuracy=f_acc,
        fused_coverage=f_cov,
        accuracy_delta_pts=(f_acc - v_acc) * 100.0,
        coverage_delta_pts=(f_cov - v_cov) * 100.0,
        coverage_relative_pct=_relative(f_cov, v_cov),
        accuracy_relative_pct=_relative(f_acc, v_acc),
    )


def compare(vanilla: EvaluationReport, fused: EvaluationReport, backbone_name: str) -> ReportRow:
    if vanilla.n_total != fused.n_total:
        raise MismatchedDatasets(
            f"vanilla and fused reports cover different datasets ({vanilla.n_total} vs {fused.n_total} records)"
        )
    return _row(backbone_name, vanilla.accuracy, vanilla.coverage, fused.accuracy, fused.coverage)


def mean_row(rows: Sequence[ReportRow], name: str = "mean") -> ReportRow:
    """Column-wise mean of several rows; deltas are recomputed from the means."""
    if not rows:
        raise EmptyDataset("no rows to average")
    cols = [
        math.fsum(getattr(r, attr) for r in rows) / len(rows)
        for attr in ("vanilla_accuracy", "vanilla_coverage", "fused_accuracy", "fused_coverage")
    ]
    return _row(name, *cols)


def _pct(value: float) -> str:
    return f"{value * 100:.2f}%"


def _signed(value: Optional[float], unit: str) -> str:
    return "n/a" if value is None else f"{value:+.2f}{unit}"


def render_table(rows: Sequence[ReportRow], abstain_threshold: float, mean: bool = True) -> str:
    """Aligned text table; ``*`` marks the leading coverage of each row."""
    header = ["backbone", "vanilla acc.", "vanilla cov.", "fused acc.", "fused cov.", "d acc.", "d cov.", "rel. cov."]
    body_rows = list(rows)
    if mean and len(body_rows) > 1:
        body_rows.append(mean_row(body_rows))
    cells = []
    for r in body_rows:
        lead = max(r.vanilla_coverage, r.fused_coverage)
        v_mark = "*" if r.vanilla_coverage == lead else " "
        f_mark = "*" if r.fused_coverage == lead else " "
        cells.append([
            r.backbone,
            _pct(r.vanilla_accuracy),
            _pct(r.vanilla_coverage) + v_mark,
            _pct(r.fused_accuracy),
            _pct(r.fused_coverage) + f_mark,
            _signed(r.accuracy_delta_pts, " pts"),
            _signed(r.coverage_delta_pts, " pts"),
            _signed(r.coverage_relative_pct, "%"),
        ])
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h) for i, h in enumerate(header)]

    def fmt(row: Sequence[str]) -> str:
        first = row[0].ljust(widths[0])
        rest = [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        return "  ".join([first, *rest]).rstrip()

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    for i, c in enumerate(cells):
        if mean and len(rows) > 1 and i == len(cells) - 1:
            lines.append("  ".join("-" * w for w in widths))
        lines.append(fmt(c))
    lines.append("")
    lines.append("* leading coverage in row")
    lines.append(
        f"coverage: share of records with max(pos, neg) >= {abstain_threshold:g}; "
        "this abstention threshold is a configurable choice of this tool"
    )
    return "\n".join(lines) + "\n"
