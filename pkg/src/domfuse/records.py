"""Domain records for upstream model outputs and the JSON Lines dataset format.

Each line of a dataset file holds one image::

    {"id": "img_1",
     "classifier": {"pos": 0.6, "neg": 0.4},
     "detections": [{"class": "person", "score": 0.9,
                     "box": [10, 20, 110, 220],
                     "vad": {"v": 5.1, "a": 6.0, "d": 7.5}}],
     "ground_truth": "positive"}

``pos`` is the classifier probability of "displaced people", ``neg`` of
"no displaced people". ``vad`` is required for persons and forbidden for any
other class. A missing ``detections`` field means an image without detections.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, BinaryIO, Iterable, Iterator, Optional, TextIO, Union

POSITIVE = "positive"
NEGATIVE = "negative"
LABELS = (POSITIVE, NEGATIVE)
PERSON = "person"

VAD_MIN = 1.0
VAD_MAX = 10.0
SUM_TOLERANCE = 1e-9


class RecordError(ValueError):
    """Base class for ingestion failures; carries the line number and record id when known."""

    def __init__(self, message: str, line: Optional[int] = None, record_id: Optional[str] = None):
        self.message = message
        self.line = line
        self.record_id = record_id
        super().__init__(str(self))

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.record_id is not None:
            where.append(f"id {self.record_id!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        return f"{prefix}{self.message}"


class MalformedRecord(RecordError):
    """The line is not a JSON object."""


class SchemaViolation(RecordError):
    """A required field is missing or has the wrong type."""


class DomainViolation(RecordError):
    """A value lies outside its permitted range."""


class DuplicateId(RecordError):
    """Two records in one dataset share an id."""


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if any(not math.isfinite(c) or c < 0 for c in coords):
            raise DomainViolation(f"box coordinates must be finite and non-negative, got {list(coords)}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DomainViolation(f"box must satisfy x_min < x_max and y_min < y_max, got {list(coords)}")

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class VadTriplet:
    """Valence, arousal and dominance, each on the continuous [1, 10] scale."""

    valence: float
    arousal: float
    dominance: float

    def __post_init__(self) -> None:
        for name in ("valence", "arousal", "dominance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and VAD_MIN <= value <= VAD_MAX):
                raise DomainViolation(f"vad {name} must lie in [{VAD_MIN}, {VAD_MAX}], got {value!r}")


@dataclass(frozen=True)
class PersonDetection:
    """One detector output. Non-person classes are kept and carry no VAD estimate."""

    class_label: str
    score: float
    box: BoundingBox
    vad: Optional[VadTriplet] = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise DomainViolation(f"detection score must lie in [0, 1], got {self.score!r}")
        is_person = self.class_label == PERSON
        if is_person and self.vad is None:
            raise DomainViolation("person detection requires a vad estimate")
        if not is_person and self.vad is not None:
            raise DomainViolation(f"vad is only allowed on person detections, not {self.class_label!r}")

    @property
    def is_person(self) -> bool:
        return self.class_label == PERSON


@dataclass(frozen=True)
class ClassifierScores:
    pos: float
    neg: float

    def __post_init__(self) -> None:
        for name in ("pos", "neg"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise DomainViolation(f"classifier {name} must lie in [0, 1], got {value!r}")
        if abs(self.pos + self.neg - 1.0) > SUM_TOLERANCE:
            raise DomainViolation(f"classifier pos + neg must equal 1, got {self.pos!r} + {self.neg!r}")

    @classmethod
    def normalized(cls, pos: float, neg: float) -> "ClassifierScores":
        """Validate, then snap a pair with float noise in its sum onto ``neg = 1 - pos``.

        The snap keeps ``pos`` as given, so re-normalizing an already
        normalized pair is a no-op.
        """
        scores = cls(pos, neg)
        if pos + neg != 1.0:
            scores = cls(pos, 1.0 - pos)
        return scores

    @property
    def label(self) -> str:
        return POSITIVE if self.pos > self.neg else NEGATIVE


@dataclass(frozen=True)
class ImageRecord:
    id: str
    classifier: ClassifierScores
    detections: tuple[PersonDetection, ...] = ()
    ground_truth: Optional[str] = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise SchemaViolation("record id must be a non-empty string")
        if self.ground_truth is not None and self.ground_truth not in LABELS:
            raise DomainViolation(f"ground_truth must be one of {LABELS} or null, got {self.ground_truth!r}")
        object.__setattr__(self, "detections", tuple(self.detections))


# -- parsing -----------------------------------------------------------------


def _number(value: Any, field: str) -> float:
    # bool is an int subclass; a JSON true is never a valid score
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"{field} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise DomainViolation(f"{field} must be finite, got {value!r}")
    return value


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaViolation(f"missing field {where}{key!r}")
    return obj[key]


def _object(value: Any, field: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaViolation(f"{field} must be an object, got {type(value).__name__}")
    return value


def _parse_detection(obj: Any, index: int) -> PersonDetection:
    where = f"detections[{index}]."
    obj = _object(obj, f"detections[{index}]")
    class_label = _require(obj, "class", where)
    if not isinstance(class_label, str):
        raise SchemaViolation(f"{where}class must be a string")
    score = _number(_require(obj, "score", where), f"{where}score")
    box_raw = _require(obj, "box", where)
    if not isinstance(box_raw, list) or len(box_raw) != 4:
        raise SchemaViolation(f"{where}box must be a list of 4 numbers")
    box = BoundingBox(*(_number(c, f"{where}box") for c in box_raw))
    vad = None
    vad_raw = obj.get("vad")
    if vad_raw is not None:
        vad_raw = _object(vad_raw, f"{where}vad")
        vad = VadTriplet(
            valence=_number(_require(vad_raw, "v", f"{where}vad."), f"{where}vad.v"),
            arousal=_number(_require(vad_raw, "a", f"{where}vad."), f"{where}vad.a"),
            dominance=_number(_require(vad_raw, "d", f"{where}vad."), f"{where}vad.d"),
        )
    elif class_label == PERSON:
        raise SchemaViolation(f"missing field {where}'vad' on person detection")
    try:
        return PersonDetection(class_label, score, box, vad)
    except DomainViolation as exc:
        raise DomainViolation(f"{where[:-1]}: {exc.message}") from None


def parse_record(line: Union[str, bytes], line_number: Optional[int] = None) -> ImageRecord:
    """Parse and validate one serialized record.

    Raises MalformedRecord, SchemaViolation or DomainViolation, each tagged
    with ``line_number`` and the record id once it is known.
    """
    record_id = None
    try:
        try:
            obj = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedRecord(f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise MalformedRecord(f"expected a JSON object, got {type(obj).__name__}")
        raw_id = _require(obj, "id", "")
        if not isinstance(raw_id, str) or not raw_id:
            raise SchemaViolation("id must be a non-empty string")
        record_id = raw_id

        clf = _object(_require(obj, "classifier", ""), "classifier")
        classifier = ClassifierScores.normalized(
            _number(_require(clf, "pos", "classifier."), "classifier.pos"),
            _number(_require(clf, "neg", "classifier."), "classifier.neg"),
        )

        raw_detections = obj.get("detections")
        if raw_detections is None:
            raw_detections = []
        if not isinstance(raw_detections, list):
            raise SchemaViolation("detections must be a list")
        detections = tuple(_parse_detection(d, i) for i, d in enumerate(raw_detections))

        truth = obj.get("ground_truth")
        if truth is not None and not isinstance(truth, str):
            raise SchemaViolation("ground_truth must be a string or null")
        return ImageRecord(record_id, classifier, detections, truth)
    except RecordError as exc:
        exc.line = line_number if exc.line is None else exc.line
        exc.record_id = record_id if exc.record_id is None else exc.record_id
        raise


def record_to_dict(record: ImageRecord) -> dict:
    detections = []
    for det in record.detections:
        item: dict[str, Any] = {"class": det.class_label, "score": det.score, "box": det.box.as_list()}
        if det.vad is not None:
            item["vad"] = {"v": det.vad.valence, "a": det.vad.arousal, "d": det.vad.dominance}
        detections.append(item)
    return {
        "id": record.id,
        "classifier": {"pos": record.classifier.pos, "neg": record.classifier.neg},
        "detections": detections,
        "ground_truth": record.ground_truth,
    }


def serialize_record(record: ImageRecord) -> str:
    """One JSON line without the trailing newline."""
    return json.dumps(record_to_dict(record), separators=(", ", ": "), allow_nan=False)


# -- datasets ----------------------------------------------------------------


def iter_lines(source: Union[BinaryIO, TextIO, Iterable]) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for every non-blank line, decoding bytes as UTF-8."""
    for number, raw in enumerate(source, 1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedRecord(f"not valid UTF-8: {exc}", line=number) from None
        if raw.strip():
            yield number, raw


def iter_records(source: Union[BinaryIO, TextIO, Iterable]) -> Iterator[ImageRecord]:
    """Stream validated records, rejecting duplicate ids as they appear."""
    seen: set[str] = set()
    for number, text in iter_lines(source):
        record = parse_record(text, number)
        if record.id in seen:
            raise DuplicateId("duplicate record id", line=number, record_id=record.id)
        seen.add(record.id)
        yield record


def load_dataset(source: Union[BinaryIO, TextIO, Iterable]) -> list[ImageRecord]:
    return list(iter_records(source))


def dump_dataset(records: Iterable[ImageRecord], sink: TextIO) -> None:
    for record in records:
        sink.write(serialize_record(record))
        sink.write("\n")
