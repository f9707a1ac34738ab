"""Dominance-weighted fusion of binary image-classifier scores, with coverage evaluation."""

__version__ = "0.1.0"

from .dominance import (
    DominanceSummary,
    EmptyPersonList,
    FusionConfig,
    dominance_units,
    eligible_persons,
    overall_dominance,
)
from .fusion import FusedPrediction, adjust_scores, fuse, plain_prediction
from .metrics import (
    EmptyDataset,
    EvaluationConfig,
    EvaluationReport,
    MismatchedDatasets,
    MissingGroundTruth,
    ReportRow,
    compare,
    evaluate,
)
from .records import (
    BoundingBox,
    ClassifierScores,
    DomainViolation,
    DuplicateId,
    ImageRecord,
    MalformedRecord,
    PersonDetection,
    RecordError,
    SchemaViolation,
    VadTriplet,
    load_dataset,
    parse_record,
    serialize_record,
)
