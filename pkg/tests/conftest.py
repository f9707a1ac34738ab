import json

import pytest
from hypothesis import strategies as st

from domfuse.records import (
    NEGATIVE,
    PERSON,
    POSITIVE,
    BoundingBox,
    ClassifierScores,
    ImageRecord,
    PersonDetection,
    VadTriplet,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
vad_value = st.floats(min_value=1.0, max_value=10.0, allow_nan=False)


@st.composite
def boxes(draw):
    x0 = draw(st.floats(0, 1000, allow_nan=False))
    y0 = draw(st.floats(0, 1000, allow_nan=False))
    return BoundingBox(x0, y0, x0 + draw(st.floats(0.5, 500)), y0 + draw(st.floats(0.5, 500)))


@st.composite
def persons(draw, dominance=vad_value, score=unit):
    return PersonDetection(
        PERSON,
        draw(score),
        draw(boxes()),
        VadTriplet(draw(vad_value), draw(vad_value), draw(dominance)),
    )


@st.composite
def detections(draw):
    if draw(st.booleans()):
        return draw(persons())
    return PersonDetection(draw(st.sampled_from(["car", "dog", "tent"])), draw(unit), draw(boxes()))


@st.composite
def classifier_scores(draw):
    pos = draw(unit)
    return ClassifierScores(pos, 1.0 - pos)


@st.composite
def records(draw, max_detections=5):
    return ImageRecord(
        id=draw(st.text(min_size=1, max_size=12)),
        classifier=draw(classifier_scores()),
        detections=tuple(draw(st.lists(detections(), max_size=max_detections))),
        ground_truth=draw(st.sampled_from([POSITIVE, NEGATIVE, None])),
    )


def person(dominance, score=0.9):
    return PersonDetection(PERSON, score, BoundingBox(0, 0, 10, 20), VadTriplet(5.0, 5.0, dominance))


def record(pos, dominances=(), rid="r", truth=None, scores=None):
    scores = scores or [0.9] * len(dominances)
    dets = tuple(person(d, s) for d, s in zip(dominances, scores))
    return ImageRecord(rid, ClassifierScores(pos, 1.0 - pos), dets, truth)


@pytest.fixture
def sample_line():
    return json.dumps({
        "id": "img_1",
        "classifier": {"pos": 0.6, "neg": 0.4},
        "detections": [
            {"class": "person", "score": 0.9, "box": [10, 20, 110, 220], "vad": {"v": 5.1, "a": 6.0, "d": 7.5}},
        ],
        "ground_truth": "positive",
    })


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" in getattr(rep, "nodeid", "") and rep.when == "call":
                lines.append((rep.nodeid.split("::")[-1], "PASS" if rep.passed else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")
