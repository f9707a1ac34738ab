import hashlib

import pytest

from domfuse.dominance import FusionConfig, eligible_persons, overall_dominance
from domfuse.fixtures import ScenarioSpec, SplitMix64, flip_scenario, generate
from domfuse.fusion import fuse
from domfuse.oracle import (
    edge_records,
    mismatch,
    oracle_fuse,
    random_config,
    run_self_check,
    self_check_records,
)
from domfuse.records import serialize_record

# SplitMix64 reference sequence for seed 0
SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
SEED7_SHA256 = "1f928ac4596a817c00531229066513b20d0ad501bad8cb73d5bac2ea0e182c91"


def dataset_bytes(records):
    return "".join(serialize_record(r) + "\n" for r in records).encode()


def test_splitmix_reference_outputs():
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == SEED0


def test_splitmix_derived_draws():
    rng = SplitMix64(0)
    assert rng.uniform() == (SEED0[0] >> 11) / 2**53
    rng = SplitMix64(0)
    assert rng.below(10) == ((SEED0[0] >> 32) * 10) >> 32 == 8


def test_empty_spec():
    assert generate(ScenarioSpec(n_records=0)) == []


def test_generation_is_deterministic():
    spec = ScenarioSpec(n_records=100, seed=7)
    assert dataset_bytes(generate(spec)) == dataset_bytes(generate(spec))
    assert hashlib.sha256(dataset_bytes(generate(spec))).hexdigest() == SEED7_SHA256


def test_different_seeds_differ():
    a = generate(ScenarioSpec(n_records=20, seed=1))
    b = generate(ScenarioSpec(n_records=20, seed=2))
    assert a != b


@pytest.mark.parametrize(
    "regime, low, high",
    [("submissive", 1.0, 4.5), ("neutral", 4.5, 5.5), ("dominant", 5.5, 10.0)],
)
def test_regime_subranges(regime, low, high):
    cfg = FusionConfig()
    recs = generate(ScenarioSpec(n_records=300, seed=3, person_count_range=(1, 5), dominance_regime=regime))
    for rec in recs:
        for det in rec.detections:
            if det.vad is not None:
                d = det.vad.dominance
                assert low <= d <= high
                if regime == "submissive":
                    assert d < 4.5
                if regime == "dominant":
                    assert d > 5.5
        persons = eligible_persons(rec, cfg)
        if persons and regime == "neutral":
            assert 4.5 <= overall_dominance(persons).overall <= 5.5
            pred = fuse(rec, cfg)
            assert (pred.pos, pred.neg) == (rec.classifier.pos, rec.classifier.neg)


def test_person_count_and_labels():
    recs = generate(ScenarioSpec(n_records=2000, seed=5, person_count_range=(2, 3), positive_fraction=0.25))
    for rec in recs:
        assert 2 <= sum(d.is_person for d in rec.detections) <= 3
    share = sum(r.ground_truth == "positive" for r in recs) / len(recs)
    assert 0.2 < share < 0.3


def test_sharpness_pushes_scores_to_extremes():
    soft = generate(ScenarioSpec(n_records=500, seed=9, classifier_sharpness=0.5))
    sharp = generate(ScenarioSpec(n_records=500, seed=9, classifier_sharpness=5.0))

    def mean_conf(rs):
        return sum(max(r.classifier.pos, r.classifier.neg) for r in rs) / len(rs)

    assert mean_conf(sharp) > mean_conf(soft)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_records": -1},
        {"person_count_range": (3, 1)},
        {"dominance_regime": "calm"},
        {"classifier_sharpness": 0.0},
        {"positive_fraction": 1.5},
        {"seed": -1},
    ],
)
def test_invalid_spec(kwargs):
    with pytest.raises(ValueError):
        ScenarioSpec(**kwargs)


def test_spec_from_mapping():
    spec = ScenarioSpec.from_mapping({"n_records": 5, "person_count_range": [1, 2]})
    assert spec.person_count_range == (1, 2)
    with pytest.raises(ValueError):
        ScenarioSpec.from_mapping({"bogus": 1})


def test_flip_scenario_contents():
    recs = flip_scenario(0)
    by_id = {r.id: r for r in recs}
    flip = fuse(by_id["flip_000"])
    assert abs(flip.pos - 0.67) <= 1e-12 and flip.label == "positive"
    assert by_id["flip_000"].classifier.label == "negative"
    strong = fuse(by_id["strengthen_000"])
    assert abs(strong.pos - 0.82) <= 1e-12 and strong.label == "positive"
    neutral = fuse(by_id["neutral_000"])
    assert neutral.pos == 0.5 and neutral.label == by_id["neutral_000"].classifier.label
    flips = [r for r in recs if fuse(r).label != r.classifier.label]
    assert flips and all(r.id.startswith("flip") for r in flips)
    assert dataset_bytes(flip_scenario(4)) == dataset_bytes(flip_scenario(4))


def test_oracle_matches_engine_on_edges():
    for rec in edge_records():
        assert mismatch(fuse(rec), oracle_fuse(rec)) is None, rec.id


def test_oracle_matches_engine_under_random_configs():
    rng = SplitMix64(99)
    recs = self_check_records(seed=11, n=300)
    for _ in range(20):
        cfg = random_config(rng)
        for rec in recs:
            assert mismatch(fuse(rec, cfg), oracle_fuse(rec, cfg)) is None


def test_self_check_passes():
    result = run_self_check(records=self_check_records(n=2000))
    assert result.ok, result.failures


def _unclamped(record, config):
    """Engine mutant without saturation."""
    pred = fuse(record, config)
    if pred.fallback:
        return pred
    units = 0.0
    o = pred.dominance.overall
    if o > config.neutral_high:
        units = o - config.neutral_high
    elif o < config.neutral_low:
        units = o - config.neutral_low
    adj = abs(units) * config.unit_adjustment
    pos = record.classifier.pos - adj if units > 0 else record.classifier.pos + adj
    return type(pred)(record.id, pos, 1 - pos, pred.label, pred.abstained, pred.adjustment, pred.dominance, False)


def _shifted_band(record, config):
    """Engine mutant with the neutral band collapsed to a point."""
    return fuse(record, FusionConfig(5.0, 5.0, config.unit_adjustment, config.person_score_threshold))


def _mean_over_all_persons(record, config):
    """Engine mutant that ignores the detector-confidence gate."""
    return fuse(record, FusionConfig(config.neutral_low, config.neutral_high, config.unit_adjustment, 0.0))


@pytest.mark.parametrize("mutant, culprit", [
    (_unclamped, ("scale_min", "scale_max", "saturate")),
    (_shifted_band, ("edge",)),
    (_mean_over_all_persons, ("low_confidence",)),
])
def test_self_check_catches_mutants(mutant, culprit):
    result = run_self_check(fuse_fn=mutant, records=edge_records())
    assert not result.ok
    assert any(name in result.failures[0] for name in culprit)
