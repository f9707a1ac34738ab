import json

import pytest

from domfuse.cli import main, resolve_config, build_parser
from domfuse.fixtures import ScenarioSpec, flip_scenario, generate
from domfuse.records import dump_dataset


def write_dataset(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        dump_dataset(records, fh)
    return str(path)


@pytest.fixture
def raw(tmp_path):
    return write_dataset(tmp_path / "raw.jsonl", generate(ScenarioSpec(n_records=3, seed=1, person_count_range=(1, 3))))


@pytest.fixture
def mixed(tmp_path):
    return write_dataset(tmp_path / "mixed.jsonl", generate(ScenarioSpec(n_records=400, seed=2)))


def read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh]


def test_fuse_three_records(raw, tmp_path, capsys):
    out = tmp_path / "fused.jsonl"
    assert main(["fuse", raw, "-o", str(out)]) == 0
    rows = read_lines(out)
    assert [r["id"] for r in rows] == [r["id"] for r in read_lines(raw)]
    assert "3 records processed" in capsys.readouterr().err


def test_fuse_reports_bad_line(raw, tmp_path, capsys):
    lines = open(raw).read().splitlines()
    lines[1] = lines[1].replace('"pos": ', '"pos": 7')
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["fuse", str(bad), "-o", str(tmp_path / "o.jsonl")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_fuse_keep_going(raw, tmp_path, capsys):
    lines = open(raw).read().splitlines()
    lines.insert(1, "{broken")
    lines.append(lines[0])  # duplicate id
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    out = tmp_path / "o.jsonl"
    assert main(["fuse", str(bad), "-o", str(out), "--keep-going"]) == 1
    err = capsys.readouterr().err
    assert "line 2" in err and "duplicate" in err
    assert len(read_lines(out)) == 3


def test_fuse_zero_adjustment_identity(mixed, tmp_path):
    out = tmp_path / "o.jsonl"
    assert main(["fuse", mixed, "-o", str(out), "--unit-adjustment", "0.0"]) == 0
    for fused, rec in zip(read_lines(out), read_lines(mixed)):
        assert (fused["pos"], fused["neg"]) == (rec["classifier"]["pos"], rec["classifier"]["neg"])


def test_fuse_missing_input(tmp_path, capsys):
    assert main(["fuse", str(tmp_path / "nope.jsonl")]) == 2


def test_fuse_unwritable_output(raw, tmp_path):
    assert main(["fuse", raw, "-o", str(tmp_path / "missing_dir" / "o.jsonl")]) == 2


def test_fuse_worker_count_does_not_change_bytes(mixed, tmp_path):
    outs = []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}.jsonl"
        assert main(["fuse", mixed, "-o", str(out), "--workers", str(workers), "--chunk-size", "17"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_fuse_stdout(raw, capsys):
    assert main(["fuse", raw]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_evaluate_neutral_rows_identical(tmp_path, capsys):
    path = write_dataset(tmp_path / "n.jsonl", generate(ScenarioSpec(n_records=200, seed=3, dominance_regime="neutral")))
    assert main(["evaluate", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["vanilla"] == payload["fused"]
    assert payload["compare"]["coverage_delta_pts"] == 0.0


def test_evaluate_flip_fixture_gains_coverage(tmp_path, capsys):
    path = write_dataset(tmp_path / "flip.jsonl", flip_scenario(0))
    assert main(["evaluate", path, "--format", "both"]) == 0
    out = capsys.readouterr().out
    payload = json.loads(out[: out.index("\n}\n") + 2])
    assert payload["fused"]["coverage"] > payload["vanilla"]["coverage"]
    assert payload["fused"]["accuracy"] > payload["vanilla"]["accuracy"]
    assert "backbone" in out


def test_evaluate_empty(tmp_path, capsys):
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    assert main(["evaluate", str(empty)]) == 1
    assert "empty" in capsys.readouterr().err


def test_evaluate_missing_truth(tmp_path, capsys):
    recs = generate(ScenarioSpec(n_records=4, seed=1))
    lines = []
    for i, rec in enumerate(recs):
        obj = json.loads(json.dumps({"id": rec.id, "classifier": {"pos": rec.classifier.pos, "neg": rec.classifier.neg}}))
        if i % 2 == 0:
            obj["ground_truth"] = "positive"
        lines.append(json.dumps(obj))
    path = tmp_path / "m.jsonl"
    path.write_text("\n".join(lines) + "\n")
    assert main(["evaluate", str(path)]) == 1
    err = capsys.readouterr().err
    assert recs[1].id in err and recs[3].id in err and recs[0].id not in err


def test_fuse_then_evaluate_matches_direct(mixed, tmp_path, capsys):
    fused = tmp_path / "f.jsonl"
    assert main(["fuse", mixed, "-o", str(fused)]) == 0
    capsys.readouterr()
    assert main(["evaluate", str(fused), "--truth", mixed]) == 0
    piped = json.loads(capsys.readouterr().out)
    assert main(["evaluate", mixed]) == 0
    direct = json.loads(capsys.readouterr().out)
    assert piped["fused"] == direct["fused"]


def test_evaluate_predictions_needs_truth(mixed, tmp_path, capsys):
    fused = tmp_path / "f.jsonl"
    main(["fuse", mixed, "-o", str(fused)])
    assert main(["evaluate", str(fused)]) == 1
    assert "--truth" in capsys.readouterr().err


def test_gen_fixtures_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["gen-fixtures", "--seed", "7", "--n-records", "50", "-o", str(a)]) == 0
    assert main(["gen-fixtures", "--seed", "7", "--n-records", "50", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 50


def test_gen_fixtures_spec_file(tmp_path):
    spec = tmp_path / "s.toml"
    spec.write_text('n_records = 10\nseed = 3\nperson_count_range = [2, 2]\ndominance_regime = "dominant"\n')
    out = tmp_path / "o.jsonl"
    assert main(["gen-fixtures", "--spec", str(spec), "--n-records", "5", "-o", str(out)]) == 0
    rows = read_lines(out)
    assert len(rows) == 5
    assert all(sum(d["class"] == "person" for d in r["detections"]) == 2 for r in rows)


def test_gen_fixtures_flip(tmp_path):
    out = tmp_path / "o.jsonl"
    assert main(["gen-fixtures", "--scenario", "flip", "-o", str(out)]) == 0
    assert read_lines(out)[0]["id"] == "flip_000"


def test_gen_fixtures_invalid_spec(capsys):
    assert main(["gen-fixtures", "--person-min", "3", "--person-max", "1"]) == 1


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text("unit_adjustment = 0.2\nneutral_low = 4.0\n[evaluation]\nabstain_threshold = 0.9\n")
    parser = build_parser()
    args = parser.parse_args(["fuse", "x", "--config", str(cfg)])
    fusion, evaluation = resolve_config(args, environ={})
    assert (fusion.unit_adjustment, fusion.neutral_low, evaluation.abstain_threshold) == (0.2, 4.0, 0.9)
    fusion, _ = resolve_config(args, environ={"DOMFUSE_UNIT_ADJUSTMENT": "0.3"})
    assert fusion.unit_adjustment == 0.3
    args = parser.parse_args(["fuse", "x", "--config", str(cfg), "--unit-adjustment", "0.05"])
    fusion, _ = resolve_config(args, environ={"DOMFUSE_UNIT_ADJUSTMENT": "0.3"})
    assert fusion.unit_adjustment == 0.05 and fusion.neutral_low == 4.0


def test_env_override_through_main(raw, tmp_path, monkeypatch):
    monkeypatch.setenv("DOMFUSE_UNIT_ADJUSTMENT", "0")
    out = tmp_path / "o.jsonl"
    assert main(["fuse", raw, "-o", str(out)]) == 0
    assert all(r["adjustment"] == 0.0 for r in read_lines(out))


@pytest.mark.parametrize("flags", [["--neutral-low", "6", "--neutral-high", "5"], ["--abstain-threshold", "0.2"]])
def test_invalid_config_flags(raw, flags, capsys):
    assert main(["fuse", raw, *flags]) == 1
    assert "invalid configuration" in capsys.readouterr().err


def test_unknown_config_key(raw, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("factor = 1\n")
    assert main(["fuse", raw, "--config", str(cfg)]) == 1


def test_report_writes_tables_and_figures(tmp_path, capsys):
    a = write_dataset(tmp_path / "a.jsonl", generate(ScenarioSpec(n_records=150, seed=4, classifier_sharpness=2.0)))
    b = write_dataset(tmp_path / "b.jsonl", flip_scenario(1))
    out = tmp_path / "rep"
    assert main(["report", f"VGG16={a}", f"ResNet50={b}", "--out-dir", str(out)]) == 0
    table = capsys.readouterr().out
    assert "VGG16" in table and "ResNet50" in table and "mean" in table
    payload = json.loads((out / "report.json").read_text())
    assert [r["backbone"] for r in payload["rows"]] == ["VGG16", "ResNet50"]
    assert payload["mean"]["backbone"] == "mean"
    assert payload["config"]["unit_adjustment"] == 0.11
    assert (out / "report.txt").read_text() == table
    assert (out / "report.csv").read_text().splitlines()[0].startswith("backbone,")
    for name in ("coverage.png", "summary.png", "score_shift_VGG16.png", "score_shift_ResNet50.png"):
        assert (out / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_without_figures(mixed, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", mixed, "--out-dir", str(out), "--no-figures"]) == 0
    assert not list(out.glob("*.png"))
    assert json.loads((out / "report.json").read_text())["rows"][0]["backbone"] == "mixed"


def test_self_check_command(capsys):
    assert main(["self-check", "--records", "500"]) == 0
    assert "self-check passed" in capsys.readouterr().out
