"""Command-line frontend.

Exit codes: 0 success, 1 validation or domain failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import fields
from pathlib import Path
from typing import Iterator, Optional, Sequence

from . import __version__
from .dominance import FusionConfig
from .fixtures import REGIMES, ScenarioSpec, flip_scenario, generate
from .fusion import fuse, plain_prediction, prediction_from_dict
from .metrics import (
    Counts,
    EmptyDataset,
    EvaluationConfig,
    EvaluationReport,
    MissingGroundTruth,
    compare,
    evaluate,
    mean_row,
    render_table,
)
from .oracle import SELF_CHECK_RECORDS, SELF_CHECK_SEED, run_self_check, self_check_records
from .records import DuplicateId, RecordError, dump_dataset, iter_lines, iter_records, parse_record

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("domfuse")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
ENV_PREFIX = "DOMFUSE_"
FUSION_FIELDS = tuple(f.name for f in fields(FusionConfig))
EVALUATION_FIELDS = tuple(f.name for f in fields(EvaluationConfig))


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


# -- configuration -----------------------------------------------------------


def _read_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from None
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"invalid TOML in {path}: {exc}") from None
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def resolve_config(args: argparse.Namespace, environ=os.environ) -> tuple[FusionConfig, EvaluationConfig]:
    """Defaults, then the TOML file, then ``DOMFUSE_*`` variables, then flags."""
    values: dict = {}
    if getattr(args, "config", None):
        file_values = _read_toml(args.config)
        unknown = set(file_values) - set(FUSION_FIELDS + EVALUATION_FIELDS)
        if unknown:
            raise CliError(f"unknown config keys in {args.config}: {sorted(unknown)}")
        values.update(file_values)
    for name in FUSION_FIELDS + EVALUATION_FIELDS:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            try:
                values[name] = float(raw)
            except ValueError:
                raise CliError(f"{ENV_PREFIX}{name.upper()} must be a number, got {raw!r}") from None
    for name in FUSION_FIELDS + EVALUATION_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    try:
        fusion = FusionConfig(**{k: v for k, v in values.items() if k in FUSION_FIELDS})
        evaluation = EvaluationConfig(**{k: v for k, v in values.items() if k in EVALUATION_FIELDS})
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from None
    return fusion, evaluation


# -- I/O helpers -------------------------------------------------------------


@contextmanager
def open_input(path: str) -> Iterator:
    if path == "-":
        yield sys.stdin.buffer
        return
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    with fh:
        yield fh


@contextmanager
def open_output(path: Optional[str]) -> Iterator:
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None
    with fh:
        yield fh


def _chunks(lines: Iterator[tuple[int, str]], size: int) -> Iterator[list[tuple[int, str]]]:
    chunk = []
    for item in lines:
        chunk.append(item)
        if len(chunk) >= size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def _fuse_chunk(job: tuple[list[tuple[int, str]], FusionConfig, float]) -> list[tuple]:
    """Worker body: ``(line, id, output_json, raw_label, fused_label, fallback)`` or ``(line, None, error)``."""
    chunk, config, threshold = job
    out = []
    for number, text in chunk:
        try:
            record = parse_record(text, number)
        except RecordError as exc:
            out.append((number, None, str(exc)))
            continue
        fused = fuse(record, config, threshold)
        out.append((number, record.id, fused.to_json(), record.classifier.label, fused.label, fused.fallback))
    return out


def _ordered_results(jobs: Iterator, workers: int) -> Iterator[list[tuple]]:
    """Map ``_fuse_chunk`` over jobs, in input order, with bounded lookahead."""
    if workers <= 1:
        for job in jobs:
            yield _fuse_chunk(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        for job in jobs:
            pending.append(pool.submit(_fuse_chunk, job))
            if len(pending) >= 2 * workers:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


# -- subcommands -------------------------------------------------------------


def run_fuse(args: argparse.Namespace) -> int:
    fusion, evaluation = resolve_config(args)
    processed = fallbacks = flips = 0
    errors: list[str] = []
    seen: set[str] = set()
    with open_input(args.input) as src, open_output(args.output) as sink:
        try:
            jobs = ((chunk, fusion, evaluation.abstain_threshold) for chunk in _chunks(iter_lines(src), args.chunk_size))
            for results in _ordered_results(jobs, args.workers):
                for number, record_id, *rest in results:
                    if record_id is None:
                        errors.append(rest[0])
                    elif record_id in seen:
                        errors.append(str(DuplicateId("duplicate record id", line=number, record_id=record_id)))
                    else:
                        seen.add(record_id)
                        line, raw_label, fused_label, fallback = rest
                        sink.write(line + "\n")
                        processed += 1
                        fallbacks += fallback
                        flips += raw_label != fused_label
                        continue
                    if not args.keep_going:
                        raise CliError(errors[0])
        except RecordError as exc:
            errors.append(str(exc))
            if not args.keep_going:
                raise CliError(str(exc)) from None
        except OSError as exc:
            raise CliError(f"I/O failure: {exc}", EXIT_IO) from None
    print(f"fuse: {processed} records processed, {fallbacks} fallback, {flips} flipped vs raw argmax", file=sys.stderr)
    if errors:
        for message in errors:
            print(f"error: {message}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _first_object(path: str) -> Optional[dict]:
    with open_input(path) as src:
        for _, text in iter_lines(src):
            try:
                obj = json.loads(text)
            except json.JSONDecodeError:
                return None
            return obj if isinstance(obj, dict) else None
    return None


def evaluate_raw(source, fusion: FusionConfig, evaluation: EvaluationConfig) -> tuple[EvaluationReport, EvaluationReport]:
    """Stream a labeled raw dataset through both the vanilla and fused paths, keeping counts only."""
    threshold = evaluation.abstain_threshold
    vanilla, fused = Counts(), Counts()
    missing = []
    for record in iter_records(source):
        if record.ground_truth is None:
            missing.append(record.id)
            continue
        vanilla.add(plain_prediction(record, threshold), record.ground_truth, threshold)
        fused.add(fuse(record, fusion, threshold), record.ground_truth, threshold)
    if missing:
        raise MissingGroundTruth(missing)
    return EvaluationReport.from_counts(vanilla, threshold), EvaluationReport.from_counts(fused, threshold)


def _load_truth(path: str) -> dict[str, Optional[str]]:
    with open_input(path) as src:
        return {r.id: r.ground_truth for r in iter_records(src)}


def _iter_predictions(source):
    for number, text in iter_lines(source):
        try:
            yield prediction_from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise RecordError(f"invalid prediction line: {exc}", line=number) from None


def run_evaluate(args: argparse.Namespace) -> int:
    fusion, evaluation = resolve_config(args)
    first = _first_object(args.input)
    is_predictions = first is not None and "classifier" not in first and "label" in first
    if is_predictions:
        if not args.truth:
            raise CliError("evaluating fused predictions requires --truth RAW_DATASET for ground-truth labels")
        truth = _load_truth(args.truth)
        with open_input(args.input) as src:
            report = evaluate(((p, truth.get(p.record_id)) for p in _iter_predictions(src)), evaluation)
        payload = {"fused": report.to_dict()}
        table = None
    else:
        with open_input(args.input) as src:
            vanilla, fused = evaluate_raw(src, fusion, evaluation)
        row = compare(vanilla, fused, args.backbone or Path(args.input).stem)
        payload = {"vanilla": vanilla.to_dict(), "fused": fused.to_dict(), "compare": row.to_dict()}
        table = render_table([row], evaluation.abstain_threshold)
    if args.format in ("json", "both"):
        print(json.dumps(payload, indent=2))
    if args.format in ("table", "both"):
        if table is None:
            print(f"fused: accuracy {report.accuracy:.2%}, coverage {report.coverage:.2%}")
        else:
            print(table, end="")
    return EXIT_OK


def _scenario_from_args(args: argparse.Namespace) -> ScenarioSpec:
    data: dict = {}
    if args.spec:
        data.update(_read_toml(args.spec))
    overrides = {
        "n_records": args.n_records,
        "seed": args.seed,
        "dominance_regime": args.regime,
        "classifier_sharpness": args.sharpness,
        "positive_fraction": args.positive_fraction,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.person_min is not None or args.person_max is not None:
        lo, hi = data.get("person_count_range", (0, 4))
        data["person_count_range"] = (
            args.person_min if args.person_min is not None else lo,
            args.person_max if args.person_max is not None else hi,
        )
    try:
        return ScenarioSpec.from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid scenario: {exc}") from None


def run_gen_fixtures(args: argparse.Namespace) -> int:
    if args.scenario == "flip":
        records = flip_scenario(args.seed or 0)
    else:
        records = generate(_scenario_from_args(args))
    with open_output(args.output) as sink:
        dump_dataset(records, sink)
    log.info("wrote %d records", len(records))
    return EXIT_OK


def _parse_report_input(item: str) -> tuple[str, str]:
    name, sep, path = item.partition("=")
    if sep and name and path:
        return name, path
    return Path(item).stem, item


def run_report(args: argparse.Namespace) -> int:
    from . import plotting

    fusion, evaluation = resolve_config(args)
    threshold = evaluation.abstain_threshold
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc}", EXIT_IO) from None

    rows, runs, reports = [], {}, {}
    for item in args.inputs:
        name, path = _parse_report_input(item)
        if name in runs:
            raise CliError(f"backbone name {name!r} given twice")
        with open_input(path) as src:
            records = list(iter_records(src))
        vanilla = [plain_prediction(r, threshold) for r in records]
        fused = [fuse(r, fusion, threshold) for r in records]
        truth = [r.ground_truth for r in records]
        v_report = evaluate(zip(vanilla, truth), evaluation)
        f_report = evaluate(zip(fused, truth), evaluation)
        rows.append(compare(v_report, f_report, name))
        runs[name] = (vanilla, fused)
        reports[name] = {"vanilla": v_report.to_dict(), "fused": f_report.to_dict()}

    table = render_table(rows, threshold)
    payload = {
        "rows": [r.to_dict() for r in rows],
        "mean": mean_row(rows).to_dict() if len(rows) > 1 else None,
        "reports": reports,
        "config": {
            **{name: getattr(fusion, name) for name in FUSION_FIELDS},
            **{name: getattr(evaluation, name) for name in EVALUATION_FIELDS},
        },
    }
    written = []
    try:
        (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        (out_dir / "report.txt").write_text(table, encoding="utf-8")
        with open(out_dir / "report.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["backbone", "vanilla_accuracy", "vanilla_coverage", "fused_accuracy",
                             "fused_coverage", "accuracy_delta_pts", "coverage_delta_pts", "coverage_relative_pct"])
            for r in rows:
                writer.writerow([r.backbone, r.vanilla_accuracy, r.vanilla_coverage, r.fused_accuracy,
                                 r.fused_coverage, r.accuracy_delta_pts, r.coverage_delta_pts,
                                 "" if r.coverage_relative_pct is None else r.coverage_relative_pct])
        written += [out_dir / "report.json", out_dir / "report.txt", out_dir / "report.csv"]
        if not args.no_figures:
            written.append(plotting.coverage_figure(runs, out_dir / "coverage.png", threshold))
            written.append(plotting.summary_figure(rows, out_dir / "summary.png"))
            for name, (vanilla, fused) in runs.items():
                written.append(plotting.score_shift_figure(vanilla, fused, out_dir / f"score_shift_{name}.png"))
    except OSError as exc:
        raise CliError(f"cannot write report: {exc}", EXIT_IO) from None
    print(table, end="")
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def run_self_check_cmd(args: argparse.Namespace) -> int:
    fusion, _ = resolve_config(args)
    start = time.perf_counter()
    result = run_self_check(records=self_check_records(args.seed, args.records), config=fusion)
    elapsed = time.perf_counter() - start
    if result.ok:
        print(f"self-check passed: {result.checked} records match the reference ({elapsed:.2f}s)")
        return EXIT_OK
    print(f"self-check FAILED after {elapsed:.2f}s", file=sys.stderr)
    for failure in result.failures:
        print(failure, file=sys.stderr)
    return EXIT_INVALID


# -- argument parsing --------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration (flags > DOMFUSE_* env > --config file > defaults)")
    group.add_argument("--config", metavar="TOML", help="TOML file setting any config field")
    group.add_argument("--neutral-low", type=float, dest="neutral_low")
    group.add_argument("--neutral-high", type=float, dest="neutral_high")
    group.add_argument("--unit-adjustment", type=float, dest="unit_adjustment")
    group.add_argument("--person-score-threshold", type=float, dest="person_score_threshold")
    group.add_argument("--abstain-threshold", type=float, dest="abstain_threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="domfuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="apply dominance fusion to a raw dataset")
    p.add_argument("input", help="raw JSONL dataset, or - for stdin")
    p.add_argument("-o", "--output", help="fused JSONL output (default stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--chunk-size", type=int, default=1024)
    p.add_argument("--keep-going", action="store_true", help="report every invalid line instead of stopping")
    _add_config_flags(p)
    p.set_defaults(func=run_fuse)

    p = sub.add_parser("evaluate", help="accuracy and coverage of raw or fused data")
    p.add_argument("input", help="raw JSONL dataset or fused predictions, or - for stdin")
    p.add_argument("--truth", help="raw dataset supplying ground truth when INPUT holds fused predictions")
    p.add_argument("--format", choices=("json", "table", "both"), default="json")
    p.add_argument("--backbone", help="row name in the comparison (default: input file stem)")
    _add_config_flags(p)
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("gen-fixtures", help="write a deterministic synthetic dataset")
    p.add_argument("-o", "--output", help="output JSONL (default stdout)")
    p.add_argument("--scenario", choices=("random", "flip"), default="random")
    p.add_argument("--spec", metavar="TOML", help="scenario fields as TOML")
    p.add_argument("--n-records", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--person-min", type=int)
    p.add_argument("--person-max", type=int)
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--sharpness", type=float)
    p.add_argument("--positive-fraction", type=float)
    p.set_defaults(func=run_gen_fixtures)

    p = sub.add_parser("report", help="comparison table, JSON, CSV and figures for one or more datasets")
    p.add_argument("inputs", nargs="+", metavar="[NAME=]PATH", help="labeled raw datasets, one per backbone")
    p.add_argument("--out-dir", default="report")
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=run_report)

    p = sub.add_parser("self-check", help="compare the engine against the reference on generated records")
    p.add_argument("--records", type=int, default=SELF_CHECK_RECORDS)
    p.add_argument("--seed", type=int, default=SELF_CHECK_SEED)
    _add_config_flags(p)
    p.set_defaults(func=run_self_check_cmd)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (RecordError, MissingGroundTruth, EmptyDataset, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
