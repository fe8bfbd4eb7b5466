"""Command-line front door: ingest, sample, label, classify, project, report.

Exit codes: 0 success, 1 usage error, 2 data error (bad input, missing
store, write-lock contention), 3 internal error. Every randomized command
prints its seed so any output is reproducible from the printed flags.
"""

from __future__ import annotations

import contextlib
import json
import os
import sys
from pathlib import Path

import click
from filelock import FileLock, Timeout

from . import annotation, engagement, features, projection, service
from .classifier import NonEarnestPool, TrainingSetConfig, ablation_grid, classify_question
from .classifier import eval_set_from_labels
from .corpus import ColumnMapping, Store
from .embedding import EmbeddingCache, HashedTrigramProvider, SentenceModelProvider
from .util import DataError, EitError

DEFAULT_FRACTIONS = (0.10, 0.25, 0.50)
DEFAULT_SEED_COUNTS = (5, 10, 20)


def _store(data_dir: str) -> Store:
    return Store(data_dir)


def _provider(model_path: str | None):
    path = model_path or os.environ.get("EIT_MODEL_PATH")
    if path:
        return SentenceModelProvider(path)
    return HashedTrigramProvider()


@contextlib.contextmanager
def _write_lock(store: Store):
    """Fail fast when another process holds the store's write lock."""
    lock = FileLock(store.lock_path)
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise DataError(
            f"another process is writing to {store.data_dir} (lock {store.lock_path})"
        )
    try:
        yield
    finally:
        lock.release()


def _emit(obj, as_json: bool, lines=None):
    if as_json:
        click.echo(json.dumps(obj, indent=2, sort_keys=True))
    else:
        for line in lines or []:
            click.echo(line)


@click.group()
@click.option(
    "--data-dir",
    envvar="EIT_DATA_DIR",
    default=".eit",
    show_default=True,
    help="Store directory (or set EIT_DATA_DIR).",
)
@click.pass_context
def cli(ctx, data_dir):
    """Earnestness inspection toolkit for lecture poll responses."""
    ctx.obj = {"data_dir": data_dir}


@cli.command()
@click.option("--demo", is_flag=True, help="Load the bundled demo corpus.")
@click.pass_context
def init(ctx, demo):
    """Create an empty store in the data directory."""
    store = Store.initialize(ctx.obj["data_dir"])
    click.echo(f"initialized {store.db_path}")
    if demo:
        from .fixtures import load_demo_fixture

        with _write_lock(store):
            load_demo_fixture(store)
        click.echo("loaded demo corpus: 5 questions")


@cli.command()
@click.option("--input", "input_path", required=True, help="Response export CSV.")
@click.option("--mapping", "mapping_path", required=True, help="Column mapping JSON.")
@click.option("--questions", "questions_path", default=None, help="Question roster CSV.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def ingest(ctx, input_path, mapping_path, questions_path, as_json):
    """Load a response export (and optionally a question roster)."""
    store = _store(ctx.obj["data_dir"])
    with _write_lock(store):
        if questions_path:
            n = store.ingest_questions(questions_path)
            if not as_json:
                click.echo(f"questions: {n}")
        report = store.ingest(input_path, ColumnMapping.from_file(mapping_path))
    _emit(
        {"accepted": report.accepted, "rejected": report.rejected},
        as_json,
        [f"accepted: {report.accepted}", f"rejected: {len(report.rejected)}"]
        + [f"  line {line}: {reason}" for line, reason in report.rejected[:20]],
    )


@cli.command()
@click.option("--question", required=True)
@click.option("--n", default=200, show_default=True)
@click.option("--tail", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, help="Write the sample sheet here.")
@click.option("--model-path", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def sample(ctx, question, n, tail, seed, out_path, model_path, as_json):
    """Draw the annotation sample for one question."""
    store = _store(ctx.obj["data_dir"])
    provider = _provider(model_path)
    cache = EmbeddingCache(store.cache_dir)
    config = features.SamplerConfig(seed=seed, tail_fraction=tail, target_n=n)
    rows = features.sample_rows(store, question, config, provider, cache)
    records = [
        {
            "normalized_text": r.normalized_text,
            "metrics": {
                "centroid_distance": r.centroid_distance,
                "frequency": r.frequency,
                "edit_distance_to_mode": r.edit_distance_to_mode,
                "char_length": r.char_length,
            },
        }
        for r in rows
    ]
    if out_path:
        import csv as _csv

        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            w = _csv.writer(fh, lineterminator="\n")
            w.writerow(["normalized_text", "metrics"])
            for rec in records:
                w.writerow([rec["normalized_text"], json.dumps(rec["metrics"], sort_keys=True)])
    _emit(
        {"question_id": question, "seed": seed, "items": records},
        as_json,
        [f"seed: {seed}", f"sampled: {len(records)}"]
        + [rec["normalized_text"] for rec in records],
    )


@cli.group()
def labels():
    """Export, import, and summarize rubric labels."""


@labels.command("export")
@click.option("--out", "out_path", required=True)
@click.pass_context
def labels_export(ctx, out_path):
    store = _store(ctx.obj["data_dir"])
    n = annotation.export_labels(store, out_path)
    click.echo(f"exported: {n}")


@labels.command("import")
@click.option("--input", "input_path", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def labels_import(ctx, input_path, as_json):
    store = _store(ctx.obj["data_dir"])
    with _write_lock(store):
        imported, rejected = annotation.import_labels(store, input_path)
    _emit(
        {"imported": imported, "rejected": rejected},
        as_json,
        [f"imported: {imported}", f"rejected: {len(rejected)}"]
        + [f"  line {line}: {reason}" for line, reason in rejected[:20]],
    )


@labels.command("agreement")
@click.option("--question", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def labels_agreement(ctx, question, as_json):
    store = _store(ctx.obj["data_dir"])
    stats = annotation.agreement(store, question)
    _emit(
        stats,
        as_json,
        [
            f"pairwise percent agreement: {stats['pairwise_percent']:.4f}",
            f"fleiss kappa: {stats['fleiss_kappa']:.4f}",
            f"items: {stats['n_items']}  annotators: {stats['n_annotators']}",
        ],
    )


@cli.command()
@click.option("--question", required=True)
@click.option("--pool-frac", default=0.5, show_default=True)
@click.option("--earnest-seeds", default=20, show_default=True)
@click.option("--k", default=5, show_default=True)
@click.option("--space", type=click.Choice(["embedding", "2d"]), default="embedding")
@click.option("--distance", type=click.Choice(["euclidean", "cosine"]), default="euclidean")
@click.option("--seed", default=0, show_default=True)
@click.option("--model-path", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def classify(ctx, question, pool_frac, earnest_seeds, k, space, distance, seed, model_path, as_json):
    """Classify every unique response of a question and persist the run."""
    store = _store(ctx.obj["data_dir"])
    provider = _provider(model_path)
    cache = EmbeddingCache(store.cache_dir)
    config = TrainingSetConfig(
        target_question_id=question,
        seed=seed,
        non_earnest_fraction=pool_frac,
        earnest_seed_count=earnest_seeds,
        space="projected_2d" if space == "2d" else "embedding",
        k=k,
        distance=distance,
    )
    with _write_lock(store):
        pool = NonEarnestPool.from_store(store)
        result = classify_question(store, config, pool, provider, cache)
    counts: dict[str, int] = {}
    for cls in result["classes"].values():
        counts[cls] = counts.get(cls, 0) + 1
    _emit(
        {k_: v for k_, v in result.items() if k_ != "margins"},
        as_json,
        [
            f"seed: {seed}",
            f"run: {result['run_id']}",
            "classes: " + ", ".join(f"{c}={n}" for c, n in sorted(counts.items())),
        ],
    )


def _parse_grid(grid: str):
    if grid == "default":
        return list(DEFAULT_FRACTIONS), list(DEFAULT_SEED_COUNTS)
    try:
        frac_part, seed_part = grid.split("x")
        fractions = [float(f) for f in frac_part.split(",") if f]
        seed_counts = [int(s) for s in seed_part.split(",") if s]
    except ValueError:
        raise click.BadParameter(
            "grid must be 'default' or 'f1,f2,...xs1,s2,...'", param_hint="--grid"
        )
    if not fractions or not seed_counts:
        raise click.BadParameter("grid has an empty axis", param_hint="--grid")
    return fractions, seed_counts


@cli.command()
@click.option("--question", required=True)
@click.option("--grid", default="default", show_default=True)
@click.option("--eval", "eval_path", default=None, help="Label CSV to import first.")
@click.option("--k", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, help="Write the JSON grid here.")
@click.option("--model-path", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def ablate(ctx, question, grid, eval_path, k, seed, out_path, model_path, as_json):
    """Sweep the training mix over a fractions x seed-counts grid."""
    store = _store(ctx.obj["data_dir"])
    provider = _provider(model_path)
    cache = EmbeddingCache(store.cache_dir)
    fractions, seed_counts = _parse_grid(grid)
    with _write_lock(store):
        if eval_path:
            annotation.import_labels(store, eval_path)
        pool = NonEarnestPool.from_store(store)
        eval_set = eval_set_from_labels(store, provider, cache)
        base = TrainingSetConfig(target_question_id=question, seed=seed, k=k)
        rows = ablation_grid(
            store, fractions, seed_counts, eval_set, pool, base, provider, cache
        )
    cells = [
        {
            "non_earnest_fraction": r["non_earnest_fraction"],
            "earnest_seed_count": r["earnest_seed_count"],
            **r["metrics"].as_dict(),
        }
        for r in rows
    ]
    if out_path:
        Path(out_path).write_text(
            json.dumps(cells, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    _emit(
        cells,
        as_json,
        [f"seed: {seed}"]
        + [
            "frac {non_earnest_fraction:.2f} seeds {earnest_seed_count:>3}  "
            "acc {accuracy:.3f} recall {recall:.3f}".format(**c)
            for c in cells
        ],
    )


@cli.command()
@click.option("--question", required=True)
@click.option("--perplexity", default=30.0, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_path", required=True, help="Coordinate CSV path.")
@click.option("--svg", "svg_path", default=None, help="Also render an SVG scatter.")
@click.option("--model-path", default=None)
@click.pass_context
def project(ctx, question, perplexity, iters, seed, out_path, svg_path, model_path):
    """Project a question's unique responses to 2-D for inspection."""
    store = _store(ctx.obj["data_dir"])
    provider = _provider(model_path)
    cache = EmbeddingCache(store.cache_dir)
    config = projection.TsneConfig(seed=seed, perplexity=perplexity, iterations=iters)
    points = projection.project_question(store, question, config, provider, cache)
    projection.export_scatter(points, out_path, "csv")
    if svg_path:
        projection.export_scatter(points, svg_path, "svg")
    click.echo(f"seed: {seed}")
    click.echo(f"projected: {len(points)} points -> {out_path}")


@cli.command()
@click.option("--atrisk", is_flag=True, help="Emit the at-risk student report.")
@click.option("--attendance", "student", default=None, help="Semester attendance for one student.")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--window", default=3, show_default=True)
@click.option("--min-responses", default=3, show_default=True)
@click.option("--out", "out_path", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def report(ctx, atrisk, student, threshold, window, min_responses, out_path, as_json):
    """Course-policy reports over the latest classification runs."""
    store = _store(ctx.obj["data_dir"])
    if atrisk:
        config = engagement.AtRiskConfig(
            non_earnest_threshold=threshold,
            window_lectures=window,
            min_responses=min_responses,
        )
        flagged = engagement.flag_at_risk(store, config)
        lines = ["student_id\twindow_fraction\tresponses\tnon_earnest"] + [
            "{}\t{:.6f}\t{}\t{}".format(
                f["student_id"],
                f["window_fraction"],
                f["evidence"]["responses"],
                f["evidence"]["non_earnest"],
            )
            for f in flagged
        ]
        if out_path:
            body = (
                json.dumps(flagged, indent=2, sort_keys=True) + "\n"
                if as_json
                else "\n".join(lines) + "\n"
            )
            Path(out_path).write_text(body, encoding="utf-8")
        _emit(flagged, as_json, lines)
    elif student:
        summary = engagement.semester_attendance(store, student)
        _emit(
            summary,
            as_json,
            [
                f"{summary['student_id']}: credited {summary['credited_lectures']} "
                f"of {summary['total_lectures']} lectures, score {summary['score']:.3f}"
            ],
        )
    else:
        raise click.UsageError("choose --atrisk or --attendance <student_id>")


@cli.command()
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def runs(ctx, as_json):
    """List stored classification runs, oldest first."""
    store = _store(ctx.obj["data_dir"])
    rows = store.list_runs()
    _emit(
        rows,
        as_json,
        [
            "{run_id}  {question_id}  {created_at}".format(**r)
            for r in rows
        ]
        or ["no runs"],
    )


@cli.command()
@click.option("--port", default=8787, show_default=True)
@click.option("--static-dir", default=None, help="Directory of built UI assets.")
@click.pass_context
def serve(ctx, port, static_dir):
    """Run the local HTTP API (and the UI when assets are present)."""
    data_dir = ctx.obj["data_dir"]
    Store(data_dir)  # fail fast with exit 2 when uninitialized
    if static_dir is None:
        candidate = Path(data_dir) / "ui"
        static_dir = candidate if candidate.is_dir() else None
    service.serve(data_dir, port=port, static_dir=static_dir)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except DataError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except EitError as e:
        click.echo(f"internal error: {e}", err=True)
        return 3
    except Exception as e:  # noqa: BLE001 - the CLI boundary maps everything
        click.echo(f"internal error: {type(e).__name__}: {e}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
