"""Rubric scores, aggregation to earnestness classes, and agreement statistics.

Scores are 1..5 per (annotator, question, unique text). Aggregation
averages annotators and maps the mean to a class: below 3 is non-earnest,
exactly 3 is neutral (excluded from training), above 3 is earnest. The
exactly-3 comparison is done in integers (3 * n vs the score sum), never
with floating-point equality.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from itertools import combinations
from pathlib import Path

from .corpus import Store
from .util import DataError, parse_utc, utc_now

NON_EARNEST = "non_earnest"
NEUTRAL = "neutral"
EARNEST = "earnest"

SCORE_MIN, SCORE_MAX = 1, 5

_LABEL_HEADER = ["annotator_id", "question_id", "normalized_text", "score", "labeled_at"]


@dataclass(frozen=True)
class EarnestnessLabel:
    annotator_id: str
    question_id: str
    normalized_text: str
    score: int
    labeled_at: datetime


@dataclass(frozen=True)
class AggregatedLabel:
    question_id: str
    normalized_text: str
    mean_score: float
    n_annotators: int
    label_class: str


def score_class(score: int) -> str:
    """Collapse a 1..5 rubric score to the 3-class scale used for agreement."""
    if score <= 2:
        return NON_EARNEST
    if score == 3:
        return NEUTRAL
    return EARNEST


def class_of_scores(scores: list[int]) -> str:
    """Class of the mean score, with the exact-3 case decided in integers."""
    total, n = sum(scores), len(scores)
    if total < 3 * n:
        return NON_EARNEST
    if total == 3 * n:
        return NEUTRAL
    return EARNEST


def record_label(
    store: Store,
    annotator_id: str,
    question_id: str,
    normalized_text: str,
    score: int,
    labeled_at: datetime | None = None,
) -> EarnestnessLabel:
    """Upsert one annotator's score; re-submitting overwrites with a new timestamp."""
    # bool passes isinstance(int) but is never a rubric score
    if not isinstance(score, int) or isinstance(score, bool) or not SCORE_MIN <= score <= SCORE_MAX:
        raise DataError(f"score must be an integer in {SCORE_MIN}..{SCORE_MAX}, got {score!r}")
    store.get_question(question_id)
    known = {u.normalized_text for u in store.unique_responses(question_id)}
    if normalized_text not in known:
        raise DataError(
            f"text is not a response to question {question_id!r}: {normalized_text!r}"
        )
    ts = labeled_at if labeled_at is not None else utc_now()
    store.upsert_label(annotator_id, question_id, normalized_text, score, ts.isoformat())
    return EarnestnessLabel(annotator_id, question_id, normalized_text, score, ts)


def labels_for(store: Store, question_id: str | None = None) -> list[EarnestnessLabel]:
    return [
        EarnestnessLabel(a, q, t, s, parse_utc(ts))
        for a, q, t, s, ts in store.label_rows(question_id)
    ]


def aggregate(store: Store, question_id: str, normalized_text: str) -> AggregatedLabel:
    """Mean score and class for one (question, text); all member responses inherit it."""
    scores = [
        lab.score
        for lab in labels_for(store, question_id)
        if lab.normalized_text == normalized_text
    ]
    if not scores:
        raise DataError(f"no labels for ({question_id!r}, {normalized_text!r})")
    return AggregatedLabel(
        question_id=question_id,
        normalized_text=normalized_text,
        mean_score=sum(scores) / len(scores),
        n_annotators=len(scores),
        label_class=class_of_scores(scores),
    )


def aggregated_labels(store: Store, question_id: str | None = None) -> list[AggregatedLabel]:
    """Aggregate every labeled (question, text) key, sorted for determinism."""
    by_key: dict[tuple[str, str], list[int]] = {}
    for lab in labels_for(store, question_id):
        by_key.setdefault((lab.question_id, lab.normalized_text), []).append(lab.score)
    return [
        AggregatedLabel(
            question_id=q,
            normalized_text=t,
            mean_score=sum(scores) / len(scores),
            n_annotators=len(scores),
            label_class=class_of_scores(scores),
        )
        for (q, t), scores in sorted(by_key.items())
    ]


def agreement(store: Store, question_id: str | None = None) -> dict:
    """Inter-rater agreement on the 3-class scale.

    The primary statistic is mean pairwise percent agreement: for each
    annotator pair, the fraction of co-labeled items on which their classes
    match, averaged over pairs that share at least one item. Fleiss' kappa
    (variable raters per item generalization) is reported alongside.
    """
    per_item: dict[tuple[str, str], dict[str, str]] = {}
    for lab in labels_for(store, question_id):
        per_item.setdefault((lab.question_id, lab.normalized_text), {})[
            lab.annotator_id
        ] = score_class(lab.score)
    annotators = sorted({a for item in per_item.values() for a in item})
    if len(annotators) < 2:
        raise DataError("agreement needs at least 2 annotators")
    pair_fractions = []
    for a, b in combinations(annotators, 2):
        shared = [item for item in per_item.values() if a in item and b in item]
        if shared:
            equal = sum(1 for item in shared if item[a] == item[b])
            pair_fractions.append(equal / len(shared))
    if not pair_fractions:
        raise DataError("no item is labeled by 2 or more annotators")
    return {
        "pairwise_percent": sum(pair_fractions) / len(pair_fractions),
        "fleiss_kappa": _fleiss_kappa(list(per_item.values())),
        "n_items": len(per_item),
        "n_annotators": len(annotators),
    }


def _fleiss_kappa(items: list[dict[str, str]]) -> float:
    classes = (NON_EARNEST, NEUTRAL, EARNEST)
    counts = []
    for item in items:
        row = [sum(1 for c in item.values() if c == cls) for cls in classes]
        if sum(row) >= 2:
            counts.append(row)
    if not counts:
        return 0.0
    total = sum(sum(row) for row in counts)
    p_class = [sum(row[j] for row in counts) / total for j in range(len(classes))]
    p_bar = sum(
        sum(c * (c - 1) for c in row) / (sum(row) * (sum(row) - 1)) for row in counts
    ) / len(counts)
    p_exp = sum(p * p for p in p_class)
    if p_exp >= 1.0:
        return 1.0 if p_bar >= 1.0 else 0.0
    return (p_bar - p_exp) / (1.0 - p_exp)


def export_labels(store: Store, path: str | Path) -> int:
    """Write all labels as CSV (documented format); returns the row count."""
    rows = store.label_rows()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_LABEL_HEADER)
        for a, q, t, s, ts in rows:
            writer.writerow([a, q, t, s, ts])
    return len(rows)


def import_labels(store: Store, path: str | Path) -> tuple[int, list[tuple[int, str]]]:
    """Load labels from CSV; malformed rows are rejected with line numbers."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"label file not found: {path}")
    imported = 0
    rejected: list[tuple[int, str]] = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _LABEL_HEADER:
            raise DataError(f"label file must start with header {','.join(_LABEL_HEADER)}")
        for row in reader:
            line = reader.line_num
            if len(row) != len(_LABEL_HEADER):
                rejected.append((line, f"expected {len(_LABEL_HEADER)} fields, got {len(row)}"))
                continue
            annotator_id, question_id, text, score_raw, ts_raw = row
            try:
                score = int(score_raw)
            except ValueError:
                rejected.append((line, f"score {score_raw!r} is not an integer"))
                continue
            try:
                ts = parse_utc(ts_raw)
            except ValueError:
                rejected.append((line, f"bad timestamp {ts_raw!r}"))
                continue
            try:
                record_label(store, annotator_id, question_id, text, score, ts)
            except DataError as e:
                rejected.append((line, str(e)))
                continue
            imported += 1
    return imported, rejected
