"""Synthetic data: the bundled demo corpus and the two-cluster trend corpus.

The demo corpus (5 word-cloud questions, ~200 responses each, rubric labels
from three annotators) ships as CSV under ``eit.fixture_data`` and drives
the end-to-end path. The trend corpus exists only in memory: texts mapped
to vectors drawn from two Gaussian clusters, used to check how classifier
recall moves across the training-mix grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .annotation import EARNEST, NON_EARNEST
from .classifier import LabeledVector
from .corpus import ColumnMapping, Question, Store, normalize_text
from .util import derive_rng, text_hash

FIXTURE_SEED = 20260101

# derive_rng stream tags for this module
_STREAM_CORPUS = 20
_STREAM_TREND = 21

_QUESTIONS = [
    ("q01", "what was the most confusing idea from today's lecture", "reflection", 1),
    ("q02", "in one phrase, what does gradient descent minimize", "conceptual", 2),
    ("q03", "name a python builtin you used this week", "coding", 3),
    ("q04", "roughly how many samples do we need to see the trend", "numerical", 4),
    ("q05", "which topic should we revisit before the exam", "reflection", 5),
]

_VOCAB = {
    "q01": [
        "backpropagation", "the chain rule", "gradient descent", "overfitting",
        "regularization", "the bias variance tradeoff", "matrix calculus",
        "loss surfaces", "activation functions", "weight initialization",
        "learning rate schedules", "momentum", "batch normalization",
        "softmax", "cross entropy", "convexity", "the update rule",
        "stochastic gradients", "vanishing gradients", "nothing today",
        "the notation", "partial derivatives", "why we need a bias term",
        "feature scaling", "the normal equations",
    ],
    "q02": [
        "the loss function", "training error", "a cost function",
        "prediction error", "the objective", "mean squared error",
        "the empirical risk", "cross entropy loss", "residuals",
        "the distance to the target", "negative log likelihood",
        "the error surface", "a differentiable loss", "squared error",
        "the training objective", "model loss", "the cost", "total error",
    ],
    "q03": [
        "print", "len", "range", "enumerate", "zip", "sorted", "sum", "map",
        "filter", "list", "dict", "set", "min", "max", "open", "input",
        "abs", "round", "type", "isinstance", "any", "all",
    ],
    "q04": [
        "about a hundred", "a few hundred", "maybe 1000", "around 50",
        "at least 30", "100", "500", "more than we have", "thousands",
        "roughly 200", "a couple hundred", "30 per group", "several dozen",
        "it depends on the variance", "enough to fill both classes",
    ],
    "q05": [
        "gradient descent", "regularization", "cross validation",
        "the perceptron", "backpropagation", "decision trees",
        "nearest neighbors", "feature engineering", "probability review",
        "bayes rule", "overfitting", "matrix multiplication",
        "the bias variance tradeoff", "kernel methods", "evaluation metrics",
    ],
}

_JUNK_WORDS = ["idk", "lol", "nothing", "stuff", "na", "meh", "dunno", "pass"]
_NEUTRAL_TEXTS = {
    "q01": "not sure yet",
    "q02": "something about error",
    "q03": "cant remember",
    "q04": "some",
    "q05": "everything",
}


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture file (questions.csv, responses.csv,
    mapping.json, labels.csv)."""
    return Path(resources.files("eit.fixture_data") / name)


def demo_mapping() -> dict:
    """Column mapping for the bundled vendor-style responses.csv."""
    return {
        "columns": {
            "question_id": "Poll ID",
            "student_id": "User",
            "raw_text": "Answer Text",
            "mode": "Channel",
            "submitted_at": "Submitted",
        },
        "timestamp_format": "%Y-%m-%d %H:%M:%S",
        "mode_values": {"live": "synchronous", "makeup": "asynchronous"},
        "delimiter": ",",
    }


def _gibberish(rng) -> str:
    keys = "asdfghjklqwertzxcv"
    n = int(rng.integers(2, 9))
    return "".join(keys[int(rng.integers(0, len(keys)))] for _ in range(n))


def _mangle(rng, text: str) -> str:
    """Raw-text noise the normalizer must undo."""
    r = rng.random()
    if r < 0.25:
        text = text.capitalize()
    elif r < 0.35:
        text = text.upper()
    if rng.random() < 0.15:
        text = "  " + text
    if rng.random() < 0.20:
        text = text.replace(" ", "  ", 1)
    if rng.random() < 0.15:
        text = text + " \n"
    return text


def generate_demo_corpus(seed: int = FIXTURE_SEED) -> dict:
    """Build the demo corpus rows in memory.

    Returns questions, vendor-style response rows, label rows, and the
    per-question sets of non-earnest texts actually emitted (the label
    generator covers exactly those).
    """
    rng = derive_rng(seed, _STREAM_CORPUS)
    students = [f"s{i:03d}" for i in range(1, 221)]
    propensity = {s: 0.72 + 0.26 * rng.random() for s in students}
    slackers = set(students[-6:])  # consistently low-effort, drives at-risk
    async_only = set(students[:10])

    responses = []
    junk_by_question: dict[str, set[str]] = {}
    for qid, _text, _cat, lecture in _QUESTIONS:
        vocab = _VOCAB[qid]
        weights = np.array([1.0 / (i + 1) for i in range(len(vocab))])
        weights /= weights.sum()
        base = f"2026-01-{4 + lecture * 2:02d} 10:00:00"
        day = base[:10]
        junk_by_question[qid] = set()
        offset = 0
        for s in students:
            if rng.random() > propensity[s]:
                continue
            n_subs = 2 if rng.random() < 0.03 else 1
            for _ in range(n_subs):
                junk_rate = 0.8 if s in slackers else 0.04
                if rng.random() < junk_rate:
                    if rng.random() < 0.4:
                        answer = _JUNK_WORDS[int(rng.integers(0, len(_JUNK_WORDS)))]
                    else:
                        answer = _gibberish(rng)
                    junk_by_question[qid].add(normalize_text(answer))
                elif rng.random() < 0.02:
                    answer = _NEUTRAL_TEXTS[qid]
                else:
                    answer = vocab[int(rng.choice(len(vocab), p=weights))]
                offset += 1
                minute = offset // 60
                second = offset % 60
                if s in async_only:
                    channel, stamp = "makeup", f"{day} 20:{minute:02d}:{second:02d}"
                else:
                    channel, stamp = "live", f"{day} 10:{minute:02d}:{second:02d}"
                responses.append(
                    {
                        "Poll ID": qid,
                        "User": s,
                        "Answer Text": _mangle(rng, answer),
                        "Channel": channel,
                        "Submitted": stamp,
                    }
                )

    labels = []
    when = 0
    for qid, _text, _cat, lecture in _QUESTIONS:
        day = 10 + lecture * 2
        for text in sorted(junk_by_question[qid]):
            when += 1
            stamp = f"2026-02-{day:02d}T09:{when // 60:02d}:{when % 60:02d}+00:00"
            labels.append(("a1", qid, text, int(1 + rng.integers(0, 2)), stamp))
            labels.append(("a2", qid, text, int(1 + rng.integers(0, 2)), stamp))
            if rng.random() < 0.5:
                labels.append(("a3", qid, text, int(1 + rng.integers(0, 3)), stamp))
        vocab = _VOCAB[qid]
        for text in vocab[:5]:
            when += 1
            stamp = f"2026-02-{day:02d}T09:{when // 60:02d}:{when % 60:02d}+00:00"
            labels.append(("a1", qid, text, 4, stamp))
            labels.append(("a2", qid, text, 5, stamp))
            labels.append(("a3", qid, text, 4, stamp))
        when += 1
        stamp = f"2026-02-{day:02d}T09:{when // 60:02d}:{when % 60:02d}+00:00"
        for annotator in ("a1", "a2", "a3"):
            labels.append((annotator, qid, _NEUTRAL_TEXTS[qid], 3, stamp))

    return {
        "questions": [
            Question(qid, text, cat, lecture, "word_cloud")
            for qid, text, cat, lecture in _QUESTIONS
        ],
        "responses": responses,
        "labels": labels,
        "junk_by_question": junk_by_question,
    }


def write_demo_fixture(dest: str | Path, seed: int = FIXTURE_SEED) -> dict:
    """Write questions.csv, responses.csv, mapping.json, labels.csv."""
    import csv

    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    corpus = generate_demo_corpus(seed)
    with open(dest / "questions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["question_id", "text", "category", "lecture_number", "poll_kind"])
        for q in corpus["questions"]:
            w.writerow([q.question_id, q.text, q.category, q.lecture_number, q.poll_kind])
    fieldnames = ["Poll ID", "User", "Answer Text", "Channel", "Submitted"]
    with open(dest / "responses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        w.writerows(corpus["responses"])
    (dest / "mapping.json").write_text(
        json.dumps(demo_mapping(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(dest / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["annotator_id", "question_id", "normalized_text", "score", "labeled_at"])
        w.writerows(corpus["labels"])
    return corpus


def load_demo_fixture(store: Store) -> None:
    """Ingest the bundled questions and responses into an initialized store."""
    store.ingest_questions(fixture_path("questions.csv"))
    store.ingest(
        fixture_path("responses.csv"), ColumnMapping.from_file(fixture_path("mapping.json"))
    )


class LookupProvider:
    """Embedding provider backed by a fixed text-to-vector table.

    Used by synthetic corpora where the geometry is the point; unknown
    texts are a hard error rather than a fallback.
    """

    def __init__(self, table: dict[str, np.ndarray], tag: str):
        if not table:
            raise ValueError("lookup table is empty")
        self.table = {normalize_text(t): np.asarray(v, dtype=np.float64) for t, v in table.items()}
        self.dimension = next(iter(self.table.values())).shape[0]
        self.provider_id = f"lookup-{tag}"

    def embed(self, texts: list[str]) -> np.ndarray:
        rows = []
        for t in texts:
            key = normalize_text(t)
            if key not in self.table:
                raise KeyError(f"text not in lookup table: {t!r}")
            rows.append(self.table[key])
        return np.vstack(rows)


TREND_DIMENSION = 16
TREND_SEPARATION = 3.0
TREND_QUESTION_ID = "trend-q"
_TREND_POOL_SIZE = 60
_TREND_EARNEST_UNIQUES = 80
_TREND_EVAL_EARNEST = 200
_TREND_EVAL_NON_EARNEST = 20
_TREND_NOISE_RATE = 0.05


@dataclass(frozen=True)
class TrendCorpus:
    provider: LookupProvider
    pool_entries: tuple[tuple[str, str], ...]  # (question_id, text)
    question_uniques: tuple[tuple[str, int], ...]  # (text, count), frequency order
    eval_items: tuple[tuple[str, str], ...]  # (text, true class)

    def eval_vectors(self) -> list[LabeledVector]:
        return [
            LabeledVector(text_hash(t), t, self.provider.table[t], cls)
            for t, cls in self.eval_items
        ]


def _trend_draw(rng, cls: str, noise: bool) -> np.ndarray:
    """Sample from the class cluster, or the opposite one for noisy items."""
    half = TREND_SEPARATION / 2.0
    center = np.zeros(TREND_DIMENSION)
    sign = 1.0 if cls == NON_EARNEST else -1.0
    if noise:
        sign = -sign
    center[0] = sign * half
    return center + rng.standard_normal(TREND_DIMENSION)


def trend_corpus(seed: int) -> TrendCorpus:
    """Two Gaussian clusters with a 10:1 earnest majority and 5% label noise.

    Items labeled with one class have a 5% chance of being drawn from the
    other cluster, so no training mix can reach perfect recall honestly.
    """
    rng = derive_rng(seed, _STREAM_TREND)
    table: dict[str, np.ndarray] = {}
    pool = []
    for i in range(_TREND_POOL_SIZE):
        text = f"ng {i:03d}"
        table[text] = _trend_draw(rng, NON_EARNEST, rng.random() < _TREND_NOISE_RATE)
        pool.append((TREND_QUESTION_ID, text))
    uniques = []
    for i in range(_TREND_EARNEST_UNIQUES):
        text = f"er {i:03d}"
        table[text] = _trend_draw(rng, EARNEST, rng.random() < _TREND_NOISE_RATE)
        # counts strictly descending over the first 24 so seed picks are exact
        uniques.append((text, 28 - i if i < 24 else 2))
    evals = []
    for i in range(_TREND_EVAL_EARNEST + _TREND_EVAL_NON_EARNEST):
        cls = NON_EARNEST if i < _TREND_EVAL_NON_EARNEST else EARNEST
        text = f"ev {i:03d}"
        table[text] = _trend_draw(rng, cls, rng.random() < _TREND_NOISE_RATE)
        evals.append((text, cls))
    return TrendCorpus(
        provider=LookupProvider(table, f"trend-s{seed}"),
        pool_entries=tuple(pool),
        question_uniques=tuple(uniques),
        eval_items=tuple(evals),
    )


def trend_store(data_dir: str | Path, corpus: TrendCorpus) -> Store:
    """Materialize the trend question and its response counts in a store."""
    import csv
    import tempfile

    store = Store.initialize(data_dir)
    store.add_questions(
        [Question(TREND_QUESTION_ID, "synthetic trend probe", "conceptual", 1, "word_cloud")]
    )
    mapping = ColumnMapping(
        columns={
            "question_id": "q",
            "student_id": "s",
            "raw_text": "t",
            "mode": "m",
            "submitted_at": "at",
        },
        timestamp_format="%Y-%m-%dT%H:%M:%S",
        mode_values={"live": "synchronous"},
    )
    with tempfile.NamedTemporaryFile(
        "w", suffix=".csv", newline="", encoding="utf-8", delete=False
    ) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "s", "t", "m", "at"])
        row = 0
        for text, count in corpus.question_uniques:
            for j in range(count):
                row += 1
                w.writerow(
                    [
                        TREND_QUESTION_ID,
                        f"t{row:04d}",
                        text,
                        "live",
                        f"2026-03-01T10:{row // 60 % 60:02d}:{row % 60:02d}",
                    ]
                )
        tmp_name = fh.name
    report = store.ingest(tmp_name, mapping)
    Path(tmp_name).unlink()
    if report.rejected:
        raise RuntimeError(f"trend fixture rows rejected: {report.rejected[:3]}")
    return store
