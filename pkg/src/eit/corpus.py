"""Canonical data model, text normalization, ingestion, and the on-disk store.

One sqlite file per course corpus. All stored objects are immutable value
objects; ingestion and label writes are serialized by the caller (the CLI
and service take a directory-level write lock).
"""

from __future__ import annotations

import csv
import json
import re
import sqlite3
import threading
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .util import DataError, parse_utc, text_hash

CATEGORIES = ("reflection", "conceptual", "coding", "numerical")
POLL_KINDS = ("word_cloud", "multiple_choice")
MODES = ("synchronous", "asynchronous")

REQUIRED_FIELDS = ("question_id", "student_id", "raw_text", "mode", "submitted_at")

_WS_RE = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Canonical form of a response text.

    Case-folds, drops non-whitespace control characters, collapses
    whitespace runs to single spaces, and strips the ends. Idempotent,
    total, and the grouping key for everything downstream: unique
    responses, labels, and classification all key on this string.
    """
    folded = raw.casefold()
    cleaned = "".join(
        ch for ch in folded if ch.isspace() or unicodedata.category(ch) != "Cc"
    )
    return _WS_RE.sub(" ", cleaned).strip()


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    category: str
    lecture_number: int
    poll_kind: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise DataError(f"unknown category {self.category!r}")
        if self.poll_kind not in POLL_KINDS:
            raise DataError(f"unknown poll kind {self.poll_kind!r}")
        if self.lecture_number < 1:
            raise DataError("lecture_number must be a positive integer")


@dataclass(frozen=True)
class Response:
    response_id: str
    question_id: str
    student_id: str
    raw_text: str
    normalized_text: str
    mode: str
    submitted_at: datetime


@dataclass(frozen=True)
class UniqueResponse:
    normalized_text: str
    count: int
    member_response_ids: frozenset[str]


@dataclass(frozen=True)
class IngestReport:
    accepted: int
    rejected: list[tuple[int, str]] = field(default_factory=list)


@dataclass(frozen=True)
class ColumnMapping:
    """Maps canonical response fields to the columns of a vendor export."""

    columns: dict[str, str]
    timestamp_format: str
    mode_values: dict[str, str]
    delimiter: str = ","

    def __post_init__(self):
        missing = [f for f in REQUIRED_FIELDS if f not in self.columns]
        if missing:
            raise DataError(f"mapping lacks required fields: {', '.join(missing)}")
        bad = [v for v in self.mode_values.values() if v not in MODES]
        if bad:
            raise DataError(f"mode_values must map onto {MODES}, got {bad}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ColumnMapping":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"mapping file not found: {path}")
        except json.JSONDecodeError as e:
            raise DataError(f"mapping file {path} is not valid JSON: {e}")
        try:
            return cls(
                columns=dict(raw["columns"]),
                timestamp_format=raw["timestamp_format"],
                mode_values=dict(raw["mode_values"]),
                delimiter=raw.get("delimiter", ","),
            )
        except KeyError as e:
            raise DataError(f"mapping file {path} lacks key {e}")


_SCHEMA = """
CREATE TABLE IF NOT EXISTS questions (
    question_id TEXT PRIMARY KEY,
    text TEXT NOT NULL,
    category TEXT NOT NULL,
    lecture_number INTEGER NOT NULL,
    poll_kind TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS responses (
    response_id TEXT PRIMARY KEY,
    question_id TEXT NOT NULL REFERENCES questions(question_id),
    student_id TEXT NOT NULL,
    raw_text TEXT NOT NULL,
    normalized_text TEXT NOT NULL,
    mode TEXT NOT NULL,
    submitted_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_responses_question ON responses(question_id);
CREATE INDEX IF NOT EXISTS idx_responses_student ON responses(student_id);
CREATE TABLE IF NOT EXISTS labels (
    annotator_id TEXT NOT NULL,
    question_id TEXT NOT NULL,
    normalized_text TEXT NOT NULL,
    score INTEGER NOT NULL,
    labeled_at TEXT NOT NULL,
    PRIMARY KEY (annotator_id, question_id, normalized_text)
);
CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    question_id TEXT NOT NULL,
    config_json TEXT NOT NULL,
    fingerprint TEXT NOT NULL,
    created_at TEXT NOT NULL,
    seq INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS run_classes (
    run_id TEXT NOT NULL,
    normalized_text TEXT NOT NULL,
    class TEXT NOT NULL,
    margin REAL NOT NULL,
    neighbors_json TEXT NOT NULL,
    PRIMARY KEY (run_id, normalized_text)
);
"""


class Store:
    """File-backed corpus store: questions, responses, labels, runs.

    A single sqlite file under ``data_dir``. Thread-safe for the
    single-writer / multi-reader pattern: every sqlite access goes through
    one connection guarded by an RLock.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.db_path = self.data_dir / "store.db"
        if not self.db_path.exists():
            raise DataError(
                f"no store at {self.db_path}; run `eit init` or check --data-dir/EIT_DATA_DIR"
            )
        self._conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self._lock = threading.RLock()

    @classmethod
    def initialize(cls, data_dir: str | Path) -> "Store":
        data_dir = Path(data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        conn = sqlite3.connect(data_dir / "store.db")
        with conn:
            conn.executescript(_SCHEMA)
        conn.close()
        return cls(data_dir)

    def close(self):
        with self._lock:
            self._conn.close()

    @property
    def cache_dir(self) -> Path:
        return self.data_dir / "cache" / "embeddings"

    @property
    def lock_path(self) -> Path:
        return self.data_dir / ".write.lock"

    # -- questions ---------------------------------------------------------

    def add_questions(self, questions: list[Question]) -> int:
        with self._lock, self._conn as conn:
            for q in questions:
                conn.execute(
                    "INSERT OR REPLACE INTO questions VALUES (?,?,?,?,?)",
                    (q.question_id, q.text, q.category, q.lecture_number, q.poll_kind),
                )
        return len(questions)

    def ingest_questions(self, path: str | Path) -> int:
        """Register questions from a CSV with the canonical five-column header."""
        try:
            fh = open(path, newline="", encoding="utf-8")
        except FileNotFoundError:
            raise DataError(f"questions file not found: {path}")
        with fh:
            reader = csv.DictReader(fh)
            needed = {"question_id", "text", "category", "lecture_number", "poll_kind"}
            if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
                raise DataError(
                    f"questions file must have columns {sorted(needed)}"
                )
            questions = []
            for row in reader:
                try:
                    lecture = int(row["lecture_number"])
                except ValueError:
                    raise DataError(
                        f"bad lecture_number {row['lecture_number']!r} for {row['question_id']}"
                    )
                questions.append(
                    Question(
                        question_id=row["question_id"],
                        text=row["text"],
                        category=row["category"],
                        lecture_number=lecture,
                        poll_kind=row["poll_kind"],
                    )
                )
        return self.add_questions(questions)

    def get_question(self, question_id: str) -> Question:
        with self._lock:
            row = self._conn.execute(
                "SELECT question_id, text, category, lecture_number, poll_kind "
                "FROM questions WHERE question_id = ?",
                (question_id,),
            ).fetchone()
        if row is None:
            raise DataError(f"unknown question {question_id!r}")
        return Question(*row)

    def list_questions(self) -> list[Question]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT question_id, text, category, lecture_number, poll_kind "
                "FROM questions ORDER BY lecture_number, question_id"
            ).fetchall()
        return [Question(*r) for r in rows]

    # -- responses ---------------------------------------------------------

    def ingest(self, path: str | Path, mapping: ColumnMapping) -> IngestReport:
        """Load a delimited export into the corpus.

        Bad rows (unparseable timestamp, unknown mode, unknown question,
        duplicates) are reported with their line number and skipped;
        structural problems (missing file, unmapped column) abort.
        """
        try:
            fh = open(path, newline="", encoding="utf-8")
        except FileNotFoundError:
            raise DataError(f"input file not found: {path}")
        known_questions = {q.question_id for q in self.list_questions()}
        with self._lock:
            seen = {
                (r[0], r[1], r[2], r[3])
                for r in self._conn.execute(
                    "SELECT student_id, question_id, raw_text, submitted_at FROM responses"
                )
            }
        accepted: list[Response] = []
        rejected: list[tuple[int, str]] = []
        with fh:
            reader = csv.DictReader(fh, delimiter=mapping.delimiter)
            if reader.fieldnames is None:
                raise DataError(f"{path} has no header row")
            missing = [
                col for col in mapping.columns.values() if col not in reader.fieldnames
            ]
            if missing:
                raise DataError(
                    f"mapped columns absent from {path}: {', '.join(missing)}"
                )
            for row in reader:
                line = reader.line_num
                get = lambda f: (row[mapping.columns[f]] or "").strip()
                raw_text = row[mapping.columns["raw_text"]] or ""
                mode_src = get("mode")
                if mode_src not in mapping.mode_values:
                    rejected.append((line, f"unknown mode {mode_src!r}"))
                    continue
                try:
                    ts = datetime.strptime(get("submitted_at"), mapping.timestamp_format)
                except ValueError:
                    rejected.append((line, "unparseable timestamp"))
                    continue
                if ts.tzinfo is None:
                    ts = ts.replace(tzinfo=timezone.utc)
                ts = ts.astimezone(timezone.utc)
                question_id = get("question_id")
                if question_id not in known_questions:
                    rejected.append((line, f"unknown question {question_id!r}"))
                    continue
                student_id = get("student_id")
                key = (student_id, question_id, raw_text, ts.isoformat())
                if key in seen:
                    rejected.append((line, "duplicate"))
                    continue
                seen.add(key)
                if "response_id" in mapping.columns:
                    response_id = get("response_id")
                else:
                    response_id = "r-" + text_hash("\x1f".join(key))[:20]
                accepted.append(
                    Response(
                        response_id=response_id,
                        question_id=question_id,
                        student_id=student_id,
                        raw_text=raw_text,
                        normalized_text=normalize_text(raw_text),
                        mode=mapping.mode_values[mode_src],
                        submitted_at=ts,
                    )
                )
        with self._lock, self._conn as conn:
            conn.executemany(
                "INSERT INTO responses VALUES (?,?,?,?,?,?,?)",
                [
                    (
                        r.response_id,
                        r.question_id,
                        r.student_id,
                        r.raw_text,
                        r.normalized_text,
                        r.mode,
                        r.submitted_at.isoformat(),
                    )
                    for r in accepted
                ],
            )
        return IngestReport(accepted=len(accepted), rejected=rejected)

    def _response_rows(self, where: str, args: tuple) -> list[Response]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT response_id, question_id, student_id, raw_text, "
                f"normalized_text, mode, submitted_at FROM responses {where} "
                "ORDER BY response_id",
                args,
            ).fetchall()
        return [
            Response(r[0], r[1], r[2], r[3], r[4], r[5], parse_utc(r[6])) for r in rows
        ]

    def responses_for_question(self, question_id: str) -> list[Response]:
        self.get_question(question_id)
        return self._response_rows("WHERE question_id = ?", (question_id,))

    def responses_for_student(self, student_id: str) -> list[Response]:
        return self._response_rows("WHERE student_id = ?", (student_id,))

    def all_responses(self) -> list[Response]:
        return self._response_rows("", ())

    def student_ids(self) -> list[str]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT DISTINCT student_id FROM responses ORDER BY student_id"
            ).fetchall()
        return [r[0] for r in rows]

    def unique_responses(self, question_id: str) -> list[UniqueResponse]:
        """Distinct normalized texts for one question, most frequent first."""
        groups: dict[str, set[str]] = {}
        for r in self.responses_for_question(question_id):
            groups.setdefault(r.normalized_text, set()).add(r.response_id)
        uniques = [
            UniqueResponse(text, len(ids), frozenset(ids))
            for text, ids in groups.items()
        ]
        uniques.sort(key=lambda u: (-u.count, u.normalized_text))
        return uniques

    # -- labels (persistence only; semantics live in annotation.py) --------

    def upsert_label(
        self,
        annotator_id: str,
        question_id: str,
        normalized_text: str,
        score: int,
        labeled_at: str,
    ):
        with self._lock, self._conn as conn:
            conn.execute(
                "INSERT INTO labels VALUES (?,?,?,?,?) "
                "ON CONFLICT(annotator_id, question_id, normalized_text) "
                "DO UPDATE SET score = excluded.score, labeled_at = excluded.labeled_at",
                (annotator_id, question_id, normalized_text, score, labeled_at),
            )

    def label_rows(self, question_id: str | None = None) -> list[tuple]:
        q = (
            "SELECT annotator_id, question_id, normalized_text, score, labeled_at "
            "FROM labels"
        )
        args: tuple = ()
        if question_id is not None:
            q += " WHERE question_id = ?"
            args = (question_id,)
        q += " ORDER BY question_id, normalized_text, annotator_id"
        with self._lock:
            return self._conn.execute(q, args).fetchall()

    # -- classification runs ------------------------------------------------

    def save_run(
        self,
        run_id: str,
        question_id: str,
        config_json: str,
        fingerprint: str,
        created_at: str,
        rows: list[tuple[str, str, float, str]],
    ):
        """Persist a classification run; ``rows`` are (text, class, margin, neighbors_json)."""
        with self._lock, self._conn as conn:
            seq = conn.execute("SELECT COALESCE(MAX(seq), 0) + 1 FROM runs").fetchone()[0]
            conn.execute(
                "INSERT INTO runs VALUES (?,?,?,?,?,?) ON CONFLICT(run_id) DO UPDATE "
                "SET created_at = excluded.created_at, seq = excluded.seq",
                (run_id, question_id, config_json, fingerprint, created_at, seq),
            )
            conn.execute("DELETE FROM run_classes WHERE run_id = ?", (run_id,))
            conn.executemany(
                "INSERT INTO run_classes VALUES (?,?,?,?,?)",
                [(run_id, text, cls, margin, nj) for text, cls, margin, nj in sorted(rows)],
            )

    def list_runs(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT run_id, question_id, config_json, fingerprint, created_at "
                "FROM runs ORDER BY seq"
            ).fetchall()
        return [
            {
                "run_id": r[0],
                "question_id": r[1],
                "config": json.loads(r[2]),
                "fingerprint": r[3],
                "created_at": r[4],
            }
            for r in rows
        ]

    def run_classes(self, run_id: str) -> dict[str, dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT normalized_text, class, margin, neighbors_json "
                "FROM run_classes WHERE run_id = ?",
                (run_id,),
            ).fetchall()
        if not rows:
            raise DataError(f"unknown run {run_id!r}")
        return {
            text: {"class": cls, "margin": margin, "neighbors": json.loads(nj)}
            for text, cls, margin, nj in rows
        }

    def latest_runs(self) -> dict[str, str]:
        """Latest run id per question (re-classification supersedes)."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT question_id, run_id FROM runs ORDER BY seq"
            ).fetchall()
        latest: dict[str, str] = {}
        for qid, run_id in rows:
            latest[qid] = run_id
        return latest
