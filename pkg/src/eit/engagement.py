"""Course-policy layer: attendance credit, earnestness timelines, at-risk flags.

Attendance follows the course rules: answering any question live during a
lecture earns full credit; otherwise every question of that lecture must be
answered asynchronously. The semester score forgives up to three missed
lectures. The at-risk rule (trailing-window non-earnest fraction with a
minimum support) is a configurable policy of this toolkit, not a finding.
"""

from __future__ import annotations

from dataclasses import dataclass

from .annotation import NON_EARNEST
from .corpus import Store
from .util import DataError

FULL = "full"
NONE = "none"


@dataclass(frozen=True)
class LectureParticipation:
    student_id: str
    lecture_number: int
    answered_sync: int
    answered_async: int
    questions_in_lecture: int

    def __post_init__(self):
        if min(self.answered_sync, self.answered_async, self.questions_in_lecture) < 0:
            raise DataError("participation counts must be non-negative")
        if max(self.answered_sync, self.answered_async) > self.questions_in_lecture:
            raise DataError("answered counts cannot exceed questions_in_lecture")


@dataclass(frozen=True)
class AtRiskConfig:
    non_earnest_threshold: float = 0.5
    window_lectures: int = 3
    min_responses: int = 3

    def __post_init__(self):
        if not 0.0 <= self.non_earnest_threshold <= 1.0:
            raise DataError("non_earnest_threshold must be in [0, 1]")
        if self.window_lectures < 1:
            raise DataError("window_lectures must be at least 1")
        if self.min_responses < 0:
            raise DataError("min_responses must be non-negative")


def lecture_roster(store: Store) -> dict[int, int]:
    """Question count per lecture number, from the registered questions."""
    roster: dict[int, int] = {}
    for q in store.list_questions():
        roster[q.lecture_number] = roster.get(q.lecture_number, 0) + 1
    return roster


def participation(store: Store, student_id: str) -> list[LectureParticipation]:
    """Per-lecture participation derived from the student's responses.

    A question counts as answered in a mode if the student submitted at
    least one response to it in that mode; resubmissions do not inflate
    the counts. Covers every lecture in the roster, including zeros.
    """
    roster = lecture_roster(store)
    if not roster:
        raise DataError("no questions registered; lecture roster is empty")
    lecture_of = {q.question_id: q.lecture_number for q in store.list_questions()}
    answered: dict[int, dict[str, set[str]]] = {}
    for resp in store.responses_for_student(student_id):
        lec = lecture_of[resp.question_id]
        answered.setdefault(lec, {"synchronous": set(), "asynchronous": set()})[
            resp.mode
        ].add(resp.question_id)
    out = []
    for lec in sorted(roster):
        modes = answered.get(lec, {"synchronous": set(), "asynchronous": set()})
        out.append(
            LectureParticipation(
                student_id=student_id,
                lecture_number=lec,
                answered_sync=len(modes["synchronous"]),
                answered_async=len(modes["asynchronous"]),
                questions_in_lecture=roster[lec],
            )
        )
    return out


def attendance_credit(p: LectureParticipation) -> str:
    """Full credit for one live answer, or for answering everything async."""
    if p.answered_sync >= 1:
        return FULL
    if p.answered_async == p.questions_in_lecture:
        return FULL
    return NONE


def semester_attendance(store: Store, student_id: str) -> dict:
    """Credited lecture count and the forgiveness-adjusted score.

    Up to three missed lectures are forgiven: the score divides by
    (total - 3) and caps at 1. The course weighted this at 5% of the final
    grade; that weighting is reported as metadata only.
    """
    parts = participation(store, student_id)
    credited = sum(1 for p in parts if attendance_credit(p) == FULL)
    total = len(parts)
    denominator = total - 3
    score = 1.0 if denominator <= 0 else min(1.0, credited / denominator)
    return {
        "student_id": student_id,
        "credited_lectures": credited,
        "total_lectures": total,
        "score": score,
        "grade_weight": 0.05,
    }


def earnestness_timeline(store: Store, student_id: str) -> dict[int, dict]:
    """Per-lecture classified-response counts and non-earnest fraction.

    Uses the latest classification run per question; responses to questions
    without a run are not counted. Lectures with zero classified responses
    carry no "fraction" key.
    """
    latest = store.latest_runs()
    if not latest:
        raise DataError("no classification runs available")
    classes_by_question = {
        qid: store.run_classes(run_id) for qid, run_id in latest.items()
    }
    roster = lecture_roster(store)
    lecture_of = {q.question_id: q.lecture_number for q in store.list_questions()}
    timeline: dict[int, dict] = {
        lec: {"responses": 0, "non_earnest": 0} for lec in sorted(roster)
    }
    for resp in store.responses_for_student(student_id):
        classes = classes_by_question.get(resp.question_id)
        if classes is None or resp.normalized_text not in classes:
            continue
        entry = timeline[lecture_of[resp.question_id]]
        entry["responses"] += 1
        if classes[resp.normalized_text]["class"] == NON_EARNEST:
            entry["non_earnest"] += 1
    for entry in timeline.values():
        if entry["responses"] > 0:
            entry["fraction"] = entry["non_earnest"] / entry["responses"]
    return timeline


def flag_at_risk(store: Store, config: AtRiskConfig) -> list[dict]:
    """Students whose trailing-window non-earnest fraction meets the threshold.

    The window is the last window_lectures lecture numbers of the roster.
    Students with fewer than min_responses classified responses in the
    window are never flagged. Sorted by fraction descending, then id.
    """
    roster = sorted(lecture_roster(store))
    window = set(roster[-config.window_lectures:])
    flagged = []
    for student_id in store.student_ids():
        timeline = earnestness_timeline(store, student_id)
        responses = sum(timeline[lec]["responses"] for lec in window)
        non_earnest = sum(timeline[lec]["non_earnest"] for lec in window)
        if responses < config.min_responses or responses == 0:
            continue
        fraction = non_earnest / responses
        if fraction >= config.non_earnest_threshold:
            flagged.append(
                {
                    "student_id": student_id,
                    "window_fraction": fraction,
                    "evidence": {
                        "window_lectures": sorted(window),
                        "responses": responses,
                        "non_earnest": non_earnest,
                    },
                }
            )
    flagged.sort(key=lambda row: (-row["window_fraction"], row["student_id"]))
    return flagged
