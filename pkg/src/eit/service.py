"""Local HTTP JSON API over the store for the triage UI and scripts.

Single-process FastAPI app. Long work (classification, ablation,
projection) runs on a small thread pool as pollable jobs; at most one
active job per question. Mutating endpoints require the bearer token from
``EIT_API_TOKEN``; if the variable is unset, mutation is disabled outright.
"""

from __future__ import annotations

import os
import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import annotation, classifier, engagement, features, projection
from .corpus import Store
from .embedding import EmbeddingCache, HashedTrigramProvider, SentenceModelProvider
from .util import DataError

PAGE_SIZE = 50

JOB_KINDS = ("classify", "ablate", "project")
_TERMINAL = ("done", "failed")


@dataclass
class JobRecord:
    job_id: str
    kind: str
    question_id: str
    status: str = "queued"
    result: dict | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        out = {
            "job_id": self.job_id,
            "kind": self.kind,
            "question_id": self.question_id,
            "status": self.status,
        }
        if self.result is not None:
            out["result"] = self.result
        if self.error is not None:
            out["error"] = self.error
        return out


class JobManager:
    """Thread-pool job runner with one-active-job-per-question admission."""

    def __init__(self, workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._lock = threading.Lock()
        self._jobs: dict[str, JobRecord] = {}

    def submit(self, kind: str, question_id: str, fn) -> JobRecord:
        with self._lock:
            for job in self._jobs.values():
                if job.question_id == question_id and job.status not in _TERMINAL:
                    raise HTTPException(
                        status_code=409,
                        detail=f"job {job.job_id} already active for question {question_id}",
                    )
            record = JobRecord(job_id=uuid.uuid4().hex[:12], kind=kind, question_id=question_id)
            self._jobs[record.job_id] = record

        def run():
            with self._lock:
                record.status = "running"
            try:
                result = fn()
            except Exception as e:  # job errors surface via status, not logs
                with self._lock:
                    record.status = "failed"
                    record.error = f"{type(e).__name__}: {e}"
                    if not isinstance(e, DataError):
                        record.error += "\n" + traceback.format_exc(limit=3)
            else:
                with self._lock:
                    record.status = "done"
                    record.result = result

        self._pool.submit(run)
        return record

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return job

    def shutdown(self):
        self._pool.shutdown(wait=False, cancel_futures=True)


class LabelBody(BaseModel):
    annotator: str = Field(min_length=1)
    question: str = Field(min_length=1)
    text: str
    score: int = Field(ge=annotation.SCORE_MIN, le=annotation.SCORE_MAX)


class ClassifyBody(BaseModel):
    question: str
    seed: int = 0
    pool_fraction: float = 0.5
    earnest_seeds: int = 20
    k: int = 5
    space: str = "embedding"
    distance: str = "euclidean"


class AblateBody(BaseModel):
    question: str
    seed: int = 0
    fractions: list[float] = [0.10, 0.25, 0.50]
    seed_counts: list[int] = [5, 10, 20]
    k: int = 5


class ProjectBody(BaseModel):
    question: str
    seed: int = 42
    perplexity: float = 30.0
    iterations: int = 1000


def _provider(data_dir: Path):
    model_path = os.environ.get("EIT_MODEL_PATH")
    if model_path:
        return SentenceModelProvider(model_path)
    return HashedTrigramProvider()


def create_app(data_dir: str | Path, static_dir: str | Path | None = None) -> FastAPI:
    data_dir = Path(data_dir)
    store = Store(data_dir)
    provider = _provider(data_dir)
    cache = EmbeddingCache(store.cache_dir)
    jobs = JobManager()
    app = FastAPI(title="earnestness toolkit api", version="0.1.0")
    app.state.jobs = jobs
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def require_token(request: Request):
        expected = os.environ.get("EIT_API_TOKEN")
        if not expected:
            raise HTTPException(
                status_code=401, detail="mutation disabled: EIT_API_TOKEN is not set"
            )
        header = request.headers.get("authorization", "")
        if header != f"Bearer {expected}":
            raise HTTPException(status_code=401, detail="missing or invalid token")

    @app.exception_handler(DataError)
    async def data_error_handler(request: Request, exc: DataError):
        from fastapi.responses import JSONResponse

        known = ("unknown question", "unknown run", "no labels for")
        status = 404 if any(k in str(exc) for k in known) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        from fastapi.encoders import jsonable_encoder
        from fastapi.responses import JSONResponse

        # field-level messages, but as a plain 400 rather than 422
        return JSONResponse(
            status_code=400, content={"detail": jsonable_encoder(exc.errors())}
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/questions")
    def questions():
        out = []
        for q in store.list_questions():
            uniques = store.unique_responses(q.question_id)
            out.append(
                {
                    "question_id": q.question_id,
                    "text": q.text,
                    "category": q.category,
                    "lecture_number": q.lecture_number,
                    "poll_kind": q.poll_kind,
                    "responses": sum(u.count for u in uniques),
                    "unique_responses": len(uniques),
                }
            )
        return out

    @app.get("/questions/{question_id}/responses")
    def question_responses(question_id: str, page: int = Query(default=0, ge=0)):
        uniques = store.unique_responses(question_id)
        lo = page * PAGE_SIZE
        items = [
            {"normalized_text": u.normalized_text, "count": u.count}
            for u in uniques[lo : lo + PAGE_SIZE]
        ]
        return {
            "question_id": question_id,
            "page": page,
            "page_size": PAGE_SIZE,
            "total": len(uniques),
            "items": items,
        }

    @app.get("/questions/{question_id}/sample")
    def question_sample(
        question_id: str,
        n: int = Query(default=200, ge=1),
        seed: int = Query(default=0),
    ):
        config = features.SamplerConfig(seed=seed, target_n=n)
        rows = features.sample_rows(store, question_id, config, provider, cache)
        return {
            "question_id": question_id,
            "seed": seed,
            "items": [
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
            ],
        }

    @app.get("/labels")
    def labels(question: str | None = None):
        rows = annotation.labels_for(store, question)
        return [
            {
                "annotator_id": lab.annotator_id,
                "question_id": lab.question_id,
                "normalized_text": lab.normalized_text,
                "score": lab.score,
                "labeled_at": lab.labeled_at.isoformat(),
            }
            for lab in rows
        ]

    @app.post("/labels", dependencies=[Depends(require_token)])
    def post_label(body: LabelBody):
        label = annotation.record_label(
            store, body.annotator, body.question, body.text, body.score
        )
        return {
            "annotator_id": label.annotator_id,
            "question_id": label.question_id,
            "normalized_text": label.normalized_text,
            "score": label.score,
            "labeled_at": label.labeled_at.isoformat(),
        }

    @app.get("/labels/agreement")
    def labels_agreement(question: str | None = None):
        return annotation.agreement(store, question)

    @app.post("/jobs/classify", dependencies=[Depends(require_token)])
    def job_classify(body: ClassifyBody):
        store.get_question(body.question)
        config = classifier.TrainingSetConfig(
            target_question_id=body.question,
            seed=body.seed,
            non_earnest_fraction=body.pool_fraction,
            earnest_seed_count=body.earnest_seeds,
            space="projected_2d" if body.space in ("2d", "projected_2d") else "embedding",
            k=body.k,
            distance=body.distance,
        )

        def work():
            pool = classifier.NonEarnestPool.from_store(store)
            return classifier.classify_question(store, config, pool, provider, cache)

        return jobs.submit("classify", body.question, work).as_dict()

    @app.post("/jobs/ablate", dependencies=[Depends(require_token)])
    def job_ablate(body: AblateBody):
        store.get_question(body.question)
        base = classifier.TrainingSetConfig(
            target_question_id=body.question, seed=body.seed, k=body.k
        )

        def work():
            pool = classifier.NonEarnestPool.from_store(store)
            eval_set = classifier.eval_set_from_labels(store, provider, cache)
            rows = classifier.ablation_grid(
                store, body.fractions, body.seed_counts, eval_set, pool, base,
                provider, cache,
            )
            return {
                "question_id": body.question,
                "seed": body.seed,
                "cells": [
                    {
                        "non_earnest_fraction": r["non_earnest_fraction"],
                        "earnest_seed_count": r["earnest_seed_count"],
                        **r["metrics"].as_dict(),
                    }
                    for r in rows
                ],
            }

        return jobs.submit("ablate", body.question, work).as_dict()

    @app.post("/jobs/project", dependencies=[Depends(require_token)])
    def job_project(body: ProjectBody):
        store.get_question(body.question)
        config = projection.TsneConfig(
            perplexity=body.perplexity, iterations=body.iterations, seed=body.seed
        )

        def work():
            points = projection.project_question(store, body.question, config, provider, cache)
            return {
                "question_id": body.question,
                "seed": body.seed,
                "points": [
                    {
                        "normalized_text": p.normalized_text,
                        "x": p.x,
                        "y": p.y,
                        "class_hint": p.class_hint,
                    }
                    for p in points
                ],
            }

        return jobs.submit("project", body.question, work).as_dict()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return jobs.get(job_id).as_dict()

    @app.get("/runs")
    def runs():
        return store.list_runs()

    @app.get("/runs/{run_id}/classes")
    def run_classes(run_id: str):
        classes = store.run_classes(run_id)
        if not classes:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return {"run_id": run_id, "classes": classes}

    @app.get("/atrisk")
    def atrisk(
        threshold: float = Query(default=0.5, ge=0.0, le=1.0),
        window: int = Query(default=3, ge=1),
        min_responses: int = Query(default=3, ge=0),
    ):
        config = engagement.AtRiskConfig(
            non_earnest_threshold=threshold,
            window_lectures=window,
            min_responses=min_responses,
        )
        return engagement.flag_at_risk(store, config)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def serve(data_dir: str | Path, port: int = 8787, static_dir: str | Path | None = None):
    """Run the API with uvicorn; blocks until interrupted."""
    import uvicorn

    app = create_app(data_dir, static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
