"""Semi-supervised KNN earnestness classification.

Training negatives come from a cross-question pool of non-earnest texts
(gibberish transfers between questions); positives are the target
question's most frequent unique responses, assumed earnest without manual
labels. Evaluation treats non_earnest as the positive class and favors
recall: even-k vote ties resolve to non_earnest.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .annotation import EARNEST, NEUTRAL, NON_EARNEST, aggregated_labels
from .corpus import Store, normalize_text
from .embedding import EmbeddingCache, EmbeddingProvider, embed_batch
from .projection import TsneConfig, tsne
from .util import DataError, derive_rng, stable_json, text_hash, utc_now

# Stream names for derive_rng(seed, ...) within this module.
_STREAM_POOL_DRAW = 10
_STREAM_FOLDS = 11


@dataclass(frozen=True)
class TrainingSetConfig:
    target_question_id: str
    seed: int
    non_earnest_fraction: float = 0.50
    earnest_seed_count: int = 20
    space: str = "embedding"  # or "projected_2d"
    k: int = 5
    distance: str = "euclidean"  # or "cosine"

    def __post_init__(self):
        if not 0.0 < self.non_earnest_fraction <= 1.0:
            raise DataError("non_earnest_fraction must be in (0, 1]")
        if self.earnest_seed_count < 1:
            raise DataError("earnest_seed_count must be at least 1")
        if self.k < 1:
            raise DataError("k must be at least 1")
        if self.space not in ("embedding", "projected_2d"):
            raise DataError(f"unknown space {self.space!r}")
        if self.distance not in ("euclidean", "cosine"):
            raise DataError(f"unknown distance {self.distance!r}")


@dataclass(frozen=True)
class LabeledVector:
    key: str  # text hash; used for train/eval disjointness
    text: str
    vector: np.ndarray
    label: str


@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else 0.0

    @property
    def recall(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else 0.0

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "confusion": {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn},
            "n": self.n,
        }


@dataclass(frozen=True)
class NonEarnestPool:
    """Cross-question set of texts whose aggregated class is non_earnest."""

    entries: tuple[tuple[str, str], ...]  # (source_question_id, normalized_text), sorted

    @classmethod
    def from_entries(cls, entries) -> "NonEarnestPool":
        return cls(entries=tuple(sorted(set(entries))))

    @classmethod
    def from_store(cls, store: Store) -> "NonEarnestPool":
        return cls.from_entries(
            (agg.question_id, agg.normalized_text)
            for agg in aggregated_labels(store)
            if agg.label_class == NON_EARNEST
        )

    def __len__(self) -> int:
        return len(self.entries)


def build_training_set(
    store: Store,
    config: TrainingSetConfig,
    pool: NonEarnestPool,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[LabeledVector]:
    """Negatives: seeded uniform draw of ceil(fraction * |pool|) pool texts.
    Positives: the target question's earnest_seed_count most frequent unique
    responses (ties lexicographic). Negatives precede positives, so vote
    tie-breaking by training index also favors non_earnest.
    """
    if not pool.entries:
        raise DataError("non-earnest pool is empty")
    uniques = store.unique_responses(config.target_question_id)
    if not uniques:
        raise DataError(f"question {config.target_question_id!r} has no responses")
    if config.earnest_seed_count > len(uniques):
        raise DataError(
            f"earnest_seed_count {config.earnest_seed_count} exceeds the "
            f"{len(uniques)} unique responses of {config.target_question_id!r}"
        )
    m = math.ceil(config.non_earnest_fraction * len(pool.entries))
    rng = derive_rng(config.seed, _STREAM_POOL_DRAW)
    picked = sorted(rng.choice(len(pool.entries), size=m, replace=False).tolist())
    negative_texts = [pool.entries[i][1] for i in picked]
    positive_texts = [u.normalized_text for u in uniques[: config.earnest_seed_count]]
    matrix = embed_batch(negative_texts + positive_texts, provider, cache)
    out = []
    for i, text in enumerate(negative_texts):
        out.append(LabeledVector(text_hash(text), text, matrix[i], NON_EARNEST))
    for j, text in enumerate(positive_texts):
        out.append(
            LabeledVector(text_hash(text), text, matrix[len(negative_texts) + j], EARNEST)
        )
    return out


def _distances(train_matrix: np.ndarray, queries: np.ndarray, distance: str) -> np.ndarray:
    """Query-to-train distance matrix; euclidean reported as true distances."""
    if distance == "euclidean":
        return np.sqrt(np.maximum(_kernels.cross_sq_dists(queries, train_matrix), 0.0))
    # cosine: 1 - cos similarity; zero vectors get similarity 0 by convention
    def unit(m):
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)

    return 1.0 - unit(queries) @ unit(train_matrix).T


def _vote(dists_row: np.ndarray, labels: list[str], k: int):
    """Majority vote over the k nearest; distance ties -> smaller index,
    class ties -> non_earnest. Returns (label, margin, neighbor indices)."""
    order = np.argsort(dists_row, kind="stable")[:k]
    votes = Counter(labels[i] for i in order)
    ne, e = votes.get(NON_EARNEST, 0), votes.get(EARNEST, 0)
    label = NON_EARNEST if ne >= e else EARNEST
    margin = abs(ne - e) / k
    return label, margin, order


def knn_predict(
    train: list[LabeledVector], query: np.ndarray, k: int, distance: str = "euclidean"
):
    """Classify one vector; returns (label, neighbors) with the evidence list."""
    if k < 1:
        raise DataError("k must be at least 1")
    if k > len(train):
        raise DataError(f"k={k} exceeds the {len(train)} training points")
    matrix = np.vstack([lv.vector for lv in train])
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (matrix.shape[1],):
        raise DataError(
            f"query dimension {query.shape} does not match training dimension {matrix.shape[1]}"
        )
    dists = _distances(matrix, query[None, :], distance)[0]
    labels = [lv.label for lv in train]
    label, margin, order = _vote(dists, labels, k)
    neighbors = [
        {"text": train[i].text, "label": train[i].label, "distance": float(dists[i])}
        for i in order
    ]
    return label, neighbors


def knn_predict_batch(
    train: list[LabeledVector], queries: np.ndarray, k: int, distance: str = "euclidean"
):
    """Vectorized prediction; returns (labels, margins, neighbor index rows)."""
    if k > len(train):
        raise DataError(f"k={k} exceeds the {len(train)} training points")
    matrix = np.vstack([lv.vector for lv in train])
    queries = np.asarray(queries, dtype=np.float64)
    if queries.shape[1] != matrix.shape[1]:
        raise DataError("query dimension does not match training dimension")
    dists = _distances(matrix, queries, distance)
    labels = [lv.label for lv in train]
    out_labels, out_margins, out_neighbors = [], [], []
    for row in dists:
        label, margin, order = _vote(row, labels, k)
        out_labels.append(label)
        out_margins.append(margin)
        out_neighbors.append(order)
    return out_labels, out_margins, out_neighbors


def confusion(true_labels: list[str], predicted: list[str]) -> EvalMetrics:
    """2x2 confusion with non_earnest as the positive class."""
    tp = fn = fp = tn = 0
    for t, p in zip(true_labels, predicted):
        if t == NON_EARNEST:
            if p == NON_EARNEST:
                tp += 1
            else:
                fn += 1
        else:
            if p == NON_EARNEST:
                fp += 1
            else:
                tn += 1
    return EvalMetrics(tp=tp, fn=fn, fp=fp, tn=tn)


def cross_validate(
    labeled: list[LabeledVector],
    k: int,
    folds: int = 5,
    seed: int = 0,
    distance: str = "euclidean",
) -> tuple[EvalMetrics, list[EvalMetrics]]:
    """Stratified k-fold evaluation.

    Items are shuffled within each class (seeded) and dealt round-robin to
    folds, keeping per-fold class ratios within one member of the global
    ratio. The aggregate is computed from the pooled confusion matrix, so
    the reported metrics are exactly recomputable from it.
    """
    by_class: dict[str, list[int]] = {}
    for i, lv in enumerate(labeled):
        by_class.setdefault(lv.label, []).append(i)
    for cls, members in sorted(by_class.items()):
        if len(members) < folds:
            raise DataError(
                f"class {cls!r} has {len(members)} members; need at least {folds}"
            )
    rng = derive_rng(seed, _STREAM_FOLDS)
    assignment = np.empty(len(labeled), dtype=int)
    for cls in sorted(by_class):
        members = np.array(by_class[cls])
        shuffled = members[rng.permutation(len(members))]
        for pos, idx in enumerate(shuffled):
            assignment[idx] = pos % folds
    per_fold = []
    pooled = [0, 0, 0, 0]  # tp, fn, fp, tn
    for f in range(folds):
        test_idx = [i for i in range(len(labeled)) if assignment[i] == f]
        train = [labeled[i] for i in range(len(labeled)) if assignment[i] != f]
        if k > len(train):
            raise DataError(f"k={k} exceeds fold training size {len(train)}")
        queries = np.vstack([labeled[i].vector for i in test_idx])
        predicted, _, _ = knn_predict_batch(train, queries, k, distance)
        m = confusion([labeled[i].label for i in test_idx], predicted)
        per_fold.append(m)
        pooled[0] += m.tp
        pooled[1] += m.fn
        pooled[2] += m.fp
        pooled[3] += m.tn
    return EvalMetrics(*pooled), per_fold


def ablation_grid(
    store: Store,
    fractions: list[float],
    seed_counts: list[int],
    eval_set: list[LabeledVector],
    pool: NonEarnestPool,
    base_config: TrainingSetConfig,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[dict]:
    """Train/evaluate one cell per (fraction, seed_count), sorted ascending.

    Eval entries whose text hash collides with a cell's training texts are
    excluded from that cell, keeping train and eval disjoint.
    """
    if not fractions or not seed_counts:
        raise DataError("ablation grid is empty")
    if not eval_set:
        raise DataError("evaluation set is empty")
    rows = []
    for fraction in sorted(fractions):
        for seed_count in sorted(seed_counts):
            config = replace(
                base_config,
                non_earnest_fraction=fraction,
                earnest_seed_count=seed_count,
            )
            train = build_training_set(store, config, pool, provider, cache)
            train_keys = {lv.key for lv in train}
            usable = [lv for lv in eval_set if lv.key not in train_keys]
            if not usable:
                raise DataError(
                    f"grid cell ({fraction}, {seed_count}) leaves no evaluation items"
                )
            queries = np.vstack([lv.vector for lv in usable])
            predicted, _, _ = knn_predict_batch(
                train, queries, base_config.k, base_config.distance
            )
            metrics = confusion([lv.label for lv in usable], predicted)
            rows.append(
                {
                    "non_earnest_fraction": fraction,
                    "earnest_seed_count": seed_count,
                    "metrics": metrics,
                }
            )
    return rows


def classify_question(
    store: Store,
    config: TrainingSetConfig,
    pool: NonEarnestPool,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> dict:
    """Classify every unique response of the target question and persist the run.

    Member responses inherit their unique text's class. The run id derives
    from a fingerprint of the config, pool, and corpus snapshot, so a rerun
    with identical inputs writes the identical record.
    """
    uniques = store.unique_responses(config.target_question_id)
    train = build_training_set(store, config, pool, provider, cache)
    if config.k > len(train):
        raise DataError(f"k={config.k} exceeds the {len(train)} training points")
    texts = [u.normalized_text for u in uniques]
    query_matrix = embed_batch(texts, provider, cache)
    if config.space == "projected_2d":
        stacked = np.vstack([np.vstack([lv.vector for lv in train]), query_matrix])
        coords = tsne(stacked, TsneConfig(seed=config.seed)).coords
        train = [
            LabeledVector(lv.key, lv.text, coords[i], lv.label)
            for i, lv in enumerate(train)
        ]
        query_matrix = coords[len(train):]
    labels, margins, neighbor_rows = knn_predict_batch(
        train, query_matrix, config.k, config.distance
    )
    config_dict = {
        "target_question_id": config.target_question_id,
        "seed": config.seed,
        "non_earnest_fraction": config.non_earnest_fraction,
        "earnest_seed_count": config.earnest_seed_count,
        "space": config.space,
        "k": config.k,
        "distance": config.distance,
        "provider_id": provider.provider_id,
    }
    fingerprint = text_hash(
        stable_json(
            {
                "config": config_dict,
                "pool": list(pool.entries),
                "uniques": [[u.normalized_text, u.count] for u in uniques],
                "classes": dict(zip(texts, labels)),
            }
        )
    )
    run_id = "run-" + fingerprint[:16]
    rows = []
    for i, text in enumerate(texts):
        neighbors = [
            {
                "text": train[j].text,
                "label": train[j].label,
                "distance": float(
                    _distances(
                        np.vstack([train[j].vector]), query_matrix[i][None, :],
                        config.distance,
                    )[0, 0]
                ),
            }
            for j in neighbor_rows[i]
        ]
        rows.append((text, labels[i], margins[i], json.dumps(neighbors, sort_keys=True)))
    store.save_run(
        run_id=run_id,
        question_id=config.target_question_id,
        config_json=stable_json(config_dict),
        fingerprint=fingerprint,
        created_at=utc_now().isoformat(),
        rows=rows,
    )
    return {
        "run_id": run_id,
        "question_id": config.target_question_id,
        "fingerprint": fingerprint,
        "config": config_dict,
        "classes": {text: labels[i] for i, text in enumerate(texts)},
        "margins": {text: margins[i] for i, text in enumerate(texts)},
    }


def eval_set_from_labels(
    store: Store,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
    question_id: str | None = None,
) -> list[LabeledVector]:
    """Aggregated labels (neutral excluded) as labeled vectors for evaluation."""
    aggs = [
        agg
        for agg in aggregated_labels(store, question_id)
        if agg.label_class != NEUTRAL
    ]
    if not aggs:
        raise DataError("no non-neutral aggregated labels available")
    texts = [agg.normalized_text for agg in aggs]
    matrix = embed_batch(texts, provider, cache)
    return [
        LabeledVector(
            text_hash(normalize_text(agg.normalized_text)),
            agg.normalized_text,
            matrix[i],
            agg.label_class,
        )
        for i, agg in enumerate(aggs)
    ]
