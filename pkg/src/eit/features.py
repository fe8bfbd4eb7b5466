"""Per-response suspicion indicators and the imbalance-aware annotation sampler.

Four indicators are computed per unique response: distance from the
unique-response centroid in embedding space, response frequency, edit
distance to the most common response, and character length. The sampler
over-weights the suspect tail of each indicator so the annotation batch
ends up roughly balanced despite heavy class imbalance in raw responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .corpus import Store
from .embedding import EmbeddingCache, EmbeddingProvider, centroid, embedding_vectors
from .util import DataError, derive_rng

METRICS = ("centroid_distance", "frequency", "edit_distance_to_mode", "char_length")

# Ordering that puts the least-earnest end first, per indicator: far from
# the centroid, rare, far from the modal answer, short.
_DESCENDING = {"centroid_distance": True, "frequency": False,
               "edit_distance_to_mode": True, "char_length": False}


@dataclass(frozen=True)
class FeatureRow:
    normalized_text: str
    centroid_distance: float
    frequency: int
    edit_distance_to_mode: int
    char_length: int


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    tail_fraction: float = 0.20
    per_metric_fraction: float = 0.20
    target_n: int = 200

    def __post_init__(self):
        if not 0.0 < self.tail_fraction <= 1.0:
            raise DataError("tail_fraction must be in (0, 1]")
        if not 0.0 < self.per_metric_fraction <= 1.0:
            raise DataError("per_metric_fraction must be in (0, 1]")
        if self.target_n < 1:
            raise DataError("target_n must be at least 1")


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance; dispatches to the selected kernel backend."""
    return _kernels.levenshtein(a, b)


def compute_features(
    store: Store,
    question_id: str,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[FeatureRow]:
    """One FeatureRow per unique response, in (count desc, text asc) order.

    The centroid is taken over unique responses (one vector per distinct
    text), the modal response is the most frequent unique text with ties
    broken lexicographically, and char_length counts Unicode scalar values.
    """
    uniques = store.unique_responses(question_id)
    if not uniques:
        raise DataError(f"question {question_id!r} has no responses")
    texts = [u.normalized_text for u in uniques]
    vectors = embedding_vectors(texts, provider, cache)
    center = centroid(vectors)
    mode_text = uniques[0].normalized_text
    return [
        FeatureRow(
            normalized_text=u.normalized_text,
            centroid_distance=float(np.linalg.norm(v.values - center)),
            frequency=u.count,
            edit_distance_to_mode=levenshtein(u.normalized_text, mode_text),
            char_length=len(u.normalized_text),
        )
        for u, v in zip(uniques, vectors)
    ]


def non_earnest_rank(metric: str, rows: list[FeatureRow]) -> list[FeatureRow]:
    """Order rows most-suspect-first for one metric, ties by text ascending."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not rows:
        raise ValueError("rows must be non-empty")
    descending = _DESCENDING[metric]

    def key(row: FeatureRow):
        value = getattr(row, metric)
        return (-value if descending else value, row.normalized_text)

    return sorted(rows, key=key)


def tail_split(ranked: list[FeatureRow], tail_fraction: float):
    """Split a ranked list into (tail, rest); tail size = ceil(fraction * n)."""
    t = math.ceil(tail_fraction * len(ranked))
    return ranked[:t], ranked[t:]


def tail_weights(tail_size: int, rest_size: int) -> tuple[int, int]:
    """Integer weights giving the tail and the rest equal total mass.

    Each tail member weighs ``rest_size`` and each rest member ``tail_size``
    so both groups carry tail_size * rest_size total. Degenerate splits
    (either side empty) fall back to uniform weight 1.
    """
    if tail_size == 0 or rest_size == 0:
        return 1, 1
    return rest_size, tail_size


def weighted_sample_without_replacement(
    items: list, weights: list[float], k: int, rng: np.random.Generator
) -> list:
    """Draw k distinct items, successive draws renormalizing the remainder.

    Returns items in draw order (the first element is the first draw).
    """
    if k > len(items):
        raise ValueError("cannot draw more items than exist")
    if len(weights) != len(items):
        raise ValueError("weights must align with items")
    pool = list(range(len(items)))
    w = [float(x) for x in weights]
    out = []
    for _ in range(k):
        total = sum(w[i] for i in pool)
        if total <= 0.0:
            pick_pos = int(rng.integers(len(pool)))
        else:
            x = rng.random() * total
            acc = 0.0
            pick_pos = len(pool) - 1
            for pos, i in enumerate(pool):
                acc += w[i]
                if x < acc:
                    pick_pos = pos
                    break
        out.append(items[pool.pop(pick_pos)])
    return out


def rule_based_sample(
    store: Store,
    question_id: str,
    config: SamplerConfig,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> set[str]:
    """Select unique responses for annotation, tail-weighted per metric.

    For each metric the ranked tail (ceil(tail_fraction * U) rows) gets the
    same total sampling mass as the remainder, and ceil(per_metric_fraction
    * U) rows are drawn without replacement. The four draws are unioned;
    a union larger than target_n is uniformly subsampled. One PRNG stream
    seeded from config.seed drives every draw, so the result is a pure
    function of (corpus, config).
    """
    rows = compute_features(store, question_id, provider, cache)
    u = len(rows)
    per_metric = min(math.ceil(config.per_metric_fraction * u), u)
    rng = derive_rng(config.seed)
    union: set[str] = set()
    for metric in METRICS:
        ranked = non_earnest_rank(metric, rows)
        tail, rest = tail_split(ranked, config.tail_fraction)
        w_tail, w_rest = tail_weights(len(tail), len(rest))
        weights = [w_tail] * len(tail) + [w_rest] * len(rest)
        drawn = weighted_sample_without_replacement(tail + rest, weights, per_metric, rng)
        union.update(r.normalized_text for r in drawn)
    if len(union) > config.target_n:
        ordered = sorted(union)
        kept = weighted_sample_without_replacement(
            ordered, [1.0] * len(ordered), config.target_n, rng
        )
        return set(kept)
    return union


def sample_rows(
    store: Store,
    question_id: str,
    config: SamplerConfig,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[FeatureRow]:
    """The sampled texts with their metric provenance, rarest first.

    Presentation order for annotation sheets and the labeling queue:
    (frequency asc, text asc), deterministic for a given corpus and config.
    """
    rows = compute_features(store, question_id, provider, cache)
    sampled = rule_based_sample(store, question_id, config, provider, cache)
    picked = [r for r in rows if r.normalized_text in sampled]
    picked.sort(key=lambda r: (r.frequency, r.normalized_text))
    return picked
