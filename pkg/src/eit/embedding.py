"""Text-to-vector providers, the on-disk embedding cache, and centroids.

Providers are deterministic: the same normalized text yields the same
vector across calls and processes. The built-in provider hashes character
trigrams and projects them through a seeded random matrix, which is cheap,
language-agnostic, and separates gibberish from sentences well enough for
sampling and tests. A pretrained sentence encoder can be plugged in via
``SentenceModelProvider`` (local model directory, 768-dim by default).
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import normalize_text
from .util import DataError, derive_rng, text_hash

N_BUCKETS = 1 << 16
_PAD_START = "\x02"
_PAD_END = "\x03"


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    provider_id: str
    text_hash: str


class EmbeddingProvider(Protocol):
    provider_id: str
    dimension: int

    def embed(self, texts: list[str]) -> np.ndarray: ...


def _bucket(gram: str) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % N_BUCKETS


def fallback_embed(text: str, seed: int, dimension: int = 768) -> np.ndarray:
    """Deterministic trigram-hash embedding of one text.

    Pipeline: normalize, count character 3-grams over the text padded with
    one boundary marker on each side, hash each gram (BLAKE2b, 8 bytes,
    little-endian) into 2^16 buckets, project through per-bucket rows drawn
    from NumPy PCG64 seeded by SeedSequence(seed, spawn_key=(bucket,)) via
    standard_normal, then L2-normalize. Empty text maps to the zero vector.
    """
    if dimension < 2:
        raise ValueError("dimension must be at least 2")
    normalized = normalize_text(text)
    if not normalized:
        return np.zeros(dimension)
    padded = _PAD_START + normalized + _PAD_END
    counts: dict[int, int] = {}
    for i in range(len(padded) - 2):
        b = _bucket(padded[i : i + 3])
        counts[b] = counts.get(b, 0) + 1
    vec = np.zeros(dimension)
    for b in sorted(counts):
        vec += counts[b] * derive_rng(seed, b).standard_normal(dimension)
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


class HashedTrigramProvider:
    """Built-in deterministic provider; see ``fallback_embed``."""

    def __init__(self, seed: int = 0, dimension: int = 768):
        if dimension < 2:
            raise ValueError("dimension must be at least 2")
        self.seed = seed
        self.dimension = dimension
        self.provider_id = f"trigram-v1-d{dimension}-s{seed}"
        self._rows: dict[int, np.ndarray] = {}

    def _row(self, bucket: int) -> np.ndarray:
        row = self._rows.get(bucket)
        if row is None:
            row = derive_rng(self.seed, bucket).standard_normal(self.dimension)
            self._rows[bucket] = row
        return row

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension))
        for i, text in enumerate(texts):
            normalized = normalize_text(text)
            if not normalized:
                continue
            padded = _PAD_START + normalized + _PAD_END
            counts: dict[int, int] = {}
            for j in range(len(padded) - 2):
                b = _bucket(padded[j : j + 3])
                counts[b] = counts.get(b, 0) + 1
            vec = out[i]
            for b in sorted(counts):
                vec += counts[b] * self._row(b)
            norm = float(np.linalg.norm(vec))
            if norm > 0.0:
                vec /= norm
        return out


class SentenceModelProvider:
    """Wraps a local sentence-encoder model directory (e.g. a 768-dim transformer).

    Loading is lazy; any failure raises a DataError naming the provider
    rather than falling back silently.
    """

    def __init__(self, model_path: str | Path, dimension: int = 768):
        self.model_path = Path(model_path)
        self.dimension = dimension
        self.provider_id = f"sentence-model:{self.model_path.name}"
        self._model = None

    def _load(self):
        if self._model is not None:
            return self._model
        if not self.model_path.exists():
            raise DataError(
                f"provider {self.provider_id}: model path {self.model_path} does not exist"
            )
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            raise DataError(
                f"provider {self.provider_id}: sentence-transformers is not installed ({e})"
            )
        try:
            model = SentenceTransformer(str(self.model_path))
        except Exception as e:
            raise DataError(f"provider {self.provider_id}: failed to load model: {e}")
        self._model = model
        return model

    def embed(self, texts: list[str]) -> np.ndarray:
        model = self._load()
        out = np.asarray(
            model.encode([normalize_text(t) for t in texts], convert_to_numpy=True),
            dtype=np.float64,
        )
        if out.ndim != 2 or out.shape[1] != self.dimension:
            raise DataError(
                f"provider {self.provider_id}: model emits dimension "
                f"{out.shape[-1] if out.ndim == 2 else '?'}, expected {self.dimension}"
            )
        return out


class EmbeddingCache:
    """Content-addressed vector cache: one .npy file per (provider, text hash).

    Writes go through a temp file and ``os.replace`` so concurrent readers
    never observe a torn entry; hits are bit-identical to the original
    computation.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, provider_id: str, key: str) -> Path:
        return self.root / provider_id.replace(os.sep, "_") / f"{key}.npy"

    def get(self, provider_id: str, key: str) -> np.ndarray | None:
        path = self._path(provider_id, key)
        if not path.exists():
            return None
        return np.load(path)

    def put(self, provider_id: str, key: str, vec: np.ndarray):
        path = self._path(provider_id, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.save(fh, vec)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def embed_batch(
    texts: list[str],
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> np.ndarray:
    """Embed texts in order, consulting and filling the cache.

    Row i embeds texts[i]. Cache keys are (provider_id, SHA-256 of the
    normalized text). Provider failures propagate; there is no fallback.
    """
    n = len(texts)
    out = np.empty((n, provider.dimension))
    keys = [text_hash(normalize_text(t)) for t in texts]
    misses: list[int] = []
    for i, key in enumerate(keys):
        hit = cache.get(provider.provider_id, key) if cache is not None else None
        if hit is None:
            misses.append(i)
        else:
            out[i] = hit
    if misses:
        computed = provider.embed([texts[i] for i in misses])
        if computed.shape != (len(misses), provider.dimension):
            raise DataError(
                f"provider {provider.provider_id} returned shape {computed.shape}, "
                f"expected ({len(misses)}, {provider.dimension})"
            )
        if not np.all(np.isfinite(computed)):
            raise DataError(f"provider {provider.provider_id} produced non-finite values")
        for row, i in enumerate(misses):
            out[i] = computed[row]
            if cache is not None:
                cache.put(provider.provider_id, keys[i], computed[row])
    return out


def embedding_vectors(
    texts: list[str],
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[EmbeddingVector]:
    matrix = embed_batch(texts, provider, cache)
    return [
        EmbeddingVector(matrix[i], provider.provider_id, text_hash(normalize_text(t)))
        for i, t in enumerate(texts)
    ]


def centroid(vectors: list[EmbeddingVector]) -> np.ndarray:
    """Coordinate-wise mean, summing in text-hash order so the result is
    exactly permutation-invariant."""
    if not vectors:
        raise ValueError("centroid of an empty set is undefined")
    dim = vectors[0].values.shape[0]
    if any(v.values.shape[0] != dim for v in vectors):
        raise ValueError("centroid inputs must share a dimension")
    total = np.zeros(dim)
    for v in sorted(vectors, key=lambda v: v.text_hash):
        total += v.values
    return total / len(vectors)
