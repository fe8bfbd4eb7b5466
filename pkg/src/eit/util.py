"""Shared plumbing: seeded RNG derivation, hashing, timestamps, errors."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

import numpy as np


class EitError(Exception):
    """Base class for errors raised by this package."""


class DataError(EitError):
    """User-facing data problem: unknown ids, malformed files, bad values."""


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """PCG64 generator from ``SeedSequence(seed, spawn_key=path)``.

    Every random draw in the package goes through this, so a run is fully
    reproducible from its seed; ``path`` namespaces independent streams.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=path)))


def text_hash(normalized_text: str) -> str:
    """SHA-256 hex digest of the UTF-8 bytes of a normalized text."""
    return hashlib.sha256(normalized_text.encode("utf-8")).hexdigest()


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 timestamp, assuming UTC when no offset is present."""
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def stable_json(obj) -> str:
    """Canonical JSON used for fingerprints: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
