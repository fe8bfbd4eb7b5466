"""Toolkit for spotting non-earnest lecture-poll responses and tracking
per-student engagement: ingest, imbalance-aware sampling, rubric labels,
embedding + KNN classification, t-SNE inspection, attendance and at-risk
reports."""

from ._kernels import BACKEND
from .corpus import ColumnMapping, Question, Response, Store, UniqueResponse, normalize_text
from .util import DataError, EitError, derive_rng

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ColumnMapping",
    "DataError",
    "EitError",
    "Question",
    "Response",
    "Store",
    "UniqueResponse",
    "derive_rng",
    "normalize_text",
    "__version__",
]
