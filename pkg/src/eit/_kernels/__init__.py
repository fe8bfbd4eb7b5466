"""Hot-loop kernels with backend selection at import time.

The compiled extension is preferred; the pure-NumPy module is the fallback.
Set ``EIT_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
for debugging). ``BACKEND`` names the choice that won.
"""

import os

from . import pure

if os.environ.get("EIT_PURE_PYTHON"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

levenshtein = _impl.levenshtein
pairwise_sq_dists = _impl.pairwise_sq_dists
cross_sq_dists = _impl.cross_sq_dists
tsne_grad_kl = _impl.tsne_grad_kl

__all__ = [
    "BACKEND",
    "levenshtein",
    "pairwise_sq_dists",
    "cross_sq_dists",
    "tsne_grad_kl",
]
