"""Exact 2-D t-SNE for cluster inspection, plus CSV/SVG scatter export.

The O(n^2) formulation (no tree approximation): per-point Gaussian
bandwidths found by binary search until each conditional distribution hits
the target perplexity, symmetrized joint affinities, Student-t similarities
in the plane, and plain momentum gradient descent with early exaggeration.
Everything is seeded, so a fixed (matrix, config) reproduces coordinates
bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import _kernels
from .util import DataError, derive_rng

# Stream names for derive_rng(seed, ...) within this module.
_STREAM_INIT = 0
_STREAM_PERTURB = 1

_DUPLICATE_NOISE = 1e-10


@dataclass(frozen=True)
class TsneConfig:
    seed: int
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch: int = 250
    init: str = "seeded_gaussian"  # or "pca" (first two principal components)

    def __post_init__(self):
        if self.perplexity <= 0:
            raise DataError("perplexity must be positive")
        if self.iterations < 1:
            raise DataError("iterations must be at least 1")
        if self.init not in ("seeded_gaussian", "pca"):
            raise DataError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class ProjectedPoint:
    normalized_text: str
    x: float
    y: float
    class_hint: str | None = None


@dataclass(frozen=True)
class TsneResult:
    coords: np.ndarray
    kl_trace: list[float] = field(repr=False)
    perplexities: np.ndarray = field(repr=False)
    target_perplexity: float = 0.0


def conditional_affinities(
    sq_dists: np.ndarray, target_perplexity: float, tol: float = 1e-3, max_steps: int = 64
):
    """Row-wise Gaussian affinities whose perplexity matches the target.

    For each point the precision beta = 1/(2 sigma^2) is bracketed by
    doubling/halving and then bisected (at most ``max_steps`` updates)
    until |perplexity - target| <= tol. Returns the row-normalized
    conditional matrix (zero diagonal) and the achieved per-row perplexity.
    """
    n = sq_dists.shape[0]
    cond = np.zeros((n, n))
    perps = np.zeros(n)
    for i in range(n):
        d = sq_dists[i].copy()
        d[i] = np.inf
        shift = d.min()
        d_shifted = d - shift
        d_shifted[i] = 0.0
        beta, beta_lo, beta_hi = 1.0, 0.0, math.inf
        p = perp = None
        for _ in range(max_steps):
            p = np.exp(-beta * d_shifted)
            p[i] = 0.0
            s = p.sum()
            p /= s
            entropy = math.log(s) + beta * float((d_shifted * p).sum())
            perp = math.exp(entropy)
            if abs(perp - target_perplexity) <= tol:
                break
            if perp > target_perplexity:
                beta_lo = beta
                beta = beta * 2.0 if math.isinf(beta_hi) else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = (beta + beta_lo) / 2.0
        cond[i] = p
        perps[i] = perp
    return cond, perps


def joint_affinities(
    x: np.ndarray, target_perplexity: float, tol: float = 1e-3, max_steps: int = 64
):
    """Symmetrized affinities: p_ij = (p_j|i + p_i|j) / (2n). Sums to 1."""
    cond, perps = conditional_affinities(
        _kernels.pairwise_sq_dists(x), target_perplexity, tol, max_steps
    )
    return (cond + cond.T) / (2.0 * x.shape[0]), perps


def kl_divergence(p_joint: np.ndarray, coords: np.ndarray) -> float:
    """KL(P || Q) of the current layout under the Student-t kernel."""
    return _kernels.tsne_grad_kl(p_joint, p_joint, coords)[1]


def kl_gradient(p_joint: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Analytic gradient of ``kl_divergence`` with respect to the layout."""
    return _kernels.tsne_grad_kl(p_joint, p_joint, coords)[0]


def _perturb_duplicates(x: np.ndarray, seed: int) -> np.ndarray:
    """Nudge exact duplicate rows apart so the bandwidth search stays sound."""
    seen: set[bytes] = set()
    dup_rows = []
    for i in range(x.shape[0]):
        key = x[i].tobytes()
        if key in seen:
            dup_rows.append(i)
        else:
            seen.add(key)
    if dup_rows:
        x = x.copy()
        rng = derive_rng(seed, _STREAM_PERTURB)
        for i in dup_rows:
            x[i] = x[i] + rng.standard_normal(x.shape[1]) * _DUPLICATE_NOISE
    return x


def tsne(x: np.ndarray, config: TsneConfig) -> TsneResult:
    """Project an n x D matrix to n x 2; returns coordinates and the KL trace.

    The trace has iterations + 1 entries: the divergence at the initial
    layout and after every update. The effective perplexity is the
    configured one clamped to (n - 1) / 3.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise DataError("t-SNE needs at least 4 points")
    if not np.all(np.isfinite(x)):
        raise DataError("t-SNE input contains non-finite values")
    n = x.shape[0]
    target = min(config.perplexity, (n - 1) / 3.0)
    x = _perturb_duplicates(x, config.seed)
    p_joint, perps = joint_affinities(x, target)

    if config.init == "pca":
        centered = x - x.mean(axis=0)
        u, s, _ = np.linalg.svd(centered, full_matrices=False)
        coords = u[:, :2] * s[:2]
        spread = float(coords[:, 0].std())
        if spread > 0.0:
            coords = coords / spread * 1e-4
    else:
        coords = derive_rng(config.seed, _STREAM_INIT).standard_normal((n, 2)) * 1e-4

    velocity = np.zeros_like(coords)
    # per-parameter adaptive gains; without them the fixed learning rate
    # over-disperses the layout during exaggeration and KL fails to descend
    gains = np.ones_like(coords)
    trace: list[float] = []
    for it in range(config.iterations):
        exag = config.early_exaggeration if it < config.exaggeration_iters else 1.0
        p_eff = p_joint * exag if exag != 1.0 else p_joint
        grad, kl = _kernels.tsne_grad_kl(p_eff, p_joint, coords)
        trace.append(kl)
        momentum = (
            config.momentum_early if it < config.momentum_switch else config.momentum_late
        )
        gains = np.where((grad > 0.0) != (velocity > 0.0), gains + 0.2, gains * 0.8)
        np.clip(gains, 0.01, None, out=gains)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        coords = coords + velocity
        coords = coords - coords.mean(axis=0)
    trace.append(kl_divergence(p_joint, coords))
    return TsneResult(
        coords=coords, kl_trace=trace, perplexities=perps, target_perplexity=target
    )


def project_question(store, question_id, config: TsneConfig, provider, cache=None):
    """t-SNE over a question's unique responses, with label classes attached."""
    from .annotation import aggregated_labels
    from .embedding import embed_batch

    uniques = store.unique_responses(question_id)
    if len(uniques) < 4:
        raise DataError(f"question {question_id!r} has fewer than 4 unique responses")
    texts = [u.normalized_text for u in uniques]
    result = tsne(embed_batch(texts, provider, cache), config)
    hints = {
        agg.normalized_text: agg.label_class
        for agg in aggregated_labels(store, question_id)
    }
    return [
        ProjectedPoint(t, float(result.coords[i, 0]), float(result.coords[i, 1]), hints.get(t))
        for i, t in enumerate(texts)
    ]


_CLASS_ORDER = ("non_earnest", "neutral", "earnest", "unlabeled")
_CLASS_COLORS = {
    "non_earnest": "#d62728",
    "neutral": "#8c8c8c",
    "earnest": "#2ca02c",
    "unlabeled": "#1f77b4",
}


def export_scatter(points: list[ProjectedPoint], path: str | Path, format: str = "csv"):
    """Write the projection as CSV (17-significant-digit coords) or SVG.

    Both outputs are byte-deterministic for a fixed input. The SVG draws
    one marker per point, colored by class, with a legend listing each
    class present.
    """
    if not points:
        raise DataError("nothing to export: no projected points")
    path = Path(path)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["text", "x", "y", "class"])
        for p in points:
            writer.writerow(
                [p.normalized_text, f"{p.x:.17g}", f"{p.y:.17g}", p.class_hint or ""]
            )
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif format == "svg":
        path.write_bytes(render_scatter_svg(points).encode("utf-8"))
    else:
        raise DataError(f"unknown export format {format!r}")


def render_scatter_svg(points: list[ProjectedPoint], width=640, height=480, margin=48) -> str:
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)

    def sx(v: float) -> float:
        if x_hi == x_lo:
            return width / 2.0
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v: float) -> float:
        if y_hi == y_lo:
            return height / 2.0
        # SVG y grows downward; flip so larger y plots higher.
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    present = {p.class_hint or "unlabeled" for p in points}
    legend_classes = [c for c in _CLASS_ORDER if c in present]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for p in points:
        cls = p.class_hint or "unlabeled"
        out.append(
            f'<circle cx="{sx(p.x):.2f}" cy="{sy(p.y):.2f}" r="3" '
            f'fill="{_CLASS_COLORS[cls]}" fill-opacity="0.8">'
            f"<title>{escape(p.normalized_text)}</title></circle>"
        )
    for i, cls in enumerate(legend_classes):
        ly = margin + i * 18
        out.append(
            f'<circle cx="{width - margin - 90}" cy="{ly}" r="5" fill="{_CLASS_COLORS[cls]}"/>'
        )
        out.append(
            f'<text x="{width - margin - 78}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">{cls}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
