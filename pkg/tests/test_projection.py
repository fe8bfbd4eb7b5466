import numpy as np
import pytest

from eit.projection import (
    ProjectedPoint,
    TsneConfig,
    _perturb_duplicates,
    conditional_affinities,
    export_scatter,
    joint_affinities,
    kl_divergence,
    project_question,
    render_scatter_svg,
    tsne,
)
from eit.util import DataError, derive_rng


def _clustered(n: int, dim: int, seed: int, separation: float = 5.0) -> np.ndarray:
    rng = derive_rng(seed, 99)
    x = rng.standard_normal((n, dim))
    x[: n // 2, 0] += separation
    return x


def _row_perplexity(row: np.ndarray) -> float:
    p = row[row > 0]
    return float(np.exp(-(p * np.log(p)).sum()))


class TestAffinities:
    @pytest.mark.parametrize("n,dim,target", [(25, 8, 5.0), (40, 4, 12.0), (12, 3, 3.0)])
    def test_conditional_rows_hit_target_perplexity(self, n, dim, target):
        from eit import _kernels

        x = _clustered(n, dim, seed=n)
        cond, perps = conditional_affinities(_kernels.pairwise_sq_dists(x), target)
        assert cond.shape == (n, n)
        assert np.allclose(cond.sum(axis=1), 1.0)
        assert np.all(np.diag(cond) == 0.0)
        assert np.all(cond >= 0.0)
        for i in range(n):
            # oracle: recompute entropy from the returned distribution itself
            assert abs(_row_perplexity(cond[i]) - target) <= 1e-3 + 1e-9
            assert abs(perps[i] - target) <= 1e-3

    def test_joint_is_symmetric_and_sums_to_one(self):
        x = _clustered(30, 6, seed=1)
        p, _ = joint_affinities(x, 8.0)
        assert np.array_equal(p, p.T)
        assert p.sum() == pytest.approx(1.0)
        assert np.all(np.diag(p) == 0.0)

    def test_duplicate_rows_are_nudged_apart(self):
        x = _clustered(10, 4, seed=2)
        x[7] = x[3]
        x[9] = x[3]
        out = _perturb_duplicates(x, seed=0)
        assert np.array_equal(out[3], x[3])  # first occurrence untouched
        for i in (7, 9):
            assert not np.array_equal(out[i], x[i])
            assert np.max(np.abs(out[i] - x[i])) < 1e-8
        # without duplicates the input array is returned as-is
        clean = _clustered(10, 4, seed=3)
        assert _perturb_duplicates(clean, seed=0) is clean

    def test_affinities_survive_duplicates_through_tsne(self):
        x = _clustered(12, 4, seed=4)
        x[5] = x[0]
        result = tsne(x, TsneConfig(seed=0, perplexity=3.0, iterations=20))
        assert np.all(np.isfinite(result.coords))
        assert all(np.isfinite(v) for v in result.kl_trace)


class TestTsne:
    def test_config_validation(self):
        with pytest.raises(DataError, match="perplexity"):
            TsneConfig(seed=0, perplexity=0.0)
        with pytest.raises(DataError, match="iterations"):
            TsneConfig(seed=0, iterations=0)
        with pytest.raises(DataError, match="init"):
            TsneConfig(seed=0, init="umap")

    def test_trace_length_and_descent(self):
        x = _clustered(30, 8, seed=5)
        config = TsneConfig(seed=0, perplexity=8.0, iterations=1000)
        result = tsne(x, config)
        assert result.coords.shape == (30, 2)
        assert len(result.kl_trace) == config.iterations + 1
        assert result.kl_trace[-1] < result.kl_trace[0]
        # well-separated clusters end far below the near-uniform start
        assert result.kl_trace[-1] < 0.5 * result.kl_trace[0]
        assert result.kl_trace[-1] == pytest.approx(
            kl_divergence(joint_affinities(x, 8.0)[0], result.coords)
        )

    def test_kl_is_translation_invariant(self):
        x = _clustered(20, 6, seed=13)
        p, _ = joint_affinities(x, 5.0)
        coords = derive_rng(0, 1).standard_normal((20, 2))
        shifted = coords + np.array([17.5, -3.25])
        assert abs(kl_divergence(p, coords) - kl_divergence(p, shifted)) < 1e-9

    def test_rerun_is_bit_identical(self):
        x = _clustered(20, 6, seed=6)
        config = TsneConfig(seed=11, perplexity=5.0, iterations=60)
        a = tsne(x, config)
        b = tsne(x, config)
        assert np.array_equal(a.coords, b.coords)
        assert a.kl_trace == b.kl_trace
        c = tsne(x, TsneConfig(seed=12, perplexity=5.0, iterations=60))
        assert not np.array_equal(a.coords, c.coords)

    def test_rejects_small_or_bad_input(self):
        with pytest.raises(DataError, match="at least 4"):
            tsne(np.zeros((3, 5)), TsneConfig(seed=0))
        bad = _clustered(8, 3, seed=7)
        bad[2, 1] = np.nan
        with pytest.raises(DataError, match="non-finite"):
            tsne(bad, TsneConfig(seed=0))

    def test_perplexity_clamped_to_point_count(self):
        x = _clustered(10, 4, seed=8)
        result = tsne(x, TsneConfig(seed=0, perplexity=30.0, iterations=10))
        assert result.target_perplexity == pytest.approx((10 - 1) / 3.0)
        assert np.all(np.abs(result.perplexities - result.target_perplexity) <= 1e-3)

    def test_pca_init_runs_and_is_deterministic(self):
        x = _clustered(24, 6, seed=9)
        config = TsneConfig(seed=0, perplexity=6.0, iterations=40, init="pca")
        a = tsne(x, config)
        b = tsne(x, config)
        assert np.array_equal(a.coords, b.coords)

    def test_separated_clusters_stay_separated(self):
        x = _clustered(40, 8, seed=10, separation=8.0)
        result = tsne(x, TsneConfig(seed=3, perplexity=10.0, iterations=400))
        left = result.coords[:20].mean(axis=0)
        right = result.coords[20:].mean(axis=0)
        within = max(
            float(np.linalg.norm(result.coords[:20] - left, axis=1).mean()),
            float(np.linalg.norm(result.coords[20:] - right, axis=1).mean()),
        )
        assert float(np.linalg.norm(left - right)) > within


class TestProjectQuestion:
    def test_points_cover_uniques_with_hints(self, demo_store, provider):
        config = TsneConfig(seed=0, perplexity=5.0, iterations=30)
        points = project_question(demo_store, "q01", config, provider)
        uniques = demo_store.unique_responses("q01")
        assert [p.normalized_text for p in points] == [
            u.normalized_text for u in uniques
        ]
        hints = {p.class_hint for p in points}
        assert None in hints  # most texts are unlabeled
        assert hints & {"non_earnest", "earnest", "neutral"}

    def test_too_few_uniques(self, empty_store):
        from eit.corpus import Question

        empty_store.add_questions([Question("q1", "t", "reflection", 1, "word_cloud")])
        with pytest.raises(DataError, match="fewer than 4"):
            project_question(
                empty_store, "q1", TsneConfig(seed=0), provider=None
            )


class TestExport:
    def _points(self):
        return [
            ProjectedPoint("alpha", 0.5, -1.25, "earnest"),
            ProjectedPoint("beta <&> \"quoted\"", -2.0, 3.5, None),
            ProjectedPoint("gamma", 1.0, 1.0, "non_earnest"),
            ProjectedPoint("delta", 0.1234567890123456789, 0.0, "neutral"),
        ]

    def test_csv_roundtrips_coordinates_exactly(self, tmp_path):
        import csv

        path = tmp_path / "coords.csv"
        export_scatter(self._points(), path, format="csv")
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["text", "x", "y", "class"]
        assert len(rows) == 5
        for p, row in zip(self._points(), rows[1:]):
            assert row[0] == p.normalized_text
            assert float(row[1]) == p.x  # 17 significant digits roundtrip float64
            assert float(row[2]) == p.y
            assert row[3] == (p.class_hint or "")

    def test_exports_are_byte_deterministic(self, tmp_path):
        pts = self._points()
        paths = [tmp_path / name for name in ("a.csv", "b.csv", "a.svg", "b.svg")]
        export_scatter(pts, paths[0], format="csv")
        export_scatter(pts, paths[1], format="csv")
        export_scatter(pts, paths[2], format="svg")
        export_scatter(pts, paths[3], format="svg")
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert paths[2].read_bytes() == paths[3].read_bytes()

    def test_svg_structure_and_escaping(self):
        svg = render_scatter_svg(self._points())
        assert svg.count("<circle") == 4 + 4  # markers plus one legend dot per class
        assert "beta &lt;&amp;&gt;" in svg
        assert "<&>" not in svg
        for cls in ("earnest", "non_earnest", "neutral", "unlabeled"):
            assert f">{cls}</text>" in svg

    def test_degenerate_single_position_svg(self):
        pts = [ProjectedPoint(t, 2.0, 2.0, None) for t in ("a", "b", "c")]
        svg = render_scatter_svg(pts)
        assert 'cx="320.00"' in svg and 'cy="240.00"' in svg

    def test_export_errors(self, tmp_path):
        with pytest.raises(DataError, match="no projected points"):
            export_scatter([], tmp_path / "x.csv")
        with pytest.raises(DataError, match="unknown export format"):
            export_scatter(self._points(), tmp_path / "x.bin", format="bin")
