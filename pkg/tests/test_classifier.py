import math

import numpy as np
import pytest

from eit.annotation import EARNEST, NON_EARNEST
from eit.classifier import (
    EvalMetrics,
    LabeledVector,
    NonEarnestPool,
    TrainingSetConfig,
    ablation_grid,
    build_training_set,
    classify_question,
    confusion,
    cross_validate,
    eval_set_from_labels,
    knn_predict,
    knn_predict_batch,
)
from eit.util import DataError, derive_rng, text_hash


def _lv(text: str, coords, label: str) -> LabeledVector:
    return LabeledVector(text_hash(text), text, np.asarray(coords, dtype=float), label)


def _config(**kw) -> TrainingSetConfig:
    base = dict(target_question_id="q01", seed=0)
    base.update(kw)
    return TrainingSetConfig(**base)


class TestConfigAndMetrics:
    def test_config_validation(self):
        with pytest.raises(DataError, match="fraction"):
            _config(non_earnest_fraction=0.0)
        with pytest.raises(DataError, match="fraction"):
            _config(non_earnest_fraction=1.5)
        with pytest.raises(DataError, match="seed_count"):
            _config(earnest_seed_count=0)
        with pytest.raises(DataError, match="k"):
            _config(k=0)
        with pytest.raises(DataError, match="space"):
            _config(space="pca")
        with pytest.raises(DataError, match="distance"):
            _config(distance="manhattan")

    def test_metrics_hand_values(self):
        m = EvalMetrics(tp=8, fn=2, fp=5, tn=5)
        assert m.n == 20
        assert m.recall == pytest.approx(0.8)
        assert m.accuracy == pytest.approx(0.65)
        d = m.as_dict()
        assert d["confusion"] == {"tp": 8, "fn": 2, "fp": 5, "tn": 5}
        assert d["n"] == 20

    def test_metrics_empty_is_zero_not_nan(self):
        empty = EvalMetrics(0, 0, 0, 0)
        assert empty.accuracy == 0.0
        assert empty.recall == 0.0
        no_pos = EvalMetrics(tp=0, fn=0, fp=1, tn=3)
        assert no_pos.recall == 0.0


class TestPool:
    def test_from_entries_dedups_and_sorts(self):
        pool = NonEarnestPool.from_entries(
            [("q2", "bbb"), ("q1", "zzz"), ("q2", "bbb"), ("q1", "aaa")]
        )
        assert pool.entries == (("q1", "aaa"), ("q1", "zzz"), ("q2", "bbb"))
        assert len(pool) == 3

    def test_from_store_is_cross_question_non_earnest(self, demo_store):
        from eit.annotation import aggregated_labels

        pool = NonEarnestPool.from_store(demo_store)
        assert len(pool) > 0
        assert len({q for q, _ in pool.entries}) > 1  # pooled across questions
        ne = {
            (a.question_id, a.normalized_text)
            for a in aggregated_labels(demo_store)
            if a.label_class == NON_EARNEST
        }
        assert set(pool.entries) == ne


class TestBuildTrainingSet:
    def test_composition_and_order(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        config = _config(non_earnest_fraction=0.5, earnest_seed_count=10)
        train = build_training_set(demo_store, config, pool, provider)
        m = math.ceil(0.5 * len(pool))
        assert len(train) == m + 10
        assert [lv.label for lv in train[:m]] == [NON_EARNEST] * m
        assert [lv.label for lv in train[m:]] == [EARNEST] * 10
        # earnest seeds are the most frequent uniques, in unique order
        top = [u.normalized_text for u in demo_store.unique_responses("q01")[:10]]
        assert [lv.text for lv in train[m:]] == top
        pool_texts = {t for _, t in pool.entries}
        assert all(lv.text in pool_texts for lv in train[:m])
        assert all(lv.vector.shape == (provider.dimension,) for lv in train)

    def test_seed_controls_pool_draw(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        a = build_training_set(demo_store, _config(seed=1), pool, provider)
        b = build_training_set(demo_store, _config(seed=1), pool, provider)
        c = build_training_set(demo_store, _config(seed=2), pool, provider)
        assert [lv.text for lv in a] == [lv.text for lv in b]
        assert [lv.text for lv in a] != [lv.text for lv in c]
        # the earnest half does not depend on the seed
        split = len(a) - 20
        assert [lv.text for lv in a[split:]] == [lv.text for lv in c[split:]]

    def test_fraction_one_takes_whole_pool(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        train = build_training_set(
            demo_store, _config(non_earnest_fraction=1.0), pool, provider
        )
        assert sorted(lv.text for lv in train if lv.label == NON_EARNEST) == sorted(
            t for _, t in pool.entries
        )

    def test_errors(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        with pytest.raises(DataError, match="pool is empty"):
            build_training_set(
                demo_store, _config(), NonEarnestPool.from_entries([]), provider
            )
        n_uniques = len(demo_store.unique_responses("q01"))
        with pytest.raises(DataError, match="exceeds"):
            build_training_set(
                demo_store, _config(earnest_seed_count=n_uniques + 1), pool, provider
            )
        with pytest.raises(DataError, match="unknown question"):
            build_training_set(
                demo_store, _config(target_question_id="q99"), pool, provider
            )


class TestKnn:
    def _line_train(self):
        # 1-D layout: two non-earnest points near 0, three earnest near 10
        return [
            _lv("n0", [0.0], NON_EARNEST),
            _lv("n1", [1.0], NON_EARNEST),
            _lv("e0", [10.0], EARNEST),
            _lv("e1", [11.0], EARNEST),
            _lv("e2", [12.0], EARNEST),
        ]

    def test_majority_vote_both_sides(self):
        train = self._line_train()
        label, neighbors = knn_predict(train, np.array([0.4]), k=3)
        assert label == NON_EARNEST
        assert [n["text"] for n in neighbors] == ["n0", "n1", "e0"]
        assert [n["distance"] for n in neighbors] == pytest.approx([0.4, 0.6, 9.6])
        label, neighbors = knn_predict(train, np.array([10.4]), k=3)
        assert label == EARNEST
        assert [n["text"] for n in neighbors] == ["e0", "e1", "e2"]

    def test_even_k_class_tie_goes_non_earnest(self):
        train = [_lv("n", [5.0], NON_EARNEST), _lv("e", [6.0], EARNEST)]
        label, _ = knn_predict(train, np.array([5.5]), k=2)
        assert label == NON_EARNEST
        _, margins, _ = knn_predict_batch(train, np.array([[5.5]]), k=2)
        assert margins == [0.0]

    def test_distance_tie_prefers_smaller_training_index(self):
        # equidistant neighbors with k=1: the earlier row wins even when
        # that favors earnest, so the rule is positional, not class-based
        train = [_lv("e", [2.0], EARNEST), _lv("n", [4.0], NON_EARNEST)]
        label, neighbors = knn_predict(train, np.array([3.0]), k=1)
        assert label == EARNEST
        assert neighbors[0]["text"] == "e"
        swapped = [train[1], train[0]]
        label, neighbors = knn_predict(swapped, np.array([3.0]), k=1)
        assert label == NON_EARNEST
        assert neighbors[0]["text"] == "n"

    def test_margin_quantization(self):
        train = self._line_train()
        _, margins, _ = knn_predict_batch(
            train, np.array([[0.0], [10.0], [5.6]]), k=5
        )
        # votes are 2/3 splits of five neighbors: margin |2-3|/5
        assert margins == pytest.approx([0.2, 0.2, 0.2])

    def test_cosine_distance(self):
        train = [_lv("x", [1.0, 0.0], NON_EARNEST), _lv("y", [0.0, 1.0], EARNEST)]
        label, neighbors = knn_predict(train, np.array([1.0, 1.0]), k=2, distance="cosine")
        expected = 1.0 - 1.0 / math.sqrt(2.0)
        assert [n["distance"] for n in neighbors] == pytest.approx([expected, expected])
        assert label == NON_EARNEST  # tie on class, tie on distance
        # zero query vector: similarity 0 by convention, distance 1 everywhere
        _, neighbors = knn_predict(train, np.array([0.0, 0.0]), k=2, distance="cosine")
        assert [n["distance"] for n in neighbors] == pytest.approx([1.0, 1.0])

    def test_batch_matches_single(self):
        rng = derive_rng(3, 50)
        train = [
            _lv(f"t{i}", rng.standard_normal(6), NON_EARNEST if i % 3 else EARNEST)
            for i in range(30)
        ]
        queries = rng.standard_normal((12, 6))
        for distance in ("euclidean", "cosine"):
            labels, _, rows = knn_predict_batch(train, queries, k=5, distance=distance)
            for q, label, row in zip(queries, labels, rows):
                single_label, neighbors = knn_predict(train, q, k=5, distance=distance)
                assert single_label == label
                assert [n["text"] for n in neighbors] == [train[j].text for j in row]

    def test_validation(self):
        train = self._line_train()
        with pytest.raises(DataError, match="exceeds"):
            knn_predict(train, np.array([0.0]), k=6)
        with pytest.raises(DataError, match="k must be"):
            knn_predict(train, np.array([0.0]), k=0)
        with pytest.raises(DataError, match="dimension"):
            knn_predict(train, np.array([0.0, 1.0]), k=1)
        with pytest.raises(DataError, match="dimension"):
            knn_predict_batch(train, np.zeros((2, 3)), k=1)


class TestConfusion:
    def test_hand_counts(self):
        true = [NON_EARNEST, NON_EARNEST, EARNEST, EARNEST, NON_EARNEST]
        pred = [NON_EARNEST, EARNEST, EARNEST, NON_EARNEST, NON_EARNEST]
        m = confusion(true, pred)
        assert (m.tp, m.fn, m.fp, m.tn) == (2, 1, 1, 1)


def _blobs(n_ne: int, n_e: int, dim: int = 8, seed: int = 0, sep: float = 6.0):
    rng = derive_rng(seed, 60)
    out = []
    for i in range(n_ne):
        v = rng.standard_normal(dim)
        v[0] -= sep / 2
        out.append(_lv(f"ne{i}", v, NON_EARNEST))
    for i in range(n_e):
        v = rng.standard_normal(dim)
        v[0] += sep / 2
        out.append(_lv(f"e{i}", v, EARNEST))
    return out


class TestCrossValidate:
    def test_pooled_equals_fold_sum_and_stratification(self):
        labeled = _blobs(10, 15)
        pooled, per_fold = cross_validate(labeled, k=3, folds=5, seed=0)
        assert len(per_fold) == 5
        assert pooled.tp == sum(m.tp for m in per_fold)
        assert pooled.fn == sum(m.fn for m in per_fold)
        assert pooled.fp == sum(m.fp for m in per_fold)
        assert pooled.tn == sum(m.tn for m in per_fold)
        assert pooled.n == 25
        for m in per_fold:  # exact stratification: 2 NE + 3 E per fold
            assert m.n == 5
            assert m.tp + m.fn == 2

    def test_separable_blobs_score_high(self):
        pooled, _ = cross_validate(_blobs(25, 25, sep=10.0), k=3, folds=5, seed=1)
        assert pooled.accuracy >= 0.95
        assert pooled.recall >= 0.95

    def test_deterministic_for_seed(self):
        labeled = _blobs(12, 12, sep=2.0, seed=5)
        a = cross_validate(labeled, k=3, folds=4, seed=7)
        b = cross_validate(labeled, k=3, folds=4, seed=7)
        assert a == b

    def test_small_class_rejected(self):
        labeled = _blobs(3, 20)
        with pytest.raises(DataError, match="at least 5"):
            cross_validate(labeled, k=3, folds=5, seed=0)


class TestAblationGrid:
    def test_grid_shape_and_order(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        eval_set = eval_set_from_labels(demo_store, provider)
        rows = ablation_grid(
            demo_store,
            fractions=[0.5, 0.1],
            seed_counts=[10, 5],
            eval_set=eval_set,
            pool=pool,
            base_config=_config(),
            provider=provider,
        )
        cells = [(r["non_earnest_fraction"], r["earnest_seed_count"]) for r in rows]
        assert cells == [(0.1, 5), (0.1, 10), (0.5, 5), (0.5, 10)]
        for r in rows:
            assert isinstance(r["metrics"], EvalMetrics)
            assert r["metrics"].n > 0

    def test_training_texts_excluded_from_eval(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        config = _config(non_earnest_fraction=1.0, earnest_seed_count=5)
        train = build_training_set(demo_store, config, pool, provider)
        eval_set = eval_set_from_labels(demo_store, provider)
        train_keys = {lv.key for lv in train}
        colliding = [lv for lv in eval_set if lv.key in train_keys]
        assert colliding  # pool texts are labeled, so overlap exists by design
        rows = ablation_grid(
            demo_store, [1.0], [5], eval_set, pool, config, provider
        )
        assert rows[0]["metrics"].n == len(eval_set) - len(colliding)

    def test_empty_cell_rejected(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        train = build_training_set(
            demo_store, _config(non_earnest_fraction=1.0), pool, provider
        )
        eval_set = [train[0]]  # everything collides with the training set
        with pytest.raises(DataError, match="leaves no evaluation items"):
            ablation_grid(
                demo_store, [1.0], [20], eval_set, pool, _config(), provider
            )
        with pytest.raises(DataError, match="grid is empty"):
            ablation_grid(demo_store, [], [5], eval_set, pool, _config(), provider)


class TestClassifyQuestion:
    def test_classifies_every_unique_and_persists(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        result = classify_question(demo_store, _config(seed=3), pool, provider)
        texts = {u.normalized_text for u in demo_store.unique_responses("q01")}
        assert set(result["classes"]) == texts
        assert set(result["classes"].values()) <= {NON_EARNEST, EARNEST}
        assert all(0.0 <= m <= 1.0 for m in result["margins"].values())
        stored = demo_store.run_classes(result["run_id"])
        assert set(stored) == texts
        for text, cls in result["classes"].items():
            assert stored[text]["class"] == cls
            assert stored[text]["margin"] == result["margins"][text]
        neighbors = next(iter(stored.values()))["neighbors"]
        assert len(neighbors) == 5
        assert {"text", "label", "distance"} <= set(neighbors[0])

    def test_rerun_is_idempotent(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        first = classify_question(demo_store, _config(seed=3), pool, provider)
        again = classify_question(demo_store, _config(seed=3), pool, provider)
        assert again["run_id"] == first["run_id"]
        assert again["fingerprint"] == first["fingerprint"]
        assert again["classes"] == first["classes"]
        runs = [r for r in demo_store.list_runs() if r["run_id"] == first["run_id"]]
        assert len(runs) == 1  # upsert, not a duplicate row

    def test_config_changes_fingerprint(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        a = classify_question(demo_store, _config(seed=3), pool, provider)
        b = classify_question(demo_store, _config(seed=4), pool, provider)
        assert a["run_id"] != b["run_id"]

    def test_projected_2d_space(self, demo_store, provider):
        pool = NonEarnestPool.from_store(demo_store)
        config = _config(seed=0, space="projected_2d", earnest_seed_count=5)
        result = classify_question(demo_store, config, pool, provider)
        texts = {u.normalized_text for u in demo_store.unique_responses("q01")}
        assert set(result["classes"]) == texts
        stored = demo_store.run_classes(result["run_id"])
        # persisted neighbor distances are measured in the 2-D layout
        dists = [
            n["distance"] for row in stored.values() for n in row["neighbors"]
        ]
        assert np.all(np.isfinite(dists))


class TestEvalSetFromLabels:
    def test_excludes_neutral_and_keys_by_hash(self, demo_store, provider):
        eval_set = eval_set_from_labels(demo_store, provider)
        assert {lv.label for lv in eval_set} == {NON_EARNEST, EARNEST}
        for lv in eval_set[:5]:
            assert lv.key == text_hash(lv.text)
        only_q1 = eval_set_from_labels(demo_store, provider, question_id="q01")
        assert len(only_q1) < len(eval_set)

    def test_no_labels_is_an_error(self, empty_store, provider):
        from eit.corpus import Question

        empty_store.add_questions([Question("q1", "t", "reflection", 1, "word_cloud")])
        with pytest.raises(DataError, match="no non-neutral"):
            eval_set_from_labels(empty_store, provider)
