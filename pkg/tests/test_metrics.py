"""Ranking metrics against set-based direct formulas and hand arithmetic."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from rxml.datasets import load_toy
from rxml.errors import InvalidInput
from rxml.metrics import (
    DEFAULT_CUTOFFS,
    EvalReport,
    evaluate,
    ndcg_at_k,
    pad_ranking,
    precision_at_k,
    rank_metrics,
)
from rxml.local_embedding import AdmmConfig
from rxml.pipeline import TrainConfig, train
from rxml.rcg import RcgConfig


def oracle_precision(ranking, truth_set, k):
    return sum(1 for p in list(ranking)[:k] if p in truth_set) / k


def oracle_ndcg(ranking, truth_set, k):
    if not truth_set:
        return 0.0
    dcg = sum(
        1.0 / math.log2(pos + 2)
        for pos, p in enumerate(list(ranking)[:k])
        if p in truth_set
    )
    ideal = sum(1.0 / math.log2(pos + 2) for pos in range(min(k, len(truth_set))))
    return dcg / ideal


def truth_matrix(sets, l):
    rows = np.zeros((len(sets), l))
    for i, s in enumerate(sets):
        rows[i, list(s)] = 1.0
    return rows


class TestHandExamples:
    def test_precision_small_case(self):
        truth = truth_matrix([{1, 7}], 8)
        assert precision_at_k(np.array([7, 2, 1]), truth, 3) == pytest.approx(2 / 3)
        assert precision_at_k(np.array([7, 2, 1]), truth, 1) == 1.0

    def test_ndcg_small_case(self):
        truth = truth_matrix([{1, 7}], 8)
        # Hits at positions 1 and 3: DCG = 1 + 1/log2(4); two true labels,
        # so the ideal places them at positions 1 and 2.
        expect = (1.0 + 1.0 / math.log2(4)) / (1.0 + 1.0 / math.log2(3))
        assert ndcg_at_k(np.array([7, 2, 1]), truth, 3) == pytest.approx(
            expect, rel=1e-14
        )

    def test_short_ranking_is_padded_with_lowest_unused(self):
        # [2, 5] extends to [2, 5, 0] for k=3; the hit on label 5 sits at
        # position 2.
        truth = truth_matrix([{5}], 6)
        assert precision_at_k(np.array([2, 5]), truth, 3) == pytest.approx(1 / 3)
        assert ndcg_at_k(np.array([2, 5]), truth, 3) == pytest.approx(
            1.0 / math.log2(3), rel=1e-14
        )
        # The padding can even score: truth {0} with ranking [2, 5, 0].
        truth0 = truth_matrix([{0}], 6)
        assert precision_at_k(np.array([2, 5]), truth0, 3) == pytest.approx(1 / 3)

    def test_empty_truth_rows_count_in_the_average(self):
        truth = truth_matrix([{0}, set()], 3)
        pred = np.array([[0, 1, 2], [0, 1, 2]])
        assert precision_at_k(pred, truth, 1) == pytest.approx(0.5)
        assert ndcg_at_k(pred, truth, 2) == pytest.approx(0.5)

    def test_perfect_and_zero_rankings(self):
        truth = truth_matrix([{0, 1, 2}], 5)
        assert precision_at_k(np.array([0, 1, 2]), truth, 3) == 1.0
        assert ndcg_at_k(np.array([0, 1, 2]), truth, 3) == 1.0
        assert precision_at_k(np.array([3, 4]), truth, 2) == 0.0
        assert ndcg_at_k(np.array([3, 4]), truth, 2) == 0.0


class TestPadRanking:
    def test_pads_with_lowest_unused(self):
        np.testing.assert_array_equal(pad_ranking(np.array([3, 0]), 5, 6), [3, 0, 1, 2, 4])

    def test_truncates_long_rankings(self):
        np.testing.assert_array_equal(pad_ranking(np.array([4, 2, 0]), 2, 6), [4, 2])

    def test_empty_input(self):
        np.testing.assert_array_equal(pad_ranking(np.array([], dtype=int), 3, 4), [0, 1, 2])


class TestAgainstOracle:
    def test_random_pairs_match_direct_formulas(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            l = int(rng.integers(3, 30))
            depth = int(rng.integers(1, l + 1))
            k = int(rng.integers(1, l + 1))
            ranking = rng.permutation(l)[:depth]
            truth_set = set(
                int(j) for j in rng.choice(l, size=int(rng.integers(0, l + 1)), replace=False)
            )
            truth = truth_matrix([truth_set], l)
            padded = pad_ranking(ranking, k, l)
            assert precision_at_k(ranking, truth, k) == pytest.approx(
                oracle_precision(padded, truth_set, k), abs=1e-13
            )
            assert ndcg_at_k(ranking, truth, k) == pytest.approx(
                oracle_ndcg(padded, truth_set, k), abs=1e-13
            )

    def test_multirow_average(self):
        rng = np.random.default_rng(1)
        l, m, k = 12, 40, 4
        pred = np.stack([rng.permutation(l)[:k] for _ in range(m)])
        sets = [
            set(int(j) for j in rng.choice(l, size=int(rng.integers(0, 5)), replace=False))
            for _ in range(m)
        ]
        truth = truth_matrix(sets, l)
        expect_p = np.mean([oracle_precision(pred[i], sets[i], k) for i in range(m)])
        expect_n = np.mean([oracle_ndcg(pred[i], sets[i], k) for i in range(m)])
        assert precision_at_k(pred, truth, k) == pytest.approx(expect_p, abs=1e-13)
        assert ndcg_at_k(pred, truth, k) == pytest.approx(expect_n, abs=1e-13)


class TestValidation:
    def test_bad_cutoffs(self):
        truth = truth_matrix([{0}], 4)
        with pytest.raises(InvalidInput):
            precision_at_k(np.array([0]), truth, 0)
        with pytest.raises(InvalidInput):
            precision_at_k(np.array([0]), truth, 5)
        with pytest.raises(InvalidInput):
            ndcg_at_k(np.array([0]), truth, 9)

    def test_out_of_range_indices(self):
        truth = truth_matrix([{0}], 4)
        with pytest.raises(InvalidInput):
            precision_at_k(np.array([4]), truth, 1)
        with pytest.raises(InvalidInput):
            precision_at_k(np.array([-1]), truth, 1)

    def test_row_count_mismatch(self):
        truth = truth_matrix([{0}, {1}], 4)
        with pytest.raises(InvalidInput):
            precision_at_k(np.array([[0, 1]]), truth, 2)

    def test_non_binary_truth(self):
        with pytest.raises(InvalidInput):
            precision_at_k(np.array([0]), np.array([[0.5, 0.0]]), 1)


class TestRankMetrics:
    def test_values_cover_all_cutoffs(self):
        rng = np.random.default_rng(2)
        pred = np.stack([rng.permutation(8)[:5] for _ in range(10)])
        truth = (rng.uniform(size=(10, 8)) < 0.3).astype(float)
        report = rank_metrics(pred, truth, ks=(1, 3, 5))
        assert set(report.values) == {
            (m, k) for m in ("precision", "ndcg") for k in (1, 3, 5)
        }
        assert report.n_rows == 10

    def test_ndcg_at_1_identical_to_precision_at_1(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            pred = np.stack([rng.permutation(9)[:3] for _ in range(6)])
            truth = (rng.uniform(size=(6, 9)) < 0.4).astype(float)
            rep = rank_metrics(pred, truth, ks=(1, 3))
            assert rep.values[("ndcg", 1)] == rep.values[("precision", 1)]

    def test_empty_truth_rows_counted(self):
        truth = np.zeros((4, 5))
        truth[0, 2] = 1.0
        report = rank_metrics(np.zeros((4, 2), dtype=int), truth, ks=(2,))
        assert report.n_empty_truth == 3

    def test_rejects_empty_cutoffs(self):
        with pytest.raises(InvalidInput):
            rank_metrics(np.array([[0]]), np.array([[1.0]]), ks=())


class TestEvalReport:
    def test_csv_rendering_is_exact(self):
        report = EvalReport(
            n_rows=3,
            n_empty_truth=0,
            values={
                ("precision", 1): 0.5,
                ("precision", 3): 1 / 3,
                ("ndcg", 1): 0.5,
                ("ndcg", 3): 0.42,
            },
        )
        assert report.to_csv() == (
            "metric,k,value\n"
            "ndcg,1,0.5\n"
            "ndcg,3,0.42\n"
            "precision,1,0.5\n"
            "precision,3,0.3333333333\n"
        )

    def test_text_rendering_mentions_counts_and_timing(self):
        report = EvalReport(
            n_rows=7,
            n_empty_truth=2,
            values={("precision", 1): 1.0, ("ndcg", 1): 1.0},
            train_seconds=1.25,
            eval_seconds=0.5,
        )
        text = report.to_text()
        assert "rows=7 empty_truth=2" in text
        assert text.endswith("train_seconds=1.250 eval_seconds=0.500")


@pytest.fixture(scope="module")
def toy_model():
    train_ds = load_toy("train")
    cfg = TrainConfig(
        n_clusters=2,
        embedding_dim=4,
        num_learners=2,
        n_neighbors=5,
        seed=0,
        rcg=RcgConfig(max_iters=60),
        admm=AdmmConfig(max_iters=300),
    )
    return train(train_ds, cfg)


class TestEvaluate:
    def test_separable_data_scores_perfectly(self, toy_model):
        report = evaluate(toy_model, load_toy("test"))
        for k in DEFAULT_CUTOFFS:
            assert report.values[("precision", k)] == 1.0
            assert report.values[("ndcg", k)] == 1.0
        assert report.n_rows == 20
        assert report.eval_seconds > 0
        assert report.train_seconds == toy_model.report.wall_seconds

    def test_loaded_model_has_no_train_seconds(self, toy_model, tmp_path):
        from rxml.dataio import load_model, save_model

        save_model(toy_model, tmp_path / "m")
        loaded = load_model(tmp_path / "m")
        report = evaluate(loaded, load_toy("test"), ks=(1,))
        assert math.isnan(report.train_seconds)
        assert report.values[("precision", 1)] == 1.0

    def test_dimension_mismatch_rejected(self, toy_model):
        from rxml.dataio import SparseDataset

        test = load_toy("test")
        bad_x = SparseDataset(
            X=sp.csr_matrix((test.n, toy_model.d + 1)), Y=test.Y
        )
        with pytest.raises(InvalidInput):
            evaluate(toy_model, bad_x)
        bad_y = SparseDataset(
            X=test.X, Y=sp.csr_matrix((test.n, toy_model.l + 2))
        )
        with pytest.raises(InvalidInput):
            evaluate(toy_model, bad_y)
