import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from famseq.metrics import (
    MetricsError,
    aggregate_runs,
    compute_metrics,
    summarize_attention,
)


def tally_oracle(y_true, y_pred, K):
    """Independent per-class tally of the same conventions."""
    tp = [0] * K
    fp = [0] * K
    fn = [0] * K
    for t, p in zip(y_true, y_pred):
        if t == p:
            tp[t] += 1
        else:
            fp[p] += 1
            fn[t] += 1
    precision = [tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] else 0.0 for c in range(K)]
    recall = [tp[c] / (tp[c] + fn[c]) if tp[c] + fn[c] else 0.0 for c in range(K)]
    f1 = [2 * precision[c] * recall[c] / (precision[c] + recall[c])
          if precision[c] + recall[c] else 0.0 for c in range(K)]
    support = [tp[c] + fn[c] for c in range(K)]
    predicted = [tp[c] + fp[c] for c in range(K)]
    macro_pool = [f1[c] for c in range(K) if support[c] or predicted[c]]
    macro_f1 = sum(macro_pool) / len(macro_pool) if macro_pool else 0.0
    recalls = [recall[c] for c in range(K) if support[c]]
    balanced = sum(recalls) / len(recalls) if recalls else 0.0
    acc = sum(tp) / len(y_true) if len(y_true) else 0.0
    return acc, macro_f1, balanced, precision, recall, f1


class TestComputeMetrics:
    def test_perfect_prediction(self):
        r = compute_metrics([0, 0, 1, 1], [0, 0, 1, 1], 2)
        assert r.accuracy == 1.0
        assert r.macro_f1 == 1.0
        np.testing.assert_array_equal(r.confusion, [[2, 0], [0, 2]])

    def test_uniform_confusion(self):
        r = compute_metrics([0, 0, 1, 1], [0, 1, 0, 1], 2)
        assert r.accuracy == 0.5
        np.testing.assert_allclose(r.f1, [0.5, 0.5])
        assert r.macro_f1 == 0.5

    def test_all_predicted_one_class(self):
        r = compute_metrics([0, 1], [0, 0], 2)
        np.testing.assert_allclose(r.f1, [2 / 3, 0.0])
        assert r.macro_f1 == pytest.approx(1 / 3)
        np.testing.assert_allclose(r.recall, [1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            compute_metrics([0, 1], [0], 2)

    def test_zero_support_unpredicted_class_excluded(self):
        # class 2 never occurs and is never predicted: excluded from macro
        r = compute_metrics([0, 1], [0, 1], 3)
        assert r.macro_f1 == 1.0

    def test_zero_support_predicted_class_counts_as_zero(self):
        r = compute_metrics([0, 0], [0, 1], 2)
        # class 1: predicted but support 0 -> F1 = 0 enters the macro mean
        assert r.macro_f1 == pytest.approx((2 / 3) / 2)

    @given(st.integers(2, 5), st.integers(1, 50), st.integers(0, 10 ** 6))
    @settings(max_examples=200, deadline=None)
    def test_matches_tally_oracle(self, K, n, seed):
        rng = np.random.default_rng(seed)
        y_true = rng.integers(0, K, size=n)
        y_pred = rng.integers(0, K, size=n)
        r = compute_metrics(y_true, y_pred, K)
        acc, macro, balanced, prec, rec, f1 = tally_oracle(y_true, y_pred, K)
        assert r.accuracy == acc
        assert r.macro_f1 == macro
        assert r.balanced_accuracy == balanced
        np.testing.assert_array_equal(r.precision, prec)
        np.testing.assert_array_equal(r.recall, rec)
        np.testing.assert_array_equal(r.f1, f1)

    def test_balanced_accuracy_is_macro_recall(self):
        rng = np.random.default_rng(0)
        y_true = rng.integers(0, 4, size=100)
        y_pred = rng.integers(0, 4, size=100)
        r = compute_metrics(y_true, y_pred, 4)
        assert r.balanced_accuracy == r.recall[r.support > 0].mean()

    def test_confusion_row_sums_are_supports(self):
        rng = np.random.default_rng(1)
        y_true = rng.integers(0, 3, size=60)
        y_pred = rng.integers(0, 3, size=60)
        r = compute_metrics(y_true, y_pred, 3)
        np.testing.assert_array_equal(r.confusion.sum(axis=1), r.support)
        assert r.accuracy == np.trace(r.confusion) / 60


class TestAggregateRuns:
    def test_single_run_std_zero(self):
        agg = aggregate_runs([_fixed_report(0.7)])
        assert agg.std["macro_f1"] == 0.0
        assert agg.n_runs == 1

    def test_mean_and_sample_std(self):
        agg = aggregate_runs([_fixed_report(0.6), _fixed_report(0.8)])
        assert agg.mean["macro_f1"] == pytest.approx(0.7)
        assert agg.std["macro_f1"] == pytest.approx(0.14142135623730956)
        assert agg.formatted("macro_f1") == "0.7000 ± 0.1414"

    def test_order_invariant(self):
        rs = [_fixed_report(v) for v in (0.5, 0.9, 0.7)]
        a = aggregate_runs(rs)
        b = aggregate_runs(rs[::-1])
        for key in a.mean:
            assert a.mean[key] == pytest.approx(b.mean[key], abs=1e-12)
            assert a.std[key] == pytest.approx(b.std[key], abs=1e-12)


def _fixed_report(macro_f1):
    from famseq.metrics import MetricsReport
    return MetricsReport(accuracy=macro_f1, macro_f1=macro_f1,
                         balanced_accuracy=macro_f1,
                         precision=np.zeros(2), recall=np.zeros(2),
                         f1=np.zeros(2), support=np.array([1, 1]),
                         confusion=np.eye(2, dtype=np.int64))


class TestSummarizeAttention:
    def test_single_run_equals_class_means(self):
        rng = np.random.default_rng(0)
        w = rng.dirichlet(np.ones(12), size=10)
        labels = np.array([0] * 6 + [1] * 4)
        s = summarize_attention([(w, labels)], ["a", "b"])
        np.testing.assert_allclose(s.mean_weights[0], w[:6].mean(axis=0))
        np.testing.assert_allclose(s.mean_weights[1], w[6:].mean(axis=0))

    def test_count_weighted_combination(self):
        w1 = np.full((10, 12), 1 / 12)
        w1[:, 0] = 0.2
        w1 /= w1.sum(axis=1, keepdims=True)
        w2 = np.full((30, 12), 1 / 12)
        w2[:, 0] = 0.4
        w2 /= w2.sum(axis=1, keepdims=True)
        s = summarize_attention(
            [(w1, np.zeros(10, dtype=int)), (w2, np.zeros(30, dtype=int))], ["a"])
        m1, m2 = w1[0, 0], w2[0, 0]
        expect = (10 * m1 + 30 * m2) / 40
        # renormalization preserves the count-weighted mean up to row scaling
        raw = (10 * w1[0] + 30 * w2[0]) / 40
        np.testing.assert_allclose(s.mean_weights[0], raw / raw.sum())
        assert s.mean_weights[0, 0] == pytest.approx(expect, rel=1e-9)

    def test_uniform_model(self):
        w = np.full((5, 12), 1 / 12)
        s = summarize_attention([(w, np.zeros(5, dtype=int))], ["a"])
        np.testing.assert_allclose(s.mean_weights[0], 1 / 12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        tables = [(rng.dirichlet(np.ones(12), size=8),
                   rng.integers(0, 3, size=8)) for _ in range(4)]
        s = summarize_attention(tables, ["a", "b", "c"])
        for c in range(3):
            if s.present(c):
                assert abs(s.mean_weights[c].sum() - 1.0) <= 1e-6

    def test_absent_class_flagged(self):
        w = np.full((4, 12), 1 / 12)
        s = summarize_attention([(w, np.zeros(4, dtype=int))], ["a", "b"])
        assert s.present(0)
        assert not s.present(1)
        assert np.isnan(s.mean_weights[1]).all()
