import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from famseq.sampling import (
    SplitError,
    smote_oversample,
    stratified_holdout,
    stratified_kfold,
)


class TestHoldout:
    def test_exact_ratios(self):
        plan = stratified_holdout(np.zeros(10, dtype=int), seed=1)
        assert len(plan.indices("train")) == 6
        assert len(plan.indices("val")) == 2
        assert len(plan.indices("test")) == 2

    def test_largest_remainder_two_classes_of_five(self):
        y = np.array([0] * 5 + [1] * 5)
        plan = stratified_holdout(y, seed=2)
        for c in (0, 1):
            cls = np.flatnonzero(y == c)
            counts = [len(np.intersect1d(plan.indices(p), cls))
                      for p in ("train", "val", "test")]
            assert counts == [3, 1, 1]

    def test_deterministic(self):
        y = np.random.default_rng(0).integers(0, 3, size=60)
        a = stratified_holdout(y, seed=9)
        b = stratified_holdout(y, seed=9)
        assert a.assignments == b.assignments

    def test_small_class_rejected(self):
        y = np.array([0, 0, 0, 1, 1])
        with pytest.raises(SplitError, match="class 1"):
            stratified_holdout(y, seed=0)

    @given(st.lists(st.integers(0, 3), min_size=20, max_size=120),
           st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_proportionality_within_one(self, labels, seed):
        y = np.asarray(labels)
        _, counts = np.unique(y, return_counts=True)
        if counts.min() < 3:
            return
        plan = stratified_holdout(y, seed=seed)
        parts = [plan.indices(p) for p in ("train", "val", "test")]
        assert sum(len(p) for p in parts) == len(y)
        for c in np.unique(y):
            n_c = (y == c).sum()
            for part, ratio in zip(parts, (0.6, 0.2, 0.2)):
                got = (y[part] == c).sum()
                assert abs(got - n_c * ratio) < 1.0 + 1e-9


class TestKFold:
    def test_one_per_class_per_fold(self):
        y = np.repeat(np.arange(5), 5)
        plan = stratified_kfold(y, k=5, seed=0)
        for fold in range(5):
            idx = plan.indices(fold)
            assert sorted(y[idx]) == [0, 1, 2, 3, 4]

    def test_class_of_seven(self):
        y = np.array([0] * 7 + [1] * 10)
        plan = stratified_kfold(y, k=5, seed=1)
        counts = sorted(((y[plan.indices(f)] == 0).sum() for f in range(5)),
                        reverse=True)
        assert counts == [2, 2, 1, 1, 1]

    def test_union_is_everything(self):
        y = np.random.default_rng(3).integers(0, 3, size=40)
        if np.bincount(y).min() < 5:
            y = np.concatenate([y, np.arange(3).repeat(5)])
        plan = stratified_kfold(y, k=5, seed=4)
        union = np.concatenate([plan.indices(f) for f in range(5)])
        assert sorted(union) == list(range(len(y)))

    def test_class_smaller_than_k_rejected(self):
        y = np.array([0] * 10 + [1] * 3)
        with pytest.raises(SplitError):
            stratified_kfold(y, k=5, seed=0)


class TestSmote:
    def test_balanced_input_unchanged(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((20, 4))
        y = np.repeat([0, 1], 10)
        Xa, ya = smote_oversample(X, y, seed=1)
        np.testing.assert_array_equal(Xa, X)
        np.testing.assert_array_equal(ya, y)

    def test_two_point_class_on_segment(self):
        a, b = np.array([0.0, 0.0]), np.array([2.0, 2.0])
        X = np.vstack([a, b] + [np.array([10.0, i]) for i in range(8)])
        y = np.array([0, 0] + [1] * 8)
        Xa, ya = smote_oversample(X, y, seed=2)
        assert (ya == 0).sum() == 8
        synth = Xa[10:]
        for s in synth:
            # on segment [a, b]: s = a + u (b - a)
            u = (s - a) / (b - a)
            assert np.allclose(u, u[0]) and 0.0 <= u[0] <= 1.0

    def test_originals_preserved_and_counts_balanced(self):
        rng = np.random.default_rng(5)
        X = np.vstack([rng.normal(0, 1, (30, 3)), rng.normal(5, 1, (7, 3)),
                       rng.normal(-5, 1, (12, 3))])
        y = np.array([0] * 30 + [1] * 7 + [2] * 12)
        Xa, ya = smote_oversample(X, y, seed=6)
        np.testing.assert_array_equal(Xa[:49], X)
        assert np.bincount(ya).tolist() == [30, 30, 30]

    def test_synthetic_points_on_neighbor_segments(self):
        # exhaustive oracle: each synthetic point must lie on a segment from
        # some class member to one of its k nearest same-class neighbors
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal(0, 1, (60, 3)), rng.normal(4, 1, (15, 3)),
                       rng.normal(-4, 1, (25, 3))])
        y = np.array([0] * 60 + [1] * 15 + [2] * 25)
        k = 5
        Xa, ya = smote_oversample(X, y, k_neighbors=k, seed=8)
        for s, c in zip(Xa[len(X):], ya[len(X):]):
            Xc = X[y == c]
            found = False
            for i in range(len(Xc)):
                d = np.linalg.norm(Xc - Xc[i], axis=1)
                d[i] = np.inf
                for j in np.argsort(d)[:k]:
                    seg = Xc[j] - Xc[i]
                    denom = seg @ seg
                    if denom == 0:
                        continue
                    u = (s - Xc[i]) @ seg / denom
                    if -1e-9 <= u <= 1 + 1e-9 and np.allclose(
                            s, Xc[i] + u * seg, atol=1e-9):
                        found = True
                        break
                if found:
                    break
            assert found

    def test_singleton_class_rejected(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([0, 0, 1])
        with pytest.raises(SplitError, match="single sample"):
            smote_oversample(X, y, seed=0)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((30, 2))
        y = np.array([0] * 20 + [1] * 10)
        a = smote_oversample(X, y, seed=3)
        b = smote_oversample(X, y, seed=3)
        np.testing.assert_array_equal(a[0], b[0])


def test_splitplan_json(tmp_path):
    y = np.array([0] * 6 + [1] * 6)
    plan = stratified_holdout(y, seed=0)
    d = plan.to_json(cell_ids=[f"c{i}" for i in range(12)])
    assert d["kind"] == "Holdout"
    assert set(d["assignments"].values()) <= {"train", "val", "test"}
    plan.save(tmp_path / "plan.json", cell_ids=[f"c{i}" for i in range(12)])
    assert (tmp_path / "plan.json").exists()
