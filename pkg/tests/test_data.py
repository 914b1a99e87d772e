import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spwnn.core import Activation, Hyperparams, Task, activate, init_model
from spwnn.data import (
    Dataset,
    apply_norm,
    fit_norm_stats,
    load_csv,
    normalize,
    save_csv,
    split,
    synth_classification,
    synth_regression,
    t_value_select,
    welch_t,
)
from spwnn.metrics import auc
from spwnn.parallel import predict


def two_pass_welch(values, labels):
    """Welch t from explicit two-pass means and sample variances."""
    pos = [v for v, y in zip(values, labels) if y == 1]
    neg = [v for v, y in zip(values, labels) if y == 0]
    m1, m0 = sum(pos) / len(pos), sum(neg) / len(neg)
    v1 = sum((v - m1) ** 2 for v in pos) / (len(pos) - 1)
    v0 = sum((v - m0) ** 2 for v in neg) / (len(neg) - 1)
    denom = math.sqrt(v1 / len(pos) + v0 / len(neg))
    return 0.0 if denom == 0 else (m1 - m0) / denom


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_drop_and_target(self, tmp_path):
        path = _write(tmp_path, "time,x,y\n0,1.5,2\n1,2.5,3\n")
        ds = load_csv(path, target_column=2, drop_columns=[0])
        assert ds.d == 1 and ds.feature_names == ["x"] and ds.target_name == "y"
        np.testing.assert_array_equal(ds.features[:, 0], [1.5, 2.5])

    def test_by_name(self, tmp_path):
        path = _write(tmp_path, "a,label,b\n1,0,2\n3,1,4\n")
        ds = load_csv(path, target_column="label", drop_columns=["b"])
        assert ds.feature_names == ["a"]
        np.testing.assert_array_equal(ds.target, [0, 1])

    def test_positive_label(self, tmp_path):
        path = _write(tmp_path, "f1,f2,Tissue\n1,2,Uterus\n3,4,Other\n5,6,Uterus\n")
        ds = load_csv(path, positive_label="Uterus")
        np.testing.assert_array_equal(ds.target, [1, 0, 1])

    def test_numeric_positive_label(self, tmp_path):
        path = _write(tmp_path, "f,c\n1,2\n3,1.0\n5,1\n")
        np.testing.assert_array_equal(load_csv(path, positive_label="1").target, [0, 1, 1])

    def test_rejects_malformed_row(self, tmp_path):
        path = _write(tmp_path, "a,b,y\n1,2,3\n1,oops,3\n4,5,6\n7,nan,1\n8,9\n")
        ds = load_csv(path)
        assert ds.n == 2 and ds.rejected_rows == 3

    def test_text_target_needs_label(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,cat\n2,dog\n")
        with pytest.raises(ValueError, match="positive label"):
            load_csv(path)

    def test_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "missing.csv")
        path = _write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(KeyError):
            load_csv(path, target_column="nope")
        with pytest.raises(ValueError):
            load_csv(_write(tmp_path, "a,b\nx,y\n", "bad.csv"), target_column="b", positive_label="y")
        with pytest.raises(ValueError):
            load_csv(_write(tmp_path, "", "empty.csv"))

    def test_delimiter(self, tmp_path):
        ds = load_csv(_write(tmp_path, "a;y\n1;2\n"), delimiter=";")
        assert ds.features.tolist() == [[1.0]]

    def test_save_round_trip(self, tmp_path):
        ds = synth_classification(30, 2.0, seed=4)
        save_csv(ds, tmp_path / "out.csv")
        again = load_csv(tmp_path / "out.csv")
        np.testing.assert_array_equal(again.features, ds.features)
        np.testing.assert_array_equal(again.target, ds.target)
        assert again.feature_names == ds.feature_names


def _ds(values, target=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    target = np.zeros(len(values)) if target is None else np.asarray(target, dtype=float)
    return Dataset(values, target, [f"f{i}" for i in range(values.shape[1])])


class TestNormalize:
    def test_endpoints(self):
        train, _ = normalize(_ds([0, 5, 10]), _ds([5]))
        np.testing.assert_array_equal(train.features[:, 0], [0, 0.5, 1])

    def test_constant_feature(self):
        train, test = normalize(_ds([7, 7, 7]), _ds([9]))
        assert train.features[:, 0].tolist() == [0, 0, 0]
        assert test.features[0, 0] == 0.0

    def test_extrapolates(self):
        _, test = normalize(_ds([2, 4]), _ds([0, 6]))
        np.testing.assert_array_equal(test.features[:, 0], [-1.0, 2.0])

    def test_targets(self):
        train, test = normalize(_ds([1, 2], [10, 20]), _ds([1], [15]), scale_target=True)
        np.testing.assert_array_equal(train.target, [0, 1])
        assert test.target[0] == 0.5
        untouched, _ = normalize(_ds([1, 2], [0, 1]), _ds([1], [1]))
        np.testing.assert_array_equal(untouched.target, [0, 1])

    @settings(max_examples=40)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
    def test_train_in_unit_interval_and_idempotent(self, values):
        train, _ = normalize(_ds(values), _ds(values[:1]))
        assert np.all((train.features >= 0) & (train.features <= 1))
        replay = apply_norm(_ds(values), train.norm_stats)
        np.testing.assert_array_equal(replay.features, train.features)
        twice = apply_norm(train, fit_norm_stats(train, False))
        np.testing.assert_array_equal(twice.features, train.features)


class TestSplit:
    def test_sizes(self):
        ds = _ds(np.arange(10))
        pair = split(ds, 0.8, seed=0)
        assert (pair.train.n, pair.test.n) == (8, 2)
        pair = split(_ds(np.arange(5)), 0.8, seed=0)
        assert (pair.train.n, pair.test.n) == (4, 1)

    def test_ordered(self):
        pair = split(_ds(np.arange(10)), 0.8, shuffle=False)
        assert pair.train.features[:, 0].tolist() == list(range(8))
        assert pair.test.features[:, 0].tolist() == [8, 9]

    def test_empty_side(self):
        with pytest.raises(ValueError):
            split(_ds(np.arange(2)), 0.2)
        with pytest.raises(ValueError):
            split(_ds(np.arange(5)), 1.0)

    @settings(max_examples=40)
    @given(st.integers(2, 80), st.floats(0.05, 0.95), st.integers(0, 1000))
    def test_conserves_rows(self, n, ratio, seed):
        ds = _ds(np.arange(n))
        try:
            pair = split(ds, ratio, seed)
        except ValueError:
            return
        assert pair.train.n == round(ratio * n)
        merged = np.concatenate([pair.train.features[:, 0], pair.test.features[:, 0]])
        assert Counter(merged.tolist()) == Counter(range(n))


class TestTValueSelect:
    def test_hand_computed(self):
        labels = [1, 1, 1, 0, 0, 0]
        informative = [1.01, 0.99, 1.02, 0.01, -0.02, 0.0]
        noise = [0.3, 0.7, 0.1, 0.6, 0.2, 0.5]
        # exact arithmetic with rationals
        q = [Fraction(str(v)) for v in informative]
        pos, neg = q[:3], q[3:]
        m1, m0 = sum(pos) / 3, sum(neg) / 3
        v1 = sum((v - m1) ** 2 for v in pos) / 2
        v0 = sum((v - m0) ** 2 for v in neg) / 2
        expected = float(m1 - m0) / math.sqrt(float(v1 / 3 + v0 / 3))
        ds = Dataset(np.column_stack([noise, informative]), labels, ["noise", "informative"])
        _, ranked = t_value_select(ds, 1)
        assert ranked[0][0] == "informative"
        assert ranked[0][1] == pytest.approx(expected, rel=1e-12)

    def test_identical_feature_ranked_last(self):
        rng = np.random.default_rng(0)
        labels = np.array([0, 1] * 10)
        x = rng.normal(size=(20, 3))
        x[:, 1] = 4.2
        _, ranked = t_value_select(Dataset(x, labels, ["a", "const", "c"]), 3)
        assert ranked[-1] == ("const", 0.0)

    def test_full_selection_reorders(self):
        rng = np.random.default_rng(1)
        labels = np.repeat([0, 1], 10)
        x = rng.normal(size=(20, 4))
        x[:, 2] += labels * 3
        ds = Dataset(x, labels, ["a", "b", "c", "d"])
        selected, ranked = t_value_select(ds, 4)
        assert selected.feature_names == [name for name, _ in ranked]
        assert selected.feature_names[0] == "c"
        assert sorted(selected.feature_names) == ds.feature_names

    def test_ties_keep_column_order(self):
        labels = np.array([0, 0, 1, 1])
        x = np.column_stack([np.ones(4), np.ones(4), np.ones(4)])
        _, ranked = t_value_select(Dataset(x, labels, ["a", "b", "c"]), 2)
        assert [name for name, _ in ranked] == ["a", "b", "c"]

    def test_single_class(self):
        with pytest.raises(ValueError):
            t_value_select(Dataset(np.ones((4, 2)), np.ones(4), ["a", "b"]), 1)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_two_pass_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 15))
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(2, n - 1))] = 1
        x = rng.normal(size=(n, 3)) * rng.uniform(0.1, 10, size=3)
        t = welch_t(x, labels)
        for j in range(3):
            assert abs(t[j] - two_pass_welch(x[:, j].tolist(), labels.tolist())) < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_affine_invariant_ranking(self, seed):
        rng = np.random.default_rng(seed)
        labels = rng.permutation(np.repeat([0, 1], 8))
        x = rng.normal(size=(16, 6)) + np.outer(labels, rng.uniform(0, 2, size=6))
        scale = rng.uniform(0.5, 20, size=6) * rng.choice([-1, 1], size=6)
        shift = rng.uniform(-50, 50, size=6)
        names = [f"f{i}" for i in range(6)]
        _, r1 = t_value_select(Dataset(x, labels, names), 6)
        _, r2 = t_value_select(Dataset(x * scale + shift, labels, names), 6)
        t1 = np.abs([t for _, t in r1])
        # skip instances whose |t| values are too close to order reliably
        if np.min(np.abs(np.diff(t1))) < 1e-9:
            return
        assert [n for n, _ in r1] == [n for n, _ in r2]


class TestSynth:
    def test_regression_noise_free(self):
        ds = synth_regression(100, 0.0, seed=0)
        np.testing.assert_array_equal(ds.target, activate(Activation.MORLET, ds.features[:, 0]))
        assert np.all(np.abs(ds.features) <= 3)
        assert activate(Activation.MORLET, 0.0) == 1.0

    def test_deterministic(self):
        a, b = synth_classification(50, 2.0, seed=9), synth_classification(50, 2.0, seed=9)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.target, b.target)
        a, b = synth_regression(50, 0.1, seed=9), synth_regression(50, 0.1, seed=9)
        np.testing.assert_array_equal(a.target, b.target)

    def test_balanced(self):
        ds = synth_classification(101, 3.0, seed=0)
        assert ds.d == 2 and set(ds.target.tolist()) == {0.0, 1.0}
        assert abs(ds.target.sum() - 50.5) <= 0.5

    def test_no_separation_is_chance(self):
        ds = synth_classification(20000, 0.0, seed=2)
        m = init_model(2, Hyperparams(nhn=5, seed=0), Activation.MORLET, Task.CLASSIFICATION)
        assert abs(auc(predict(m, ds.features), ds.target) - 0.5) < 0.02

    def test_min_rows(self):
        with pytest.raises(ValueError):
            synth_regression(5)
