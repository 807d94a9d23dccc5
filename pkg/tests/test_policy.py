import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from t800.policy import (
    BENIGN,
    LEAF,
    MALICIOUS,
    DecisionTreeModel,
    DimensionMismatch,
    InvalidModel,
    LinearModel,
    MlpModel,
    SchemaMismatch,
    UnsupportedVersion,
    classify_dt,
    classify_linear,
    classify_mlp,
    dequantize_tensor,
    init_mlp,
    load_model,
    model_to_dict,
    quantize_mlp,
    quantize_tensor,
    save_model,
)


def dt_oracle(tree, x, k=None):
    """Recursive walk over the node arrays."""
    k = tree.root if k is None else k
    if tree.feature[k] == LEAF:
        return int(tree.value[k])
    child = tree.left[k] if x[tree.feature[k]] <= tree.threshold[k] else tree.right[k]
    return dt_oracle(tree, x, child)


def random_tree(rng, depth, n_features=16):
    """Random full-ish tree built in preorder."""
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(d):
        k = len(feature)
        for arr in (feature, threshold, left, right, value):
            arr.append(0)
        if d == depth or rng.random() < 0.2:
            feature[k], value[k] = LEAF, int(rng.integers(0, 2))
            left[k] = right[k] = -1
            return k
        feature[k] = int(rng.integers(0, n_features))
        threshold[k] = float(rng.choice([0.0, 0.5, 1.0, rng.random()]))
        left[k] = grow(d + 1)
        right[k] = grow(d + 1)
        return k

    grow(0)
    return DecisionTreeModel(feature, threshold, left, right, value)


def mlp_oracle(m, x):
    """Scalar forward pass with math.exp, returning class probabilities."""
    a = list(map(float, x))
    n = len(m.weights)
    for k, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = [sum(a[i] * w[i][j] for i in range(len(a))) + b[j] for j in range(w.shape[1])]
        if k < n - 1:
            a = [1.0 / (1.0 + math.exp(-v)) for v in z]
        else:
            top = max(z)
            e = [math.exp(v - top) for v in z]
            a = [v / sum(e) for v in e]
    return a


class TestDecisionTree:
    def test_stump(self):
        t = DecisionTreeModel([9, LEAF, LEAF], [0.5, 0, 0], [1, -1, -1], [2, -1, -1], [0, BENIGN, MALICIOUS])
        syn = np.zeros(16)
        syn[9] = 1.0
        assert classify_dt(t, syn) == MALICIOUS
        assert classify_dt(t, np.zeros(16)) == BENIGN

    def test_threshold_equality_goes_left(self):
        t = DecisionTreeModel([0, LEAF, LEAF], [0.25, 0, 0], [1, -1, -1], [2, -1, -1], [0, 0, 1])
        x = np.zeros(16)
        x[0] = 0.25
        assert t.classify(x) == 0

    def test_single_leaf(self):
        assert DecisionTreeModel.leaf(MALICIOUS).classify(np.zeros(16)) == MALICIOUS

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_recursive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        t = random_tree(rng, depth=int(rng.integers(1, 13)))
        X = rng.random((200, 16))
        X[:20] = np.round(X[:20] * 2) / 2  # exercise ties on thresholds
        expected = [dt_oracle(t, x) for x in X]
        assert [t.classify(x) for x in X] == expected
        assert t.predict(X).tolist() == expected

    def test_depth_limit(self):
        rng = np.random.default_rng(1)
        t = random_tree(rng, 12)
        assert t.depth <= 12
        with pytest.raises(InvalidModel):
            DecisionTreeModel(t.feature, t.threshold, t.left, t.right, t.value, max_depth=max(0, t.depth - 1))

    @pytest.mark.parametrize("arrays", [
        ([0, LEAF], [0.5, 0], [1, -1], [1, -1], [0, 1]),          # two parents
        ([0, LEAF, LEAF], [0.5, 0, 0], [1, -1, -1], [5, -1, -1], [0, 0, 1]),  # child out of range
        ([16, LEAF, LEAF], [0.5, 0, 0], [1, -1, -1], [2, -1, -1], [0, 0, 1]),  # bad feature
        ([LEAF], [0.0], [-1], [-1], [2]),                          # bad class
        ([], [], [], [], []),
    ])
    def test_invalid_trees(self, arrays):
        with pytest.raises(InvalidModel):
            DecisionTreeModel(*arrays)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            DecisionTreeModel.leaf(0).classify(np.zeros(15))


class TestLinear:
    def test_margin_sign(self):
        m = LinearModel("logreg", np.eye(16)[0], -0.5)
        x = np.zeros(16)
        x[0] = 0.9
        assert classify_linear(m, x) == MALICIOUS
        assert classify_linear(m, np.zeros(16)) == BENIGN

    def test_tie_is_benign(self):
        for kind in ("logreg", "svm"):
            assert LinearModel(kind, np.zeros(16), 0.0).classify(np.ones(16)) == BENIGN

    def test_probability(self):
        m = LinearModel("logreg", np.zeros(16), math.log(3))
        assert m.probability(np.zeros(16)) == pytest.approx(0.75)

    def test_unknown_kind(self):
        with pytest.raises(InvalidModel):
            LinearModel("perceptron", np.zeros(16))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            LinearModel("svm", np.zeros(16)).classify(np.zeros(17))


class TestMlp:
    def test_layer_dims(self):
        assert init_mlp(seed=0).layer_dims == (16, 16, 16, 2)

    @pytest.mark.parametrize("seed", range(5))
    def test_forward_matches_scalar_oracle(self, seed):
        m = init_mlp(seed=seed)
        rng = np.random.default_rng(seed)
        for x in rng.random((10, 16)):
            np.testing.assert_allclose(m.proba(x), mlp_oracle(m, x), rtol=1e-12)

    def test_classify_agrees_with_predict(self):
        m = init_mlp(seed=4)
        X = np.random.default_rng(4).random((300, 16))
        assert [classify_mlp(m, x) for x in X] == m.predict(X).tolist()

    def test_tie_is_benign(self):
        m = MlpModel([np.zeros((16, 16)), np.zeros((16, 16)), np.zeros((16, 2))],
                     [np.zeros(16), np.zeros(16), np.zeros(2)])
        assert m.classify(np.ones(16)) == BENIGN

    def test_glorot_bounds(self):
        m = init_mlp(seed=9)
        for w in m.weights:
            assert np.abs(w).max() <= math.sqrt(6 / sum(w.shape))


class TestQuantization:
    def test_tensor_round_trip_error(self):
        w = np.random.default_rng(0).normal(size=(16, 16))
        q, p = quantize_tensor(w)
        assert q.dtype == np.int8 and np.abs(q).max() == 127
        assert np.abs(dequantize_tensor(q, p) - w).max() <= p.scale / 2 + 1e-15

    def test_all_zero_tensor(self):
        q, p = quantize_tensor(np.zeros(5))
        assert p.scale == 1.0 and not q.any()

    def test_agreement_on_high_margin_samples(self):
        agree = total = 0
        for seed in range(20):
            m = init_mlp(seed=seed)
            qm = quantize_mlp(m)
            X = np.random.default_rng(100 + seed).random((500, 16))
            z = m.forward(X)[-1]
            high = np.abs(z[:, 1] - z[:, 0]) > 0.05
            agree += int(np.sum(qm.predict(X)[high] == m.predict(X)[high]))
            total += int(high.sum())
        assert total > 1000 and agree / total >= 0.99

    def test_dequantized_is_close(self):
        m = init_mlp(seed=1)
        d = quantize_mlp(m).dequantized()
        for a, b in zip(m.weights, d.weights):
            assert np.abs(a - b).max() <= np.abs(a).max() / 127 / 2 + 1e-15


def roundtrip(m):
    buf = io.StringIO()
    save_model(m, buf)
    buf.seek(0)
    return load_model(buf)


class TestModelFiles:
    @pytest.mark.parametrize("make", [
        lambda: random_tree(np.random.default_rng(0), 6),
        lambda: LinearModel("logreg", np.arange(16) / 16, 0.3),
        lambda: LinearModel("svm", -np.arange(16) / 16, -0.3),
        lambda: init_mlp(seed=2),
        lambda: quantize_mlp(init_mlp(seed=2)),
    ])
    def test_round_trip(self, make):
        m = make()
        back = roundtrip(m)
        assert back == m and back.kind == m.kind
        X = np.random.default_rng(0).random((100, 16))
        assert back.predict(X).tolist() == m.predict(X).tolist()

    def test_header_fields(self):
        doc = model_to_dict(init_mlp(seed=0))
        assert doc["format_version"] == 1 and doc["kind"] == "mlp" and doc["feature_len"] == 16
        assert len(doc["feature_order"]) == 16

    def test_unsupported_version(self):
        doc = model_to_dict(DecisionTreeModel.leaf(0))
        doc["format_version"] = 2
        with pytest.raises(UnsupportedVersion):
            load_model(io.StringIO(json.dumps(doc)))

    def test_feature_len_mismatch(self):
        doc = model_to_dict(DecisionTreeModel.leaf(0))
        doc["feature_len"] = 15
        with pytest.raises(SchemaMismatch):
            load_model(io.StringIO(json.dumps(doc)))

    def test_feature_order_mismatch(self):
        doc = model_to_dict(DecisionTreeModel.leaf(0))
        doc["feature_order"] = doc["feature_order"][::-1]
        with pytest.raises(SchemaMismatch):
            load_model(io.StringIO(json.dumps(doc)))

    def test_garbage(self):
        with pytest.raises(InvalidModel):
            load_model(io.StringIO("not json"))


@given(st.lists(st.floats(0, 1), min_size=16, max_size=16), st.integers(0, 50))
@settings(max_examples=200, deadline=None)
def test_dt_oracle_property(x, seed):
    t = random_tree(np.random.default_rng(seed), 8)
    assert t.classify(np.array(x)) == dt_oracle(t, x)
