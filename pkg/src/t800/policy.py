"""Classification policies: decision tree, linear models and the 16-16-2 MLP.

Every model exposes ``classify(x) -> int`` for a single feature vector and
``predict(X) -> ndarray`` for a batch. Labels are ``BENIGN = 0`` and
``MALICIOUS = 1``; a decision exactly on the boundary resolves to benign.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Sequence, Union

import numpy as np

from .packet import FEATURE_LEN, FEATURE_NAMES

BENIGN = 0
MALICIOUS = 1
LABEL_NAMES = {BENIGN: "benign", MALICIOUS: "malicious"}

FORMAT_VERSION = 1
LEAF = -1
INT8_MAX = 127
ACTIVATION_SCALE = 1.0 / INT8_MAX  # inputs and sigmoid outputs both lie in [0, 1]


class PolicyError(ValueError):
    pass


class DimensionMismatch(PolicyError):
    pass


class InvalidModel(PolicyError):
    pass


class UnsupportedVersion(PolicyError):
    pass


class SchemaMismatch(PolicyError):
    pass


def _check_dim(x: np.ndarray, n: int) -> None:
    if x.shape[-1] != n:
        raise DimensionMismatch(f"expected {n} features, got {x.shape[-1]}")


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# --- decision tree ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    """Array-encoded binary tree.

    Node ``k`` is internal when ``feature[k] >= 0``: it sends ``x`` left iff
    ``x[feature[k]] <= threshold[k]``. Leaves carry ``feature[k] == LEAF``
    and their class in ``value[k]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    root: int = 0
    max_depth: int = 12
    feature_len: int = FEATURE_LEN
    kind: str = field(default="dt", init=False)

    def __post_init__(self):
        object.__setattr__(self, "feature", np.asarray(self.feature, dtype=np.int64))
        object.__setattr__(self, "threshold", np.asarray(self.threshold, dtype=np.float64))
        object.__setattr__(self, "left", np.asarray(self.left, dtype=np.int64))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=np.int64))
        object.__setattr__(self, "value", np.asarray(self.value, dtype=np.int64))
        self._validate()
        # plain-list mirror: indexing Python lists is several times faster
        # than numpy scalars on the per-packet path
        object.__setattr__(
            self,
            "_nodes",
            list(zip(self.feature.tolist(), self.threshold.tolist(),
                     self.left.tolist(), self.right.tolist(), self.value.tolist())),
        )

    def _validate(self) -> None:
        n = len(self.feature)
        if n == 0:
            raise InvalidModel("empty tree")
        if not (len(self.threshold) == len(self.left) == len(self.right) == len(self.value) == n):
            raise InvalidModel("node arrays differ in length")
        if not 0 <= self.root < n:
            raise InvalidModel("root out of range")
        parents = np.zeros(n, dtype=np.int64)
        depth = {self.root: 0}
        stack = [self.root]
        while stack:
            k = stack.pop()
            f = self.feature[k]
            if f == LEAF:
                if self.value[k] not in (BENIGN, MALICIOUS):
                    raise InvalidModel(f"leaf {k} has class {self.value[k]}")
                continue
            if not 0 <= f < self.feature_len:
                raise InvalidModel(f"node {k} tests feature {f}")
            for child in (self.left[k], self.right[k]):
                if not 0 <= child < n:
                    raise InvalidModel(f"node {k} has child {child} out of range")
                parents[child] += 1
                if parents[child] > 1 or child == self.root:
                    raise InvalidModel(f"node {child} has more than one parent")
                depth[child] = depth[k] + 1
                if depth[child] > self.max_depth:
                    raise InvalidModel(f"depth exceeds max_depth={self.max_depth}")
                stack.append(child)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            k, d = stack.pop()
            best = max(best, d)
            if self.feature[k] != LEAF:
                stack.append((int(self.left[k]), d + 1))
                stack.append((int(self.right[k]), d + 1))
        return best

    def classify(self, x) -> int:
        if len(x) != self.feature_len:
            raise DimensionMismatch(f"expected {self.feature_len} features, got {len(x)}")
        nodes = self._nodes
        f, t, lo, hi, v = nodes[self.root]
        while f != LEAF:
            f, t, lo, hi, v = nodes[lo if x[f] <= t else hi]
        return v

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        _check_dim(X, self.feature_len)
        node = np.full(len(X), self.root, dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != LEAF
        while active.any():
            k = node[active]
            go_left = X[rows[active], self.feature[k]] <= self.threshold[k]
            node[active] = np.where(go_left, self.left[k], self.right[k])
            active = self.feature[node] != LEAF
        return self.value[node]

    def __eq__(self, other):
        return isinstance(other, DecisionTreeModel) and _params_equal(self, other)

    def _params(self) -> dict:
        return {
            "root": self.root,
            "max_depth": self.max_depth,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def _from_params(cls, p: dict, feature_len: int) -> "DecisionTreeModel":
        return cls(p["feature"], p["threshold"], p["left"], p["right"], p["value"],
                   root=p["root"], max_depth=p["max_depth"], feature_len=feature_len)

    @classmethod
    def leaf(cls, label: int, feature_len: int = FEATURE_LEN) -> "DecisionTreeModel":
        return cls([LEAF], [0.0], [LEAF], [LEAF], [label], max_depth=0, feature_len=feature_len)

    def scratch_bytes(self) -> int:
        return 8 * self.feature_len


# --- linear models ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearModel:
    kind: str  # "logreg" or "svm"
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        if self.kind not in ("logreg", "svm"):
            raise InvalidModel(f"unknown linear kind {self.kind!r}")
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64).ravel())
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def feature_len(self) -> int:
        return len(self.weights)

    def margin(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        _check_dim(X, self.feature_len)
        return X @ self.weights + self.bias

    def probability(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def classify(self, x) -> int:
        # sigmoid(m) > 0.5 iff m > 0, so both kinds threshold the same margin
        return MALICIOUS if self.margin(x) > 0.0 else BENIGN

    def predict(self, X) -> np.ndarray:
        return (self.margin(np.atleast_2d(X)) > 0.0).astype(np.int64)

    def __eq__(self, other):
        return isinstance(other, LinearModel) and self.kind == other.kind and _params_equal(self, other)

    def _params(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def _from_params(cls, kind: str, p: dict) -> "LinearModel":
        return cls(kind, p["weights"], p["bias"])

    def scratch_bytes(self) -> int:
        return 8 * self.feature_len + 8


# --- MLP ----------------------------------------------------------------------------

MLP_HIDDEN = (16, 16)


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Sigmoid hidden layers and a softmax output.

    ``weights[k]`` has shape ``(fan_in, fan_out)`` so a layer computes
    ``a @ W + b``.
    """

    weights: Sequence[np.ndarray]
    biases: Sequence[np.ndarray]
    kind: str = field(default="mlp", init=False)

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64).ravel() for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise InvalidModel("weights and biases differ in layer count")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or w.shape[1] != len(b):
                raise InvalidModel(f"layer {k}: weight {w.shape} vs bias {b.shape}")
            if k and ws[k - 1].shape[1] != w.shape[0]:
                raise InvalidModel(f"layer {k} input {w.shape[0]} != previous output")
        if ws[-1].shape[1] != 2:
            raise InvalidModel("output layer must have two neurons")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def feature_len(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_dims(self) -> tuple:
        return (self.feature_len,) + tuple(w.shape[1] for w in self.weights)

    def forward(self, X) -> list:
        """Activations of every layer, input first and softmax output last."""
        a = np.asarray(X, dtype=np.float64)
        _check_dim(a, self.feature_len)
        acts = [a]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = softmax(z) if k == last else sigmoid(z)
            acts.append(a)
        return acts

    def proba(self, X) -> np.ndarray:
        return self.forward(X)[-1]

    def classify(self, x) -> int:
        a = np.asarray(x, dtype=np.float64)
        _check_dim(a, self.feature_len)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = 1.0 / (1.0 + np.exp(-(a @ w + b)))
        z = a @ self.weights[-1] + self.biases[-1]
        # softmax is monotone, so comparing logits equals comparing probabilities
        return MALICIOUS if z[1] > z[0] else BENIGN

    def predict(self, X) -> np.ndarray:
        p = self.proba(np.atleast_2d(X))
        return (p[:, 1] > p[:, 0]).astype(np.int64)

    def __eq__(self, other):
        return isinstance(other, MlpModel) and _params_equal(self, other)

    def _params(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "hidden_activation": "sigmoid",
            "output_activation": "softmax",
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def _from_params(cls, p: dict) -> "MlpModel":
        return cls([np.array(w) for w in p["weights"]], [np.array(b) for b in p["biases"]])

    def scratch_bytes(self) -> int:
        return 8 * sum(self.layer_dims)


def init_mlp(n_features: int = FEATURE_LEN, hidden: Sequence[int] = MLP_HIDDEN,
             seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases, drawn from PCG64 seeded by ``seed``."""
    rng = np.random.default_rng(seed)
    dims = [n_features, *hidden, 2]
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MlpModel(ws, bs)


# --- int8 quantized MLP -------------------------------------------------------------


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int = 0


def quantize_tensor(w: np.ndarray) -> tuple[np.ndarray, QuantParams]:
    """Symmetric per-tensor int8: ``q = round(w / scale)``, ``scale = max|w| / 127``.

    An all-zero tensor has no range; it gets ``scale = 1`` and quantizes to
    zeros, which dequantize back exactly.
    """
    w = np.asarray(w, dtype=np.float64)
    amax = float(np.max(np.abs(w))) if w.size else 0.0
    scale = amax / INT8_MAX if amax > 0.0 else 1.0
    q = np.clip(np.rint(w / scale), -INT8_MAX, INT8_MAX).astype(np.int8)
    return q, QuantParams(scale, 0)


def dequantize_tensor(q: np.ndarray, p: QuantParams) -> np.ndarray:
    return (q.astype(np.float64) - p.zero_point) * p.scale


def _quantize_activation(a: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(a / ACTIVATION_SCALE), -INT8_MAX, INT8_MAX).astype(np.int32)


@dataclass(frozen=True, eq=False)
class QuantizedMlpModel:
    """Integer inference: int8 weights, int8 activations, int32 accumulators.

    Biases are stored as int32 at the accumulator scale
    ``ACTIVATION_SCALE * weight_scale`` so they add directly to the
    integer dot products.
    """

    qweights: Sequence[np.ndarray]
    qparams: Sequence[QuantParams]
    qbiases: Sequence[np.ndarray]
    kind: str = field(default="mlp_q8", init=False)

    def __post_init__(self):
        object.__setattr__(self, "qweights", tuple(np.asarray(q, dtype=np.int8) for q in self.qweights))
        object.__setattr__(self, "qbiases", tuple(np.asarray(b, dtype=np.int32) for b in self.qbiases))
        object.__setattr__(self, "qparams", tuple(self.qparams))
        if not (len(self.qweights) == len(self.qparams) == len(self.qbiases)):
            raise InvalidModel("quantized layer arrays differ in length")
        object.__setattr__(self, "_w32", tuple(q.astype(np.int32) for q in self.qweights))

    @property
    def feature_len(self) -> int:
        return self.qweights[0].shape[0]

    def logits(self, X) -> np.ndarray:
        a = np.asarray(X, dtype=np.float64)
        _check_dim(a, self.feature_len)
        last = len(self.qweights) - 1
        for k, (w, p, b) in enumerate(zip(self._w32, self.qparams, self.qbiases)):
            acc = _quantize_activation(a) @ w + b
            z = acc * (ACTIVATION_SCALE * p.scale)
            if k == last:
                return z
            a = sigmoid(z)
        raise AssertionError("unreachable")

    def classify(self, x) -> int:
        z = self.logits(x)
        return MALICIOUS if z[1] > z[0] else BENIGN

    def predict(self, X) -> np.ndarray:
        z = self.logits(np.atleast_2d(X))
        return (z[:, 1] > z[:, 0]).astype(np.int64)

    def dequantized(self) -> MlpModel:
        ws = [dequantize_tensor(q, p) for q, p in zip(self.qweights, self.qparams)]
        bs = [b * (ACTIVATION_SCALE * p.scale) for b, p in zip(self.qbiases, self.qparams)]
        return MlpModel(ws, bs)

    def __eq__(self, other):
        return isinstance(other, QuantizedMlpModel) and _params_equal(self, other)

    def _params(self) -> dict:
        return {
            "activation_scale": ACTIVATION_SCALE,
            "weights": [q.tolist() for q in self.qweights],
            "scales": [p.scale for p in self.qparams],
            "zero_points": [p.zero_point for p in self.qparams],
            "biases": [b.tolist() for b in self.qbiases],
        }

    @classmethod
    def _from_params(cls, p: dict) -> "QuantizedMlpModel":
        qp = [QuantParams(s, z) for s, z in zip(p["scales"], p["zero_points"])]
        return cls([np.array(w) for w in p["weights"]], qp, [np.array(b) for b in p["biases"]])

    def scratch_bytes(self) -> int:
        return 4 * (self.feature_len + sum(q.shape[1] for q in self.qweights))


def quantize_mlp(m: MlpModel) -> QuantizedMlpModel:
    qws, qps, qbs = [], [], []
    for w, b in zip(m.weights, m.biases):
        q, p = quantize_tensor(w)
        acc_scale = ACTIVATION_SCALE * p.scale
        qb = np.clip(np.rint(b / acc_scale), -(2**31), 2**31 - 1).astype(np.int32)
        qws.append(q)
        qps.append(p)
        qbs.append(qb)
    return QuantizedMlpModel(qws, qps, qbs)


# --- functional entry points --------------------------------------------------------

PolicyModel = Union[DecisionTreeModel, LinearModel, MlpModel, QuantizedMlpModel]


def classify_dt(m: DecisionTreeModel, x) -> int:
    return m.classify(x)


def classify_linear(m: LinearModel, x) -> int:
    return m.classify(x)


def classify_mlp(m: Union[MlpModel, QuantizedMlpModel], x) -> int:
    return m.classify(x)


def _params_equal(a, b) -> bool:
    return json.dumps(a._params(), sort_keys=True) == json.dumps(b._params(), sort_keys=True)


# --- model files ------------------------------------------------------------------

MODEL_KINDS = ("dt", "logreg", "svm", "mlp", "mlp_q8")


def model_to_dict(m: PolicyModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": m.kind,
        "feature_len": m.feature_len,
        "feature_order": list(FEATURE_NAMES[: m.feature_len])
        if m.feature_len <= FEATURE_LEN else [f"f{i}" for i in range(m.feature_len)],
        "params": m._params(),
    }


def model_from_dict(doc: dict, feature_len: int = FEATURE_LEN,
                    feature_order: Sequence[str] = FEATURE_NAMES) -> PolicyModel:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format_version {version!r}; this build reads {FORMAT_VERSION}")
    kind = doc.get("kind")
    if kind not in MODEL_KINDS:
        raise InvalidModel(f"unknown kind {kind!r}")
    if doc.get("feature_len") != feature_len:
        raise SchemaMismatch(f"model has {doc.get('feature_len')} features, engine uses {feature_len}")
    if list(doc.get("feature_order", [])) != list(feature_order):
        raise SchemaMismatch("feature_order differs from the engine's feature layout")
    p = doc["params"]
    if kind == "dt":
        m = DecisionTreeModel._from_params(p, feature_len)
    elif kind in ("logreg", "svm"):
        m = LinearModel._from_params(kind, p)
    elif kind == "mlp":
        m = MlpModel._from_params(p)
    else:
        m = QuantizedMlpModel._from_params(p)
    if m.feature_len != feature_len:
        raise SchemaMismatch(f"parameters imply {m.feature_len} features, header says {feature_len}")
    return m


def save_model(m: PolicyModel, sink: IO[str]) -> None:
    json.dump(model_to_dict(m), sink, indent=1)
    sink.write("\n")


def load_model(source: IO[str], feature_len: int = FEATURE_LEN,
               feature_order: Sequence[str] = FEATURE_NAMES) -> PolicyModel:
    try:
        doc = json.load(source)
    except json.JSONDecodeError as exc:
        raise InvalidModel(f"not a model document: {exc}") from None
    return model_from_dict(doc, feature_len, feature_order)
