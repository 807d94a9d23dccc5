"""Training and evaluation for the four policy families."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Optional, Sequence

import numpy as np

from .packet import FEATURE_LEN, FEATURE_NAMES
from .policy import (
    BENIGN,
    LEAF,
    MALICIOUS,
    DecisionTreeModel,
    LinearModel,
    MlpModel,
    PolicyModel,
    init_mlp,
    sigmoid,
    softmax,
)

PROVENANCES = ("synthetic-benign", "synthetic-scan", "pcap-import")

DEFAULT_MIN_LEAF = 5
DEFAULT_SVM = dict(epochs=200, lr=1e-3, c=1.0)
DEFAULT_LOGISTIC = dict(epochs=200, lr=0.1)
DEFAULT_MLP = dict(epochs=2000, lr=1e-5, batch_size=260)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class TrainingError(ValueError):
    pass


class NonFiniteLoss(TrainingError):
    """Raised when a loss turns NaN/inf; ``last_model`` holds the last finite parameters."""

    def __init__(self, message: str, last_model=None, epoch: int = -1):
        super().__init__(message)
        self.last_model = last_model
        self.epoch = epoch


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    provenance: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, FEATURE_LEN)
        y = np.asarray(self.y, dtype=np.int64).ravel()
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError(f"X {X.shape} and y {y.shape} disagree")
        if y.size and not np.isin(y, (BENIGN, MALICIOUS)).all():
            raise ValueError("labels must be 0 (benign) or 1 (malicious)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.provenance is not None:
            prov = np.asarray(self.provenance, dtype=object)
            if len(prov) != len(y):
                raise ValueError("provenance length differs from sample count")
            object.__setattr__(self, "provenance", prov)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        prov = None if self.provenance is None else self.provenance[idx]
        return LabeledDataset(self.X[idx], self.y[idx], prov)

    def counts(self) -> tuple[int, int]:
        return int((self.y == BENIGN).sum()), int((self.y == MALICIOUS).sum())


def salting_merge(benign: LabeledDataset, malicious: LabeledDataset, seed: int = 0) -> LabeledDataset:
    """Merge two datasets into one seeded random interleaving, every sample exactly once."""
    if len(benign) and len(malicious) and benign.n_features != malicious.n_features:
        raise ValueError("feature lengths disagree")
    parts = [d for d in (benign, malicious) if len(d)] or [benign]
    X = np.concatenate([d.X for d in parts])
    y = np.concatenate([d.y for d in parts])
    if all(d.provenance is not None for d in parts):
        prov = np.concatenate([d.provenance for d in parts])
    else:
        prov = None
    order = np.random.default_rng(seed).permutation(len(y))
    return LabeledDataset(X[order], y[order], None if prov is None else prov[order])


def stratified_split(d: LabeledDataset, train_fraction: float = 0.7, seed: int = 0):
    """Seeded per-class split; returns ``(train, test)``."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in (BENIGN, MALICIOUS):
        idx = np.flatnonzero(d.y == label)
        idx = idx[rng.permutation(len(idx))]
        cut = int(round(train_fraction * len(idx)))
        train_idx.append(idx[:cut])
        test_idx.append(idx[cut:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return d.subset(tr), d.subset(te)


# --- dataset files -------------------------------------------------------------


def write_dataset_csv(d: LabeledDataset, sink: IO[str],
                      feature_order: Sequence[str] = FEATURE_NAMES) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow([*feature_order, "label"])
    for row, label in zip(d.X.tolist(), d.y.tolist()):
        w.writerow([repr(v) for v in row] + [label])


def read_dataset_csv(source: IO[str], feature_order: Sequence[str] = FEATURE_NAMES) -> LabeledDataset:
    r = csv.reader(source)
    header = next(r, None)
    if header is None:
        raise ValueError("dataset file is empty (header row is mandatory)")
    if header != [*feature_order, "label"]:
        raise ValueError(f"dataset header does not match feature order: {header}")
    X, y = [], []
    for lineno, row in enumerate(r, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: {len(row)} columns, expected {len(header)}")
        try:
            X.append([float(v) for v in row[:-1]])
            y.append(int(row[-1]))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    X = np.array(X, dtype=np.float64).reshape(len(y), len(feature_order))
    return LabeledDataset(X, np.array(y, dtype=np.int64))


# --- decision tree ----------------------------------------------------------------


def entropy(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy (bits) of class-count rows; ``counts[..., c]`` is class ``c``."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, counts / n, 0.0)
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=-1)


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int = 1):
    """Best (feature, threshold, gain) by information gain, or ``None``.

    Candidate thresholds are midpoints between consecutive distinct values;
    a split is admissible when both children keep at least ``min_leaf``
    samples. Ties go to the lowest feature index, then the lowest threshold.
    """
    n = len(y)
    parent = entropy(np.bincount(y, minlength=2))
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        # boundaries: positions i where xs[i-1] < xs[i], left child = [:i]
        cut = np.flatnonzero(xs[1:] > xs[:-1]) + 1
        if cut.size == 0:
            continue
        cut = cut[(cut >= min_leaf) & (n - cut >= min_leaf)]
        if cut.size == 0:
            continue
        mal_left = np.cumsum(ys)[cut - 1]
        left = np.stack([cut - mal_left, mal_left], axis=1)
        right = np.bincount(y, minlength=2) - left
        child = (cut * entropy(left) + (n - cut) * entropy(right)) / n
        gain = parent - child
        k = int(np.argmax(gain))
        g = float(gain[k])
        if best is None or g > best[2] + 1e-12:
            thr = 0.5 * (xs[cut[k] - 1] + xs[cut[k]])
            best = (f, float(thr), max(g, 0.0))
    return best


def train_dt(d: LabeledDataset, max_depth: int = 12, min_leaf: int = DEFAULT_MIN_LEAF) -> DecisionTreeModel:
    """Greedy top-down induction with the entropy criterion.

    A node becomes a leaf when it is pure, at ``max_depth``, or has no
    admissible split. A single-class dataset yields a single leaf.
    Leaves take the majority class; ties resolve to benign.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if len(d) == 0:
        raise TrainingError("cannot train on an empty dataset")
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node() -> int:
        for arr in (feature, left, right, value):
            arr.append(LEAF)
        threshold.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(d)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = d.y[idx]
        n_mal = int(ys.sum())
        value[node] = MALICIOUS if n_mal > len(ys) - n_mal else BENIGN
        if depth >= max_depth or n_mal in (0, len(ys)):
            continue
        split = best_split(d.X[idx], ys, min_leaf)
        if split is None:
            continue
        f, thr, _gain = split
        go_left = d.X[idx, f] <= thr
        lo, hi = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, lo, hi
        stack.append((hi, idx[~go_left], depth + 1))
        stack.append((lo, idx[go_left], depth + 1))
    return DecisionTreeModel(feature, threshold, left, right, value,
                             root=root, max_depth=max_depth, feature_len=d.n_features)


# --- linear models -------------------------------------------------------------


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def logistic_loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy and its gradient."""
    z = X @ w + b
    # log(1 + e^z) - y z, evaluated stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    r = sigmoid(z) - y
    return loss, X.T @ r / len(y), float(r.mean())


def train_logistic(d: LabeledDataset, epochs: int = DEFAULT_LOGISTIC["epochs"],
                   lr: float = DEFAULT_LOGISTIC["lr"], batch_size: int = 260,
                   seed: int = 0) -> LinearModel:
    if epochs < 0 or lr < 0:
        raise ValueError("epochs must be >= 0 and lr >= 0")
    rng = np.random.default_rng(seed)
    w = np.zeros(d.n_features)
    b = 0.0
    for epoch in range(epochs):
        for batch in _minibatches(len(d), batch_size, rng):
            loss, gw, gb = logistic_loss_and_grad(w, b, d.X[batch], d.y[batch])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"logistic loss diverged at epoch {epoch}",
                                    LinearModel("logreg", w, b), epoch)
            w = w - lr * gw
            b = b - lr * gb
    return LinearModel("logreg", w, b)


def svm_objective_and_subgrad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float):
    """``0.5 |w|^2 + c * mean(hinge)`` with labels mapped to {-1, +1}."""
    s = 2.0 * y - 1.0
    margin = s * (X @ w + b)
    active = margin < 1.0
    loss = 0.5 * float(w @ w) + c * float(np.mean(np.maximum(0.0, 1.0 - margin)))
    gw = w - c * (X[active].T @ s[active]) / len(y)
    gb = -c * float(s[active].sum()) / len(y)
    return loss, gw, gb


def train_svm(d: LabeledDataset, epochs: int = DEFAULT_SVM["epochs"], lr: float = DEFAULT_SVM["lr"],
              c: float = DEFAULT_SVM["c"], batch_size: int = 260, seed: int = 0) -> LinearModel:
    if epochs < 0 or lr < 0:
        raise ValueError("epochs must be >= 0 and lr >= 0")
    rng = np.random.default_rng(seed)
    w = np.zeros(d.n_features)
    b = 0.0
    for epoch in range(epochs):
        for batch in _minibatches(len(d), batch_size, rng):
            loss, gw, gb = svm_objective_and_subgrad(w, b, d.X[batch], d.y[batch], c)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"svm objective diverged at epoch {epoch}",
                                    LinearModel("svm", w, b), epoch)
            w = w - lr * gw
            b = b - lr * gb
    return LinearModel("svm", w, b)


# --- MLP --------------------------------------------------------------------------


def mlp_loss_and_grads(m: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and its gradients by backpropagation.

    Returns ``(loss, weight_grads, bias_grads)`` aligned with ``m.weights``.
    """
    acts = m.forward(X)
    p = acts[-1]
    n = len(y)
    loss = float(-np.mean(np.log(np.clip(p[np.arange(n), y], 1e-300, None))))
    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gws = [None] * len(m.weights)
    gbs = [None] * len(m.weights)
    for k in range(len(m.weights) - 1, -1, -1):
        gws[k] = acts[k].T @ delta
        gbs[k] = delta.sum(axis=0)
        if k:
            a = acts[k]
            delta = (delta @ m.weights[k].T) * a * (1.0 - a)
    return loss, gws, gbs


class Adam:
    def __init__(self, shapes, lr: float, betas=ADAM_BETAS, eps: float = ADAM_EPS):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list, grads: list) -> list:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        out = []
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            out.append(p - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps))
        return out


def train_mlp(d: LabeledDataset, epochs: int = DEFAULT_MLP["epochs"], lr: float = DEFAULT_MLP["lr"],
              batch_size: int = DEFAULT_MLP["batch_size"], seed: int = 0) -> MlpModel:
    """Mini-batch Adam on softmax cross-entropy for a [n, 16, 16, 2] network."""
    if epochs < 0 or lr < 0 or batch_size < 1:
        raise ValueError("epochs >= 0, lr >= 0 and batch_size >= 1 required")
    model = init_mlp(d.n_features, seed=seed)
    if epochs == 0 or len(d) == 0:
        return model
    rng = np.random.default_rng(seed + 1)
    n_layers = len(model.weights)
    params = list(model.weights) + list(model.biases)
    opt = Adam([p.shape for p in params], lr)
    for epoch in range(epochs):
        for batch in _minibatches(len(d), batch_size, rng):
            loss, gws, gbs = mlp_loss_and_grads(model, d.X[batch], d.y[batch])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"mlp loss diverged at epoch {epoch}", model, epoch)
            params = opt.step(params, gws + gbs)
            model = MlpModel(params[:n_layers], params[n_layers:])
    return model


# --- evaluation -------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Binary metrics with malicious as the positive class.

    ``confusion[true][pred]``, so ``confusion[1][1]`` is TP and
    ``confusion[0][1]`` is FP.
    """

    confusion: tuple
    precision: float
    recall: float
    f1: float
    accuracy: float

    @property
    def tp(self) -> int:
        return self.confusion[1][1]

    @property
    def fp(self) -> int:
        return self.confusion[0][1]

    @property
    def fn(self) -> int:
        return self.confusion[1][0]

    @property
    def tn(self) -> int:
        return self.confusion[0][0]

    @classmethod
    def from_confusion(cls, tn: int, fp: int, fn: int, tp: int) -> "EvalReport":
        total = tn + fp + fn + tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        accuracy = (tp + tn) / total if total else 0.0
        return cls(((tn, fp), (fn, tp)), precision, recall, f1, accuracy)

    def as_dict(self) -> dict:
        return {
            "tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp,
            "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "accuracy": self.accuracy,
        }


def evaluate(m: PolicyModel, d: LabeledDataset) -> EvalReport:
    pred = m.predict(d.X) if len(d) else np.zeros(0, dtype=np.int64)
    return confusion_report(d.y, pred)


def confusion_report(y_true, y_pred) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    return EvalReport.from_confusion(tn, fp, fn, tp)
