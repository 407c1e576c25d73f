"""The four reference classifiers, implemented on numpy.

Every model exposes ``predict_proba(X)`` returning the positive-class
probability for each row. Models are plain dataclasses so they serialize to
JSON without pickling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np


class TrainingError(ValueError):
    pass


class ModelKind(str, Enum):
    LR = "LR"
    KN = "KN"
    DT = "DT"
    NB = "NB"


DEFAULT_HYPERPARAMS: dict[ModelKind, dict[str, Any]] = {
    ModelKind.LR: {"l2": 1.0, "tol": 1e-6, "max_iter": 1000},
    ModelKind.KN: {"k": 5},
    ModelKind.DT: {"max_depth": None, "min_samples_leaf": 1},
    ModelKind.NB: {"var_floor": 1e-9},
}


@dataclass(frozen=True)
class PredictionRecord:
    p_hat: float
    group: int
    y_true: int
    y_pred: int


def make_records(p_hat, groups, y_true, t: float = 0.5) -> list[PredictionRecord]:
    p_hat = np.asarray(p_hat, dtype=float)
    y_pred = (p_hat >= t).astype(int)
    return [
        PredictionRecord(float(p), int(g), int(y), int(yp))
        for p, g, y, yp in zip(p_hat, groups, y_true, y_pred)
    ]


def _sigmoid(z):
    # split on sign to avoid overflow in exp
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class TrainedModel:
    kind: ModelKind
    hyperparams: dict
    feature_names: list[str]
    params: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features ({', '.join(self.feature_names)}), got shape {X.shape}"
            )
        return X

    def predict_proba(self, X) -> np.ndarray:
        X = self._check(X)
        fn = _PREDICTORS[self.kind]
        return np.clip(fn(self, X), 0.0, 1.0)

    def predict(self, X, t: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= t).astype(int)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "hyperparams": self.hyperparams,
            "feature_names": list(self.feature_names),
            "seed": self.seed,
            "params": _jsonable(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        kind = ModelKind(data["kind"])
        params = {k: (np.asarray(v) if isinstance(v, list) else v) for k, v in data["params"].items()}
        return cls(kind, dict(data["hyperparams"]), list(data["feature_names"]), params, data.get("seed", 0))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# -- logistic regression ---------------------------------------------------


def _fit_lr(X, y, hp, rng):
    """Full-batch gradient descent on mean log-loss + l2/(2n) * ||w||^2.

    The intercept is not penalized. The step is 1/L with L the Lipschitz
    constant of the gradient, which guarantees monotone descent.
    """
    n, p = X.shape
    lam = float(hp["l2"]) / n
    Xa = np.hstack([X, np.ones((n, 1))])
    L = 0.25 * np.linalg.norm(Xa, 2) ** 2 / n + lam
    lr = 1.0 / L
    w = np.zeros(p + 1)
    mask = np.r_[np.ones(p), 0.0]
    n_iter = 0
    for n_iter in range(1, int(hp["max_iter"]) + 1):
        grad = Xa.T @ (_sigmoid(Xa @ w) - y) / n + lam * mask * w
        w -= lr * grad
        if np.max(np.abs(grad)) < hp["tol"]:
            break
    return {"coef": w[:p], "intercept": float(w[p]), "n_iter": n_iter}


def _proba_lr(m, X):
    return _sigmoid(X @ np.asarray(m.params["coef"], dtype=float) + m.params["intercept"])


# -- k nearest neighbors ---------------------------------------------------


def _fit_kn(X, y, hp, rng):
    k = int(hp["k"])
    if k < 1:
        raise TrainingError("k must be at least 1")
    if k > len(y):
        raise TrainingError(f"k={k} exceeds the {len(y)} training rows")
    return {"X": X.copy(), "y": y.astype(int)}


def _proba_kn(m, X, chunk=64):
    Xt = np.asarray(m.params["X"], dtype=float)
    yt = np.asarray(m.params["y"], dtype=float)
    k = int(m.hyperparams["k"])
    out = np.empty(len(X))
    for start in range(0, len(X), chunk):
        q = X[start:start + chunk]
        # direct squared differences so equal distances compare equal
        d = ((q[:, None, :] - Xt[None, :, :]) ** 2).sum(axis=2)
        # stable sort: equal distances keep the lowest training index first
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
        out[start:start + chunk] = yt[nn].sum(axis=1) / k
    return out


# -- decision tree ---------------------------------------------------------


def _gini_from_counts(pos, n):
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(X, y, min_leaf):
    """Lowest weighted Gini over all (feature, midpoint threshold) pairs.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    n, p = X.shape
    best = (np.inf, -1, 0.0)
    total_pos = y.sum()
    for j in range(p):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        cut = np.nonzero(xs[1:] != xs[:-1])[0]  # split after position cut
        if cut.size == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        cut, n_left, n_right = cut[ok], n_left[ok], n_right[ok]
        pos_left = np.cumsum(ys)[cut]
        pos_right = total_pos - pos_left
        imp = (n_left * _gini_from_counts(pos_left, n_left)
               + n_right * _gini_from_counts(pos_right, n_right)) / n
        i = int(np.argmin(imp))
        if imp[i] < best[0]:
            lo, hi = xs[cut[i]], xs[cut[i] + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (float(imp[i]), j, float(thr))
    return best


def _fit_dt(X, y, hp, rng):
    max_depth = hp.get("max_depth")
    min_leaf = int(hp.get("min_samples_leaf", 1))
    # flat arrays: feature (-1 for leaf), threshold, left, right, value (positive fraction), n
    feature, threshold, left, right, value, size = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        size.append(int(idx.size))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        pos = yn.sum()
        if pos == 0 or pos == idx.size or idx.size < 2 * min_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        # zero-gain splits are allowed (as for XOR-like structure at the root)
        _, j, thr = _best_split(X[idx], yn, min_leaf)
        if j < 0:
            continue
        go_left = X[idx, j] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = j, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return {
        "feature": np.asarray(feature, dtype=int),
        "threshold": np.asarray(threshold, dtype=float),
        "left": np.asarray(left, dtype=int),
        "right": np.asarray(right, dtype=int),
        "value": np.asarray(value, dtype=float),
        "n_node_samples": np.asarray(size, dtype=int),
    }


def _proba_dt(m, X):
    feat = np.asarray(m.params["feature"], dtype=int)
    thr = np.asarray(m.params["threshold"], dtype=float)
    left = np.asarray(m.params["left"], dtype=int)
    right = np.asarray(m.params["right"], dtype=int)
    value = np.asarray(m.params["value"], dtype=float)
    node = np.zeros(len(X), dtype=int)
    active = feat[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        nd = node[rows]
        go_left = X[rows, feat[nd]] <= thr[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])
        active = feat[node] >= 0
    return value[node]


# -- gaussian naive bayes ----------------------------------------------------


def _fit_nb(X, y, hp, rng):
    floor = float(hp["var_floor"])
    mean, var, prior = [], [], []
    for c in (0, 1):
        Xc = X[y == c]
        mean.append(Xc.mean(axis=0))
        var.append(np.maximum(Xc.var(axis=0), floor))
        prior.append(len(Xc) / len(y))
    return {"mean": np.asarray(mean), "var": np.asarray(var), "prior": np.asarray(prior)}


def _proba_nb(m, X):
    mean = np.asarray(m.params["mean"], dtype=float)
    var = np.asarray(m.params["var"], dtype=float)
    prior = np.asarray(m.params["prior"], dtype=float)
    ll = []
    for c in (0, 1):
        z = -0.5 * (np.log(2.0 * np.pi * var[c]) + (X - mean[c]) ** 2 / var[c])
        ll.append(np.log(prior[c]) + z.sum(axis=1))
    # posterior of class 1 = sigmoid(log-odds); equal log-posteriors give exactly 0.5
    return _sigmoid(ll[1] - ll[0])


_FITTERS = {ModelKind.LR: _fit_lr, ModelKind.KN: _fit_kn, ModelKind.DT: _fit_dt, ModelKind.NB: _fit_nb}
_PREDICTORS = {ModelKind.LR: _proba_lr, ModelKind.KN: _proba_kn, ModelKind.DT: _proba_dt, ModelKind.NB: _proba_nb}


def train(kind, X, y, hyperparams: dict | None = None, seed: int = 0,
          feature_names: Sequence[str] | None = None) -> TrainedModel:
    """Fit a model of ``kind`` ('LR', 'KN', 'DT' or 'NB') on ``X``, ``y``.

    ``X`` may also be a Dataset, in which case ``y`` is ignored if None and
    feature names are taken from it.
    """
    kind = ModelKind(kind)
    if hasattr(X, "X") and hasattr(X, "feature_names"):
        feature_names = feature_names or X.feature_names
        X, y = X.X, X.y if y is None else y
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("training set is empty")
    if y.shape != (X.shape[0],):
        raise TrainingError("labels do not match the number of rows")
    if not np.all(np.isfinite(X)):
        raise TrainingError("training features contain non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise TrainingError("labels must be 0 or 1")
    y = y.astype(int)
    if y.min() == y.max():
        raise TrainingError(f"training set contains a single class ({y[0]})")
    hp = {**DEFAULT_HYPERPARAMS[kind], **(hyperparams or {})}
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise TrainingError("feature_names length does not match X")
    rng = np.random.default_rng(seed)
    params = _FITTERS[kind](X, y, hp, rng)
    return TrainedModel(kind, hp, names, params, seed)


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    return model.predict_proba(X)


def accuracy(model: TrainedModel, X, y=None, t: float = 0.5) -> float:
    """Fraction of rows whose thresholded prediction equals the label."""
    if hasattr(X, "X") and hasattr(X, "y"):
        X, y = X.X, X.y
    if not 0.0 < t < 1.0:
        raise ValueError("threshold t must lie in (0, 1)")
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("cannot compute accuracy on an empty test set")
    return float(np.mean(model.predict(X, t) == y))
