"""Gradient-boosted regression trees with second-order split gains.

Supports the two losses the pipeline needs: logistic (per-cause binary
classifiers with a positive-class weight) and squared error (the
attribution regressor). Split search is exact greedy over midpoints of
consecutive distinct values; equal gains resolve to the lexicographically
smallest feature name and lowest threshold, which makes training fully
deterministic for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

FORMAT_NAME = "netrca-gbdt"
FORMAT_VERSION = 1


@dataclass
class GbdtParams:
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    min_child_weight: float = 1e-3
    l2_lambda: float = 1.0
    positive_class_weight: float = 1.0
    loss: str = "logistic"
    seed: int = 0
    feature_subsample: float = 1.0

    def validate(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.positive_class_weight <= 0:
            raise ValueError("positive_class_weight must be > 0")
        if self.loss not in ("logistic", "squared"):
            raise ValueError(f"unknown loss '{self.loss}'")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise ValueError("feature_subsample must be in (0, 1]")


@dataclass
class GbdtModel:
    loss: str
    base_score: float
    learning_rate: float
    feature_names: tuple
    trees: list
    train_history: list = field(default_factory=list)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def _log_loss(y, p, wgt):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(np.sum(wgt * -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))) / np.sum(wgt))


def train(X, y, feature_names, params):
    """Fit a boosted tree ensemble; returns a GbdtModel.

    Feature columns are reordered lexicographically by name internally so
    split tie-breaking is independent of the caller's column order. The
    seeded generator is consumed only when feature_subsample < 1.
    """
    params.validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-d with one label per row")
    n, p = X.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if len(feature_names) != p:
        raise ValueError("feature_names length mismatch")
    if not np.isfinite(X).all():
        raise ValueError("NaN or infinite feature value in training data")

    name_order = sorted(range(p), key=lambda j: feature_names[j])
    names = tuple(feature_names[j] for j in name_order)
    X = np.ascontiguousarray(X[:, name_order])

    if params.loss == "logistic":
        classes = np.unique(y)
        if not set(classes.tolist()) <= {0.0, 1.0}:
            raise ValueError("logistic loss needs 0/1 labels")
        if classes.size < 2:
            raise ValueError("single-class input for logistic loss")
        wgt = np.where(y == 1.0, params.positive_class_weight, 1.0)
        base = 0.0
    else:
        wgt = np.ones(n)
        base = float(np.mean(y))

    raw = np.full(n, base)
    order = np.argsort(X, axis=0, kind="stable").astype(np.int64)
    rng = np.random.default_rng(params.seed)
    lam = params.l2_lambda
    mcw = params.min_child_weight
    lr = params.learning_rate

    def loss_now():
        if params.loss == "logistic":
            return _log_loss(y, _sigmoid(raw), wgt)
        return float(np.mean((raw - y) ** 2))

    history = [loss_now()]
    trees = []
    for _ in range(params.n_trees):
        if params.loss == "logistic":
            prob = _sigmoid(raw)
            g = (prob - y) * wgt
            h = prob * (1.0 - prob) * wgt
        else:
            g = raw - y
            h = np.ones(n)

        if params.feature_subsample < 1.0:
            k = max(1, int(round(params.feature_subsample * p)))
            cols = np.sort(rng.choice(p, size=k, replace=False))
            x_t = np.ascontiguousarray(X[:, cols])
            o_t = np.ascontiguousarray(order[:, cols])
        else:
            cols = np.arange(p)
            x_t, o_t = X, order

        def grow(mask, depth):
            grad_sum = float(g[mask].sum())
            hess_sum = float(h[mask].sum())
            if depth < params.max_depth and int(mask.sum()) >= 2:
                feat, thr, gain = kernels.best_split(x_t, o_t, mask, g, h, lam, mcw)
                if feat >= 0 and gain > 0.0:
                    go_left = x_t[:, feat] <= thr
                    left = mask & go_left
                    right = mask & ~go_left
                    if left.any() and right.any():
                        return {
                            "feature": names[int(cols[feat])],
                            "threshold": float(thr),
                            "default_left": True,
                            "left": grow(left, depth + 1),
                            "right": grow(right, depth + 1),
                        }
            w = -grad_sum / (hess_sum + lam)
            raw[mask] += lr * w
            return {"leaf": w}

        trees.append(grow(np.ones(n, dtype=bool), 0))
        history.append(loss_now())

    return GbdtModel(
        loss=params.loss,
        base_score=base,
        learning_rate=lr,
        feature_names=names,
        trees=trees,
        train_history=history,
    )


def _tree_value(node, lookup):
    while "leaf" not in node:
        name = node["feature"]
        if name not in lookup:
            raise ValueError(f"missing feature '{name}'")
        v = lookup[name]
        if np.isnan(v):
            node = node["left"] if node["default_left"] else node["right"]
        elif v <= node["threshold"]:
            node = node["left"]
        else:
            node = node["right"]
    return node["leaf"]


def raw_score(model, x):
    z = model.base_score
    for tree in model.trees:
        z += model.learning_rate * _tree_value(tree, x)
    return z


def predict(model, x):
    """Score one sample given as a name -> value mapping.

    Logistic models return the positive-class probability; squared models
    the regression value. NaN routes down the split's default side; an
    absent key is an error.
    """
    z = raw_score(model, x)
    return float(_sigmoid(z)) if model.loss == "logistic" else float(z)


def classify(model, x, decision_threshold=0.5):
    return predict(model, x) >= decision_threshold


def matrix_for(model, vectors):
    """Row matrix in the model's column order from FeatureVectors."""
    rows = np.empty((len(vectors), len(model.feature_names)))
    for i, v in enumerate(vectors):
        for j, name in enumerate(model.feature_names):
            if name not in v.entries:
                raise ValueError(f"missing feature '{name}' in sample {v.sample_id}")
            rows[i, j] = v.entries[name]
    return rows


def predict_matrix(model, X):
    """Vectorized predict over rows ordered like model.feature_names."""
    X = np.asarray(X, dtype=np.float64)
    z = np.full(X.shape[0], model.base_score)

    def walk(node, mask):
        if "leaf" in node:
            z[mask] += model.learning_rate * node["leaf"]
            return
        col = X[:, name_pos[node["feature"]]]
        nan = np.isnan(col)
        left = mask & (~nan & (col <= node["threshold"]) | (nan if node["default_left"] else False))
        walk(node["left"], left)
        walk(node["right"], mask & ~left)

    name_pos = {n: j for j, n in enumerate(model.feature_names)}
    for tree in model.trees:
        walk(tree, np.ones(X.shape[0], dtype=bool))
    return _sigmoid(z) if model.loss == "logistic" else z


def to_doc(model):
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "loss": model.loss,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": list(model.feature_names),
        "trees": model.trees,
        "train_history": model.train_history,
    }


def from_doc(doc):
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    return GbdtModel(
        loss=doc["loss"],
        base_score=doc["base_score"],
        learning_rate=doc["learning_rate"],
        feature_names=tuple(doc["feature_names"]),
        trees=doc["trees"],
        train_history=list(doc.get("train_history", [])),
    )


def dumps(model):
    return json.dumps(to_doc(model), indent=1)


def loads(text):
    return from_doc(json.loads(text))


def save(model, path):
    Path(path).write_text(dumps(model) + "\n", encoding="utf-8")


def load(path):
    return loads(Path(path).read_text(encoding="utf-8"))
