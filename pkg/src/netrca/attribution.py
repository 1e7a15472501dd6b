"""Shapley-value importance of internal features on the target feature.

A squared-loss boosted-tree model f maps per-sample summaries of the
internal features to the target summary. Exact Shapley values enumerate
all subsets with mean substitution for absent coordinates; the cheap
single-removal variant |f(x) - f(x with x_i -> baseline_i)| is the score
used in the pipeline, with the exact version kept as its oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gbdt

EXACT_GUARD = 12


@dataclass
class AttributionContext:
    model: gbdt.GbdtModel
    baseline: np.ndarray
    feature_names: tuple
    reduction: str = "mean"

    @property
    def p(self):
        return len(self.feature_names)


def summarize(samples, feature_ids, internal_features, target_feature, reduction="mean"):
    """Per-sample reduction of internal features and target into a table.

    Returns (X, y, names) where names are 'f<id>' strings in sorted id
    order. Samples must be interpolated.
    """
    if reduction not in ("mean", "min"):
        raise ValueError(f"unknown reduction '{reduction}'")
    red = np.mean if reduction == "mean" else np.min
    internal = sorted(internal_features)
    cols = {f: feature_ids.index(f) for f in internal}
    tcol = feature_ids.index(target_feature)
    X = np.empty((len(samples), len(internal)))
    y = np.empty(len(samples))
    for i, s in enumerate(samples):
        if s.missing.any():
            raise ValueError(f"sample {s.sample_id} not interpolated")
        for j, f in enumerate(internal):
            X[i, j] = red(s.values[:, cols[f]])
        y[i] = red(s.values[:, tcol])
    return X, y, [f"f{f}" for f in internal]


def fit_context(X, y, feature_names, params=None, reduction="mean"):
    """Train the squared-loss relationship model and store column means."""
    params = params or gbdt.GbdtParams(loss="squared", n_trees=80, max_depth=3)
    if params.loss != "squared":
        raise ValueError("attribution model must use squared loss")
    X = np.asarray(X, dtype=np.float64)
    if np.unique(y).size < 2:
        model = gbdt.GbdtModel(
            loss="squared",
            base_score=float(y[0]),
            learning_rate=params.learning_rate,
            feature_names=tuple(sorted(feature_names)),
            trees=[],
        )
    else:
        model = gbdt.train(X, y, feature_names, params)
    order = [list(feature_names).index(n) for n in model.feature_names]
    baseline = X.mean(axis=0)[order]
    return AttributionContext(
        model=model,
        baseline=baseline,
        feature_names=model.feature_names,
        reduction=reduction,
    )


def _eval_masks(ctx, x):
    """f at every mean-substituted subset; index = bitmask over features."""
    p = ctx.p
    masks = np.arange(2**p)
    bits = (masks[:, None] >> np.arange(p)) & 1
    points = np.where(bits == 1, x[None, :], ctx.baseline[None, :])
    return gbdt.predict_matrix(ctx.model, points)


def shapley_exact(ctx, x):
    """Exact Shapley values via full subset enumeration (p <= 12)."""
    p = ctx.p
    if p > EXACT_GUARD:
        raise ValueError(
            f"{p} features exceeds the exact enumeration guard "
            f"({EXACT_GUARD}); use shapley_approx"
        )
    x = np.asarray(x, dtype=np.float64)
    f = _eval_masks(ctx, x)
    fact = [math.factorial(k) for k in range(p + 1)]
    weights = [fact[t] * fact[p - t - 1] / fact[p] for t in range(p)]
    phi = np.zeros(p)
    for mask in range(2**p):
        t = bin(mask).count("1")
        for i in range(p):
            if mask & (1 << i):
                continue
            phi[i] += weights[t] * (f[mask | (1 << i)] - f[mask])
    return phi


def shapley_approx(ctx, x):
    """Single-removal importance |f(x) - f(x with x_i -> baseline_i)|."""
    x = np.asarray(x, dtype=np.float64)
    points = np.tile(x, (ctx.p + 1, 1))
    for i in range(ctx.p):
        points[i + 1, i] = ctx.baseline[i]
    f = gbdt.predict_matrix(ctx.model, points)
    return np.abs(f[0] - f[1:])


def identify_roots(phi, feature_names, threshold, cause_features):
    """Causes whose best adjacent importance clears the threshold.

    phi is max-normalized first (when any entry is positive) so the
    threshold is scale-free; comparison is strict.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    phi = np.asarray(phi, dtype=np.float64)
    peak = float(phi.max()) if phi.size else 0.0
    norm = phi / peak if peak > 0 else phi
    pos = {n: i for i, n in enumerate(feature_names)}
    found = set()
    for cause, feats in cause_features.items():
        best = max((norm[pos[f]] for f in feats if f in pos), default=0.0)
        if best > threshold:
            found.add(cause)
    return found


def cause_feature_names(schema):
    """Schema adjacency rendered in the attribution table's name grammar."""
    return {
        c: tuple(f"f{f}" for f in feats)
        for c, feats in schema.adjacent_features.items()
    }


def to_doc(ctx):
    return {
        "format": "netrca-attribution",
        "version": 1,
        "reduction": ctx.reduction,
        "feature_names": list(ctx.feature_names),
        "baseline": ctx.baseline.tolist(),
        "model": gbdt.to_doc(ctx.model),
    }


def from_doc(doc):
    if doc.get("format") != "netrca-attribution":
        raise ValueError("not an attribution context document")
    return AttributionContext(
        model=gbdt.from_doc(doc["model"]),
        baseline=np.array(doc["baseline"], dtype=np.float64),
        feature_names=tuple(doc["feature_names"]),
        reduction=doc.get("reduction", "mean"),
    )


def save(ctx, path):
    Path(path).write_text(json.dumps(to_doc(ctx), indent=1) + "\n", encoding="utf-8")


def load(path):
    return from_doc(json.loads(Path(path).read_text(encoding="utf-8")))
