"""Per-sample feature extraction: temporal statistics, grid-distance
("direction") features, X/Y interaction ratios, and optional attribution
score entries.

Feature name grammar: ``f<id>_<stat>`` for raw temporal stats,
``dist_<stat>`` for grid distances, ``ratio_p<k>_<stat>`` for the k-th
X/Y pair, ``attr_f<id>`` for attribution entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DECILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class FeatureVector:
    sample_id: str
    entries: dict

    def array(self, names):
        return np.array([self.entries[n] for n in names], dtype=np.float64)


def temporal_stats(series):
    """Summary statistics of one series.

    Quantiles use linear interpolation between order statistics. Skewness is
    the bias-corrected sample skewness, defined as 0 when the variance is 0
    or fewer than 3 points are available. A peak is an interior point
    strictly greater than both neighbors.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty series")
    m = x.size
    stats = {
        "mean": float(np.mean(x)),
        "min": float(np.min(x)),
        "max": float(np.max(x)),
        "median": float(np.quantile(x, 0.5)),
    }
    qs = np.quantile(x, DECILES)
    for q, v in zip(DECILES, qs):
        stats[f"q{int(q * 100)}"] = float(v)
    stats["skew"] = _skewness(x)
    if m >= 3:
        interior = x[1:-1]
        stats["num_peaks"] = float(np.sum((interior > x[:-2]) & (interior > x[2:])))
    else:
        stats["num_peaks"] = 0.0
    stats["mean_change"] = float((x[-1] - x[0]) / (m - 1)) if m >= 2 else 0.0
    return stats


def _skewness(x):
    m = x.size
    if m < 3:
        return 0.0
    mu = np.mean(x)
    d = x - mu
    m2 = np.mean(d * d)
    if m2 <= 0.0:
        return 0.0
    g1 = np.mean(d**3) / m2**1.5
    return float(g1 * np.sqrt(m * (m - 1)) / (m - 2))


def direction_features(indices, grid_shape):
    """Distance statistics over the distinct grid cells visited.

    Cell index i maps row-major to (i // cols, i % cols). The distance
    multiset holds the Euclidean distance of every unordered pair of
    distinct indices present; repeats of an index do not inflate counts.
    A single distinct index yields all-zero stats.
    """
    idx = np.asarray(indices)
    if idx.size == 0:
        raise ValueError("empty location series")
    rows, cols = grid_shape
    n_cells = rows * cols
    if np.any(idx < 0) or np.any(idx >= n_cells):
        bad = idx[(idx < 0) | (idx >= n_cells)][0]
        raise ValueError(f"location index {bad} outside grid of {n_cells} cells")
    distinct = np.unique(idx)
    names = ("mean", "var", "min", "max", "q25", "q50", "q75")
    if distinct.size < 2:
        return {f"dist_{n}": 0.0 for n in names}
    coords = np.stack([distinct // cols, distinct % cols], axis=1).astype(np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    full = np.sqrt((diff**2).sum(axis=2))
    iu = np.triu_indices(distinct.size, k=1)
    d = full[iu]
    return {
        "dist_mean": float(np.mean(d)),
        "dist_var": float(np.var(d)),
        "dist_min": float(np.min(d)),
        "dist_max": float(np.max(d)),
        "dist_q25": float(np.quantile(d, 0.25)),
        "dist_q50": float(np.quantile(d, 0.5)),
        "dist_q75": float(np.quantile(d, 0.75)),
    }


def ratio_stats(x, y):
    """Temporal stats of the elementwise ratio x/y, skipping zero denominators.

    When no timestamp has a nonzero denominator the stats are all 0 and a
    ``degenerate`` flag of 1 is returned instead.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    valid = y != 0.0
    if not valid.any():
        stats = temporal_stats(np.zeros(1))
        stats = {k: 0.0 for k in stats}
        stats["degenerate"] = 1.0
        return stats
    stats = temporal_stats(x[valid] / y[valid])
    stats["degenerate"] = 0.0
    return stats


def location_indices(series):
    """Round an interpolated location series half-up to integer cell indices."""
    return np.floor(np.asarray(series, dtype=np.float64) + 0.5).astype(np.int64)


def featurize(sample, feature_ids, schema, cause, attribution=None):
    """Assemble the FeatureVector for one cause's model.

    feature_ids gives the column order of the sample's value matrix. Only
    the schema's feature list for the cause contributes: temporal stats per
    listed raw feature, direction features when the location feature is
    listed, ratio stats for each X/Y pair fully contained in the list, and
    attr entries when an attribution map is supplied.
    """
    if sample.missing.any():
        raise ValueError(f"sample {sample.sample_id} not interpolated")
    feats = schema.training_features.get(cause)
    if not feats:
        raise ValueError(f"empty feature set for cause {cause}")
    absent = set(feats) - set(feature_ids)
    if absent:
        raise ValueError(
            f"sample {sample.sample_id} lacks features {sorted(absent)}"
        )

    order = {f: j for j, f in enumerate(feature_ids)}
    entries = {}
    for f in feats:
        j = order[f]
        col = sample.values[:, j]
        if f == schema.location_feature:
            idx = location_indices(col)
            entries.update(direction_features(idx, schema.grid_shape))
        else:
            for name, v in temporal_stats(col).items():
                entries[f"f{f}_{name}"] = v
    for k, (x, y) in enumerate(schema.xy_pairs):
        if x in feats and y in feats:
            for name, v in ratio_stats(
                sample.values[:, order[x]], sample.values[:, order[y]]
            ).items():
                entries[f"ratio_p{k}_{name}"] = v
    if attribution:
        for f in sorted(attribution):
            entries[f"attr_f{f}"] = float(attribution[f])

    bad = [k for k, v in entries.items() if not np.isfinite(v)]
    if bad:
        raise ValueError(f"non-finite feature values {bad} in sample {sample.sample_id}")
    return FeatureVector(sample_id=sample.sample_id, entries=entries)


def build_matrix(vectors):
    """Stack FeatureVectors into (names, X); key sets must agree."""
    if not vectors:
        raise ValueError("no feature vectors")
    names = list(vectors[0].entries)
    key_set = set(names)
    rows = []
    for v in vectors:
        if set(v.entries) != key_set:
            raise ValueError(f"inconsistent feature keys in sample {v.sample_id}")
        rows.append([v.entries[n] for n in names])
    return names, np.array(rows, dtype=np.float64)
