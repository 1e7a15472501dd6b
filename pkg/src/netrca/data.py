"""Domain types, file IO, and missing-value interpolation.

File formats (all UTF-8, whitespace-separated, ``#`` comment lines allowed):

* dataset:  header ``features <id> <id> ...`` then one row per timestamp,
  ``<sample_id> <timestamp> <v_0> ... <v_{n-1}>`` with ``NA`` for missing.
  Rows of one sample are contiguous and ordered by timestamp.
* labels:   ``<sample_id> <c,c,...>`` per line, or the token ``UNLABELED``
  (no label known) or ``NONE`` (labeled, no fault).
* graph:    optional ``nodes <id> ...`` line, required ``target <id>`` line,
  then one ``<parent> <child>`` edge per line.
* schema:   JSON document mirroring FeatureSchema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed input file or violated data invariant."""


@dataclass
class Sample:
    """One telemetry episode: timestamped KPI matrix plus optional label.

    label is None when the sample is unlabeled; an empty frozenset means
    "labeled, no fault". provenance marks samples whose label was produced
    by augmentation rather than observed.
    """

    sample_id: str
    timestamps: np.ndarray
    values: np.ndarray
    missing: np.ndarray
    label: frozenset | None = None
    provenance: str | None = None

    def validate(self, n_features=None, causes=None):
        if self.timestamps.ndim != 1 or self.values.ndim != 2:
            raise FormatError(f"sample {self.sample_id}: bad array shapes")
        m, n = self.values.shape
        if m < 1 or n < 1:
            raise FormatError(f"sample {self.sample_id}: empty value matrix")
        if self.timestamps.shape[0] != m or self.missing.shape != (m, n):
            raise FormatError(f"sample {self.sample_id}: shape mismatch")
        if m > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise FormatError(f"sample {self.sample_id}: non-increasing timestamps")
        if n_features is not None and n != n_features:
            raise FormatError(
                f"sample {self.sample_id}: expected {n_features} features, got {n}"
            )
        if self.label is not None and causes is not None:
            bad = set(self.label) - set(causes)
            if bad:
                raise FormatError(
                    f"sample {self.sample_id}: unknown cause {sorted(bad)}"
                )

    @property
    def n_timestamps(self):
        return self.values.shape[0]

    @property
    def span(self):
        return float(self.timestamps[0]), float(self.timestamps[-1])


@dataclass(frozen=True)
class CausalGraph:
    """Directed graph over feature and root-cause nodes."""

    nodes: tuple
    edges: tuple
    target_node: int

    def __post_init__(self):
        nodes = set(self.nodes)
        if self.target_node not in nodes:
            raise FormatError(f"target node {self.target_node} not declared")
        for parent, child in self.edges:
            if parent == child:
                raise FormatError(f"self-loop on node {parent}")
            if parent not in nodes or child not in nodes:
                raise FormatError(f"edge ({parent}, {child}) references undeclared node")

    def children(self, node):
        return [c for p, c in self.edges if p == node]

    def parents(self, node):
        return [p for p, c in self.edges if c == node]

    def undirected_neighbors(self, restrict=None):
        """Symmetric-closure neighbor map, optionally restricted to a node subset."""
        keep = set(self.nodes) if restrict is None else set(restrict) & set(self.nodes)
        nbrs = {n: set() for n in sorted(keep)}
        for p, c in self.edges:
            if p in keep and c in keep:
                nbrs[p].add(c)
                nbrs[c].add(p)
        return nbrs


@dataclass(frozen=True)
class FeatureSchema:
    """Feature-role configuration: target, per-cause feature lists, grid, pairs."""

    target_feature: int
    adjacent_features: dict
    training_features: dict
    location_feature: int | None = None
    grid_shape: tuple = (4, 8)
    xy_pairs: tuple = ()

    @property
    def causes(self):
        return sorted(self.training_features)

    def validate(self, feature_ids):
        known = set(feature_ids)
        if self.target_feature not in known:
            raise FormatError(f"target feature {self.target_feature} not in dataset")
        referenced = set()
        for cause, feats in self.training_features.items():
            referenced.update(feats)
        for cause, feats in self.adjacent_features.items():
            referenced.update(feats)
        for x, y in self.xy_pairs:
            referenced.update((x, y))
        if self.location_feature is not None:
            referenced.add(self.location_feature)
        missing = referenced - known
        if missing:
            raise FormatError(f"schema references unknown features {sorted(missing)}")
        rows, cols = self.grid_shape
        if rows < 1 or cols < 1:
            raise FormatError("grid_shape must be positive")


@dataclass
class Dataset:
    """Immutable-after-load collection of samples plus schema and graph."""

    samples: list
    schema: FeatureSchema
    feature_ids: tuple
    graph: CausalGraph | None = None

    def validate(self):
        self.schema.validate(self.feature_ids)
        seen = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise FormatError(f"duplicate sample id {s.sample_id}")
            seen.add(s.sample_id)
            s.validate(n_features=len(self.feature_ids), causes=self.schema.causes)

    def labeled(self):
        return [s for s in self.samples if s.label is not None]

    def unlabeled(self):
        return [s for s in self.samples if s.label is None]

    def column(self, feature_id):
        return self.feature_ids.index(feature_id)


def interpolate_missing(series, missing):
    """Fill masked entries by linear interpolation between observed neighbors.

    Leading/trailing gaps are filled with the nearest observed value.
    Observed entries are preserved exactly.
    """
    series = np.asarray(series, dtype=np.float64)
    missing = np.asarray(missing, dtype=bool)
    observed = ~missing
    if not observed.any():
        raise ValueError("no observed values")
    if observed.all():
        return series.copy()
    idx = np.arange(series.shape[0], dtype=np.float64)
    out = np.interp(idx, idx[observed], series[observed])
    out[observed] = series[observed]
    return out


def interpolate_sample(sample):
    """Return a copy of the sample with every column interpolated, mask cleared."""
    if not sample.missing.any():
        return replace(
            sample, values=sample.values.copy(), missing=np.zeros_like(sample.missing)
        )
    values = sample.values.copy()
    for j in range(values.shape[1]):
        col_missing = sample.missing[:, j]
        if col_missing.any():
            values[:, j] = interpolate_missing(values[:, j], col_missing)
    return replace(sample, values=values, missing=np.zeros_like(sample.missing))


def _fmt(x):
    """Canonical number formatting: integral floats as ints, rest via repr."""
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _data_lines(path):
    """Yield (lineno, tokens) for non-empty, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def load_schema(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid schema JSON: {exc}") from exc
    try:
        schema = FeatureSchema(
            target_feature=int(doc["target_feature"]),
            adjacent_features={
                int(c): tuple(int(f) for f in feats)
                for c, feats in doc["adjacent_features"].items()
            },
            training_features={
                int(c): tuple(int(f) for f in feats)
                for c, feats in doc["training_features"].items()
            },
            location_feature=(
                int(doc["location_feature"])
                if doc.get("location_feature") is not None
                else None
            ),
            grid_shape=tuple(int(v) for v in doc.get("grid_shape", (4, 8))),
            xy_pairs=tuple(
                (int(x), int(y)) for x, y in doc.get("xy_pairs", ())
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad schema document: {exc}") from exc
    return schema


def write_schema(schema, path):
    doc = {
        "target_feature": schema.target_feature,
        "adjacent_features": {
            str(c): list(f) for c, f in sorted(schema.adjacent_features.items())
        },
        "training_features": {
            str(c): list(f) for c, f in sorted(schema.training_features.items())
        },
        "location_feature": schema.location_feature,
        "grid_shape": list(schema.grid_shape),
        "xy_pairs": [list(p) for p in schema.xy_pairs],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_labels(path, causes):
    """Parse a label file into {sample_id: frozenset | None}."""
    labels = {}
    known = set(causes)
    for lineno, tokens in _data_lines(path):
        if len(tokens) != 2:
            raise FormatError(f"{path}:{lineno}: expected '<sample_id> <labels>'")
        sample_id, spec = tokens
        if sample_id in labels:
            raise FormatError(f"{path}:{lineno}: duplicate sample id {sample_id}")
        if spec == "UNLABELED":
            labels[sample_id] = None
        elif spec == "NONE":
            labels[sample_id] = frozenset()
        else:
            try:
                causes_set = frozenset(int(tok) for tok in spec.split(","))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: malformed label '{spec}'") from exc
            bad = causes_set - known
            if bad:
                raise FormatError(f"{path}:{lineno}: unknown cause {sorted(bad)}")
            labels[sample_id] = causes_set
    return labels


def write_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id, label in labels.items():
            if label is None:
                spec = "UNLABELED"
            elif not label:
                spec = "NONE"
            else:
                spec = ",".join(str(c) for c in sorted(label))
            fh.write(f"{sample_id} {spec}\n")


def load_dataset(path, schema_path, labels_path=None, graph_path=None):
    """Load a dataset file plus schema, with optional label and graph sidecars."""
    schema = load_schema(schema_path)
    feature_ids = None
    samples = []
    current_id = None
    current_rows = []
    closed = set()

    def close_current():
        nonlocal current_id, current_rows
        if current_id is None:
            return
        ts = np.array([r[0] for r in current_rows], dtype=np.float64)
        vals = np.array([r[1] for r in current_rows], dtype=np.float64)
        miss = np.array([r[2] for r in current_rows], dtype=bool)
        samples.append(
            Sample(sample_id=current_id, timestamps=ts, values=vals, missing=miss)
        )
        closed.add(current_id)
        current_id = None
        current_rows = []

    for lineno, tokens in _data_lines(path):
        if feature_ids is None:
            if tokens[0] != "features" or len(tokens) < 2:
                raise FormatError(f"{path}:{lineno}: expected 'features <id> ...' header")
            try:
                feature_ids = tuple(int(t) for t in tokens[1:])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: malformed feature id") from exc
            if len(set(feature_ids)) != len(feature_ids):
                raise FormatError(f"{path}:{lineno}: duplicate feature id")
            continue
        if len(tokens) != 2 + len(feature_ids):
            raise FormatError(
                f"{path}:{lineno}: expected {2 + len(feature_ids)} fields, "
                f"got {len(tokens)}"
            )
        sample_id = tokens[0]
        try:
            ts = float(tokens[1])
            vals = [0.0 if t == "NA" else float(t) for t in tokens[2:]]
            miss = [t == "NA" for t in tokens[2:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: malformed record: {exc}") from exc
        if sample_id != current_id:
            close_current()
            if sample_id in closed:
                raise FormatError(
                    f"{path}:{lineno}: sample {sample_id} rows are not contiguous"
                )
            current_id = sample_id
        current_rows.append((ts, vals, miss))
    close_current()
    if feature_ids is None:
        raise FormatError(f"{path}: missing 'features' header")

    if labels_path is not None:
        labels = load_labels(labels_path, schema.causes)
        unknown = set(labels) - closed
        if unknown:
            raise FormatError(
                f"{labels_path}: labels for unknown samples {sorted(unknown)[:5]}"
            )
        for s in samples:
            s.label = labels.get(s.sample_id)

    graph = load_causal_graph(graph_path) if graph_path is not None else None
    dataset = Dataset(samples=samples, schema=schema, feature_ids=feature_ids, graph=graph)
    dataset.validate()
    return dataset


def write_dataset(dataset, path):
    """Write the canonical line-oriented dataset file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("features " + " ".join(str(f) for f in dataset.feature_ids) + "\n")
        for s in dataset.samples:
            for i in range(s.n_timestamps):
                cells = [
                    "NA" if s.missing[i, j] else _fmt(s.values[i, j])
                    for j in range(s.values.shape[1])
                ]
                fh.write(f"{s.sample_id} {_fmt(s.timestamps[i])} " + " ".join(cells) + "\n")


def load_causal_graph(path):
    """Parse a graph file: optional 'nodes' line, 'target' line, edge pairs."""
    declared = None
    target = None
    edges = []
    for lineno, tokens in _data_lines(path):
        if tokens[0] == "nodes":
            try:
                declared = tuple(int(t) for t in tokens[1:])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: malformed node id") from exc
        elif tokens[0] == "target":
            if len(tokens) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'target <node-id>'")
            target = int(tokens[1])
        else:
            if len(tokens) != 2:
                raise FormatError(f"{path}:{lineno}: expected '<parent> <child>'")
            try:
                edges.append((int(tokens[0]), int(tokens[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: malformed edge") from exc
    if target is None:
        raise FormatError(f"{path}: missing target declaration")
    if declared is None:
        nodes = {target}
        for p, c in edges:
            nodes.update((p, c))
        declared = tuple(sorted(nodes))
    return CausalGraph(nodes=declared, edges=tuple(edges), target_node=target)


def write_causal_graph(graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("nodes " + " ".join(str(n) for n in graph.nodes) + "\n")
        fh.write(f"target {graph.target_node}\n")
        for p, c in graph.edges:
            fh.write(f"{p} {c}\n")
