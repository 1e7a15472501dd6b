"""Synthetic fault-telemetry generator with known ground truth.

Samples are grouped into incidents on a shared timeline. Every sample in an
incident observes the same fault set, so time-co-occurring samples carry
consistent labels (which is what the label-union augmentation assumes).
Cause sets are drawn once per incident, each cause independently with its
configured probability, so the per-sample marginal matches the config.

Structural model per sample:
* every regular feature is level + slow sine wave + Gaussian noise,
* an active cause depresses each of its adjacent features by a level shift
  over a random sub-interval of the episode,
* anomalies propagate one topological pass along feature-to-feature graph
  edges (child += gain * parent anomaly + small noise), ending at the target,
* causes listed in scatter_causes blast the location index uniformly over
  the grid during their window (otherwise it does a narrow walk),
* causes listed in ratio_drop_causes shrink the hidden factor h in
  X = h * Y during their window, visible mainly in the X/Y ratio,
* with probability confuser_rate a sample additionally carries a benign
  look-alike event: one cause's local signature without any propagation
  to the target and without a label.

Each cause therefore owns a distinct covariance signature, which is what
makes eigenvector-based similarity between same-cause samples high.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FormatError, Sample

log = logging.getLogger(__name__)

CAUSE_NODE_BASE = 1000

# Anomaly depth ranges in units of noise_std, per cause id.
CAUSE_DEPTH = {1: (6.0, 10.0), 2: (4.0, 7.0), 3: (6.0, 10.0)}
DEFAULT_DEPTH = (3.0, 5.0)

# Baseline levels for the regular features of the reference topology.
FEATURE_LEVEL = {0: 100.0, 5: 10.0, 13: 200.0, 15: 95.0, 19: 50.0, 60: 30.0}
DEFAULT_LEVEL = 20.0

SAMPLE_STEP = 10.0


def cause_node(cause_id):
    """Graph node id housing a root cause."""
    return CAUSE_NODE_BASE + cause_id


@dataclass
class SynthConfig:
    seed: int = 7
    n_samples: int = 1000
    cause_probs: dict = field(default_factory=lambda: {1: 0.5, 2: 0.4, 3: 0.4})
    m_range: tuple = (48, 96)
    noise_std: float = 1.0
    propagation_gain: float = 0.7
    missing_rate: float = 0.0
    unlabeled_fraction: float = 0.0
    scatter_causes: tuple = (2,)
    ratio_drop_causes: tuple = (3,)
    confuser_rate: float = 0.4

    def validate(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        for c, p in self.cause_probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"cause {c} probability {p} outside [0, 1]")
        m_min, m_max = self.m_range
        if m_min < 4 or m_max < m_min:
            raise ValueError(f"bad episode length range {self.m_range}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not np.isfinite(self.propagation_gain):
            raise ValueError("propagation_gain must be finite")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must be in [0, 1)")
        if not 0.0 <= self.unlabeled_fraction < 1.0:
            raise ValueError("unlabeled_fraction must be in [0, 1)")
        if not 0.0 <= self.confuser_rate <= 1.0:
            raise ValueError("confuser_rate must be in [0, 1]")


def _topo_feature_edges(graph, feature_ids):
    """Feature-to-feature edges in a deterministic topological order.

    Raises FormatError when the feature subgraph has a cycle.
    """
    feats = set(feature_ids)
    edges = [(p, c) for p, c in graph.edges if p in feats and c in feats]
    indeg = {f: 0 for f in feats}
    children = {f: [] for f in feats}
    for p, c in edges:
        indeg[c] += 1
        children[p].append(c)
    ready = sorted(f for f in feats if indeg[f] == 0)
    ordered = []
    while ready:
        u = ready.pop(0)
        for v in sorted(children[u]):
            ordered.append((u, v))
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
        ready.sort()
    if sum(indeg.values()) != 0:
        raise FormatError("cyclic feature subgraph")
    return ordered


def _gen_sample(index, start, truth, config, schema, feature_ids, topo_edges):
    """Generate one Sample from its private random stream.

    The draw order below is fixed; changing it changes every dataset.
    """
    rng = np.random.default_rng([config.seed, 1, index])
    m_min, m_max = config.m_range
    m = int(rng.integers(m_min, m_max + 1))
    offset = rng.uniform(0.0, 30.0)
    ts = start + offset + SAMPLE_STEP * np.arange(m, dtype=np.float64)
    rel = ts - ts[0]
    noise = config.noise_std

    pair_members = set()
    for x, y in schema.xy_pairs:
        pair_members.update((x, y))
    location = schema.location_feature

    series = {}
    regular = [
        f for f in feature_ids if f != location and f not in pair_members
    ]
    for f in regular:
        level = FEATURE_LEVEL.get(f, DEFAULT_LEVEL) * (1.0 + rng.uniform(-0.05, 0.05))
        if f == schema.target_feature:
            # The target is an aggregate KPI: calmer than its drivers, so
            # propagated faults stand out against its baseline.
            amp = rng.uniform(0.8, 1.6) * noise
        else:
            amp = rng.uniform(2.0, 4.0) * noise
        period = rng.uniform(300.0, 900.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        series[f] = (
            level
            + amp * np.sin(2.0 * np.pi * rel / period + phase)
            + rng.normal(0.0, noise, m)
        )

    if location is not None:
        rows, cols = schema.grid_shape
        n_cells = rows * cols
        cell = int(rng.integers(0, n_cells))
        steps = rng.integers(-1, 2, size=m)
        walk = np.clip(cell + np.cumsum(steps), 0, n_cells - 1)
        series[location] = walk.astype(np.float64)

    pair_hidden = {}
    for k, (x, y) in enumerate(schema.xy_pairs):
        amp = rng.uniform(1.0, 3.0)
        period = rng.uniform(300.0, 900.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = 2.0 + np.sin(2.0 * np.pi * rel / period + phase)
        y_series = amp * wave * (1.0 + rng.normal(0.0, 0.01, m))
        h = np.ones(m)
        pair_hidden[k] = h
        series[y] = y_series
        series[x] = h * y_series * (1.0 + rng.normal(0.0, 0.02, m))

    anom = {f: np.zeros(m) for f in feature_ids}
    for c in sorted(truth):
        w_start = rng.uniform(0.1, 0.5)
        w_len = rng.uniform(0.15, 0.4)
        i0 = int(w_start * m)
        i1 = min(m, i0 + max(2, int(w_len * m)))
        lo, hi = CAUSE_DEPTH.get(c, DEFAULT_DEPTH)
        for f in sorted(schema.adjacent_features.get(c, ())):
            if f == location or f in pair_members:
                continue
            depth = rng.uniform(lo, hi) * noise
            anom[f][i0:i1] -= depth
        if location is not None and c in config.scatter_causes:
            scatter = rng.integers(0, schema.grid_shape[0] * schema.grid_shape[1], size=i1 - i0)
            series[location][i0:i1] = scatter.astype(np.float64)
        if c in config.ratio_drop_causes:
            h_low = rng.uniform(0.15, 0.4)
            for k in pair_hidden:
                pair_hidden[k][i0:i1] = h_low

    # Benign look-alike event: one cause's local signature, no propagation
    # to the target, never labeled. Local evidence alone cannot separate
    # these from real faults; the target's response can.
    ben = {f: np.zeros(m) for f in feature_ids}
    if config.confuser_rate > 0 and rng.random() < config.confuser_rate:
        causes = sorted(schema.adjacent_features)
        c = causes[int(rng.integers(0, len(causes)))]
        w_start = rng.uniform(0.1, 0.5)
        w_len = rng.uniform(0.15, 0.4)
        i0 = int(w_start * m)
        i1 = min(m, i0 + max(2, int(w_len * m)))
        lo, hi = CAUSE_DEPTH.get(c, DEFAULT_DEPTH)
        for f in sorted(schema.adjacent_features.get(c, ())):
            if f == location or f in pair_members:
                continue
            ben[f][i0:i1] -= rng.uniform(lo, hi) * noise
        if location is not None and c in config.scatter_causes:
            rows, cols = schema.grid_shape
            scatter = rng.integers(0, rows * cols, size=i1 - i0)
            series[location][i0:i1] = scatter.astype(np.float64)
        if c in config.ratio_drop_causes:
            h_low = rng.uniform(0.15, 0.4)
            for k in pair_hidden:
                pair_hidden[k][i0:i1] = h_low

    for k, (x, y) in enumerate(schema.xy_pairs):
        series[x] = series[x] * pair_hidden[k]

    for p, ch in topo_edges:
        if ch == location:
            continue
        anom[ch] = anom[ch] + config.propagation_gain * anom[p] + rng.normal(
            0.0, 0.1 * noise, m
        )

    values = np.empty((m, len(feature_ids)), dtype=np.float64)
    for j, f in enumerate(feature_ids):
        col = series[f]
        if f != location:
            col = col + anom[f] + ben[f]
        values[:, j] = col

    missing = np.zeros((m, len(feature_ids)), dtype=bool)
    if config.missing_rate > 0:
        missing = rng.random((m, len(feature_ids))) < config.missing_rate
        for j in range(len(feature_ids)):
            if missing[:, j].all():
                missing[0, j] = False
        values = np.where(missing, 0.0, values)

    return Sample(
        sample_id=f"s{index:05d}",
        timestamps=ts,
        values=values,
        missing=missing,
        label=frozenset(truth),
    )


def generate(config, graph, schema):
    """Build (Dataset, ground_truth) from the structural model.

    ground_truth maps every sample_id to its cause set, including samples
    the dataset returns as unlabeled. Deterministic given config.seed.
    """
    config.validate()
    cause_nodes = {cause_node(c) for c in schema.causes}
    feature_ids = tuple(sorted(n for n in graph.nodes if n not in cause_nodes))
    schema.validate(feature_ids)
    topo_edges = _topo_feature_edges(graph, feature_ids)

    layout = np.random.default_rng([config.seed, 0])
    m_min, m_max = config.m_range
    incident_span = SAMPLE_STEP * m_max + 30.0

    assignments = []
    t = layout.uniform(0.0, 60.0)
    while len(assignments) < config.n_samples:
        size = 1 + int(layout.poisson(0.8))
        size = min(size, config.n_samples - len(assignments))
        causes = frozenset(
            c for c, p in sorted(config.cause_probs.items()) if layout.random() < p
        )
        for _ in range(size):
            assignments.append((t, causes))
        t += incident_span + layout.uniform(100.0, 400.0)

    n_unlabeled = int(round(config.unlabeled_fraction * config.n_samples))
    hidden = set(layout.permutation(config.n_samples)[:n_unlabeled].tolist())

    samples = []
    ground_truth = {}
    for i, (start, causes) in enumerate(assignments):
        s = _gen_sample(i, start, causes, config, schema, feature_ids, topo_edges)
        ground_truth[s.sample_id] = frozenset(causes)
        if i in hidden:
            s.label = None
        samples.append(s)

    dataset = Dataset(samples=samples, schema=schema, feature_ids=feature_ids, graph=graph)
    dataset.validate()
    log.info(
        "generated %d samples (%d unlabeled, %d incidents)",
        len(samples),
        n_unlabeled,
        len({a[0] for a in assignments}),
    )
    return dataset, ground_truth


def reference_config(seed=7):
    """The committed reference dataset: the regression target for the
    variant-ordering check and the end-to-end determinism check."""
    return SynthConfig(
        seed=seed,
        n_samples=1000,
        unlabeled_fraction=0.30,
        missing_rate=0.05,
    )


def default_schema():
    """Feature-role schema for the reference topology."""
    from .data import FeatureSchema

    return FeatureSchema(
        target_feature=0,
        adjacent_features={1: (13, 15), 2: (19,), 3: (60,)},
        training_features={
            1: (0, 13, 15),
            2: (0, 19, 20),
            3: (0, 60, 20, 61, 28, 69, 36),
        },
        location_feature=20,
        grid_shape=(4, 8),
        xy_pairs=((61, 28), (69, 36)),
    )


def default_graph():
    """Causal graph for the reference topology: faults feed the target."""
    from .data import CausalGraph

    features = (0, 5, 13, 15, 19, 20, 28, 36, 60, 61, 69)
    causes = (1, 2, 3)
    edges = (
        (13, 0),
        (15, 0),
        (19, 0),
        (60, 0),
        (cause_node(1), 13),
        (cause_node(1), 15),
        (cause_node(2), 19),
        (cause_node(3), 60),
    )
    nodes = features + tuple(cause_node(c) for c in causes)
    return CausalGraph(nodes=nodes, edges=edges, target_node=0)
