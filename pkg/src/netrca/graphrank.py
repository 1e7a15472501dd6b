"""Root-cause ranking by a personalized random walk on the causal graph.

Per sample, every feature gets an absolute-Pearson similarity to the
target series; walk transition weights are the neighbor similarities
normalized per row. The stationary distribution of a damped walk with
restart at the target is summed over each cause's adjacent features to
rank causes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class WalkConfig:
    damping: float = 0.85
    tol: float = 1e-10
    max_iter: int = 1000

    def validate(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must be in (0, 1)")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol and max_iter must be positive")


def align(ts_a, va, ts_b, vb):
    """Restrict both series to their shared timestamps."""
    common, ia, ib = np.intersect1d(ts_a, ts_b, return_indices=True)
    return va[ia], vb[ib]


def pearson_score(x, y):
    """|Pearson correlation| in [0, 1]; 0 when either series is constant
    or fewer than 2 points are available (with a warning)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("series length mismatch")
    if x.size < 2:
        warnings.warn("fewer than 2 shared timestamps, similarity set to 0")
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    r = float(np.sum(dx * dy)) / (sx * sy)
    return min(1.0, abs(r))


def feature_scores(sample, feature_ids, target_feature):
    """Similarity of every feature's series to the target series within one
    sample. The target's self-score is 1."""
    tcol = feature_ids.index(target_feature)
    target = sample.values[:, tcol]
    scores = {}
    for j, f in enumerate(feature_ids):
        if f == target_feature:
            scores[f] = 1.0
        else:
            scores[f] = pearson_score(sample.values[:, j], target)
    return scores


def edge_weights(graph, scores):
    """Row-stochastic transition matrix over the scored feature nodes.

    Adjacency is the undirected closure of the causal edges restricted to
    nodes that have scores. w_ij = A_ij * S_j / sum_j A_ij * S_j; a row
    whose neighbor scores sum to 0 becomes uniform over its neighbors; a
    node with no neighbors keeps an all-zero row (dangling).
    """
    nodes = sorted(scores)
    pos = {n: i for i, n in enumerate(nodes)}
    nbrs = graph.undirected_neighbors(restrict=nodes)
    W = np.zeros((len(nodes), len(nodes)))
    for n in nodes:
        around = sorted(nbrs.get(n, ()))
        if not around:
            continue
        i = pos[n]
        svec = np.array([scores[m] for m in around])
        total = float(svec.sum())
        if total > 0:
            for m, s in zip(around, svec):
                W[i, pos[m]] = s / total
        else:
            for m in around:
                W[i, pos[m]] = 1.0 / len(around)
    return nodes, W


def personalized_pagerank(W, restart_index, cfg=None):
    """Stationary distribution of the damped walk with restart.

    Dangling-row mass is redirected to the restart node each step. Returns
    (pi, converged); non-convergence hands back the last iterate with
    converged False.
    """
    cfg = cfg or WalkConfig()
    cfg.validate()
    n = W.shape[0]
    if not 0 <= restart_index < n:
        raise ValueError("restart index out of range")
    dangling = W.sum(axis=1) == 0.0
    e = np.zeros(n)
    e[restart_index] = 1.0
    pi = e.copy()
    d = cfg.damping
    for _ in range(cfg.max_iter):
        step = W.T @ pi + float(pi[dangling].sum()) * e
        new = d * step + (1.0 - d) * e
        delta = float(np.abs(new - pi).sum())
        pi = new
        if delta < cfg.tol:
            return pi, True
    warnings.warn(f"pagerank did not converge in {cfg.max_iter} iterations")
    return pi, False


def rank_causes(pi_by_node, adjacent_features):
    """Causes ordered by summed visit probability of their adjacent
    features, descending; ties resolve to the smaller cause id."""
    ranking = []
    for cause, feats in adjacent_features.items():
        score = float(sum(pi_by_node.get(f, 0.0) for f in feats))
        ranking.append((cause, score))
    ranking.sort(key=lambda cs: (-cs[1], cs[0]))
    return ranking


def rank_sample(sample, feature_ids, schema, graph, cfg=None):
    """Full per-sample walk: scores, weights, walk, cause ranking."""
    scores = feature_scores(sample, feature_ids, schema.target_feature)
    nodes, W = edge_weights(graph, scores)
    pi, converged = personalized_pagerank(
        W, nodes.index(schema.target_feature), cfg
    )
    pi_by_node = dict(zip(nodes, pi))
    return rank_causes(pi_by_node, schema.adjacent_features), pi_by_node, converged
