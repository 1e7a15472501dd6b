import numpy as np
import pytest

from netrca import data, graphrank, synth


def _pearson_oracle(x, y):
    """Straightforward two-pass computation of |r| for cross-checking."""
    xm = x - x.mean()
    ym = y - y.mean()
    denom = np.sqrt((xm**2).sum()) * np.sqrt((ym**2).sum())
    return abs(float((xm * ym).sum() / denom))


def test_pearson_affine_of_target():
    f0 = np.array([1.0, 4.0, 2.0, 8.0, 5.0])
    assert graphrank.pearson_score(2 * f0 + 3, f0) == pytest.approx(1.0)
    assert graphrank.pearson_score(-f0, f0) == pytest.approx(1.0)


def test_pearson_hand_example():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = np.array([1.0, 3.0, 2.0, 4.0])
    assert graphrank.pearson_score(x, y) == pytest.approx(0.8, abs=1e-12)


def test_pearson_constant_series_scores_zero():
    x = np.ones(5)
    y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert graphrank.pearson_score(x, y) == 0.0
    assert graphrank.pearson_score(y, x) == 0.0


def test_pearson_symmetric_and_affine_invariant():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=12)
        y = rng.normal(size=12)
        s = graphrank.pearson_score(x, y)
        assert graphrank.pearson_score(y, x) == pytest.approx(s, abs=1e-15)
        a, b = float(rng.uniform(0.1, 5)), float(rng.uniform(-3, 3))
        assert graphrank.pearson_score(a * x + b, y) == pytest.approx(s, abs=1e-12)
        assert graphrank.pearson_score(-a * x + b, y) == pytest.approx(s, abs=1e-12)


def test_pearson_matches_two_pass_oracle():
    rng = np.random.default_rng(1)
    for _ in range(200):
        m = int(rng.integers(2, 40))
        x = rng.normal(size=m)
        y = rng.normal(size=m)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            continue
        assert graphrank.pearson_score(x, y) == pytest.approx(
            _pearson_oracle(x, y), abs=1e-12
        )


def test_align_intersects_timestamps():
    ts_a = np.array([0.0, 10.0, 20.0, 30.0])
    va = np.array([1.0, 2.0, 3.0, 4.0])
    ts_b = np.array([10.0, 20.0, 40.0])
    vb = np.array([5.0, 6.0, 7.0])
    xa, xb = graphrank.align(ts_a, va, ts_b, vb)
    assert np.array_equal(xa, [2.0, 3.0])
    assert np.array_equal(xb, [5.0, 6.0])


def test_edge_weights_normalized_scores():
    g = data.CausalGraph(nodes=(0, 1, 2), edges=((1, 0), (2, 0)), target_node=0)
    nodes, W = graphrank.edge_weights(g, {0: 1.0, 1: 0.6, 2: 0.2})
    assert nodes == [0, 1, 2]
    assert W[0, 1] == pytest.approx(0.75)
    assert W[0, 2] == pytest.approx(0.25)
    assert W[0].sum() == pytest.approx(1.0)
    # leaves see only the target
    assert W[1, 0] == 1.0
    assert W[2, 0] == 1.0


def test_edge_weights_zero_scores_uniform():
    g = data.CausalGraph(nodes=(0, 1, 2), edges=((1, 0), (2, 0)), target_node=0)
    _, W = graphrank.edge_weights(g, {0: 0.0, 1: 0.0, 2: 0.0})
    assert W[0, 1] == pytest.approx(0.5)
    assert W[0, 2] == pytest.approx(0.5)


def test_edge_weights_rows_stochastic_or_dangling():
    rng = np.random.default_rng(2)
    g = synth.default_graph()
    feats = [n for n in g.nodes if n < synth.CAUSE_NODE_BASE]
    scores = {n: float(rng.uniform(0, 1)) for n in feats}
    nodes, W = graphrank.edge_weights(g, scores)
    assert nodes == sorted(feats)
    sums = W.sum(axis=1)
    for total in sums:
        assert total == pytest.approx(1.0, abs=1e-12) or total == 0.0


def test_pagerank_two_node_chain():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    pi, converged = graphrank.personalized_pagerank(W, 0)
    assert converged
    assert pi[0] + pi[1] == pytest.approx(1.0, abs=1e-9)
    assert pi[0] > pi[1]
    # closed form: pi0 = 1/(1+d), pi1 = d/(1+d) at damping d
    d = graphrank.WalkConfig().damping
    assert pi[0] == pytest.approx(1.0 / (1.0 + d), abs=1e-8)
    assert pi[1] == pytest.approx(d / (1.0 + d), abs=1e-8)


def test_pagerank_tiny_damping_collapses_to_restart():
    W = np.array([[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    cfg = graphrank.WalkConfig(damping=1e-9)
    pi, _ = graphrank.personalized_pagerank(W, 0, cfg)
    assert pi[0] == pytest.approx(1.0, abs=1e-6)


def test_pagerank_star_symmetry():
    W = np.zeros((5, 5))
    W[0, 1:] = 0.25
    W[1:, 0] = 1.0
    pi, _ = graphrank.personalized_pagerank(W, 0)
    assert np.allclose(pi[1:], pi[1])
    assert pi.sum() == pytest.approx(1.0, abs=1e-9)


def test_pagerank_dangling_mass_redirects():
    # node 1 has no outgoing row: its mass must restart, not vanish
    W = np.array([[0.0, 1.0], [0.0, 0.0]])
    pi, _ = graphrank.personalized_pagerank(W, 0)
    assert pi.sum() == pytest.approx(1.0, abs=1e-9)


def test_pagerank_restart_index_out_of_range():
    W = np.eye(2)
    with pytest.raises(ValueError):
        graphrank.personalized_pagerank(W, 2)


def test_pagerank_matches_dense_solve():
    """Power iteration vs. the (I - dW^T) pi = (1-d) e linear system."""
    rng = np.random.default_rng(3)
    for trial in range(30):
        n = int(rng.integers(2, 11))
        W = np.zeros((n, n))
        for i in range(n):
            k = int(rng.integers(1, n))
            nbrs = rng.choice([j for j in range(n) if j != i],
                              size=min(k, n - 1), replace=False)
            wgt = rng.uniform(0.1, 1.0, size=len(nbrs))
            W[i, nbrs] = wgt / wgt.sum()
        d = 0.85
        pi, converged = graphrank.personalized_pagerank(
            W, 0, graphrank.WalkConfig(tol=1e-14)
        )
        assert converged
        e = np.zeros(n)
        e[0] = 1.0
        oracle = np.linalg.solve(np.eye(n) - d * W.T, (1 - d) * e)
        oracle /= oracle.sum()
        assert np.allclose(pi, oracle, atol=1e-8)


def test_rank_causes_sums_adjacent_mass():
    pi = {13: 0.25, 15: 0.25, 19: 0.25, 60: 0.25}
    adjacent = {1: (13, 15), 2: (19,), 3: (60,)}
    ranking = graphrank.rank_causes(pi, adjacent)
    assert ranking[0] == (1, pytest.approx(0.5))
    assert {c for c, _ in ranking} == {1, 2, 3}


def test_rank_causes_missing_features_score_zero():
    pi = {13: 0.6, 19: 0.4}
    adjacent = {1: (13,), 2: (19,), 3: (60,)}
    ranking = graphrank.rank_causes(pi, adjacent)
    assert ranking[-1] == (3, 0.0)


def test_rank_causes_ties_break_by_cause_id():
    pi = {13: 0.5, 19: 0.5}
    adjacent = {2: (19,), 1: (13,)}
    ranking = graphrank.rank_causes(pi, adjacent)
    assert [c for c, _ in ranking] == [1, 2]


def test_rank_sample_end_to_end(default_schema, default_graph):
    cfg = synth.SynthConfig(seed=16, n_samples=6)
    ds, _ = synth.generate(cfg, default_graph, default_schema)
    s = data.interpolate_sample(ds.samples[0])
    ranking, pi, converged = graphrank.rank_sample(
        s, ds.feature_ids, default_schema, default_graph
    )
    assert converged
    scores = [v for _, v in ranking]
    assert scores == sorted(scores, reverse=True)
    assert {c for c, _ in ranking} == set(default_schema.causes)
    assert sum(pi.values()) == pytest.approx(1.0, abs=1e-9)


def test_walk_config_validation():
    with pytest.raises(ValueError):
        graphrank.WalkConfig(damping=1.0).validate()
    with pytest.raises(ValueError):
        graphrank.WalkConfig(tol=0.0).validate()
    with pytest.raises(ValueError):
        graphrank.WalkConfig(max_iter=0).validate()
