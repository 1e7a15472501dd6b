import numpy as np
import pytest

from netrca import attribution, gbdt


def _stump(name, threshold, w_left, w_right):
    return {
        "feature": name, "threshold": threshold, "default_left": True,
        "left": {"leaf": w_left}, "right": {"leaf": w_right},
    }


def _additive_ctx(rng, p, n_stumps=3):
    """Squared-loss model that is additive by construction plus its baseline."""
    names = tuple(f"f{j}" for j in range(p))
    trees = []
    for _ in range(n_stumps):
        for name in names:
            trees.append(_stump(
                name,
                float(rng.uniform(-1.0, 1.0)),
                float(rng.uniform(-2.0, 2.0)),
                float(rng.uniform(-2.0, 2.0)),
            ))
    model = gbdt.GbdtModel(
        loss="squared", base_score=float(rng.uniform(-1, 1)),
        learning_rate=1.0, feature_names=names, trees=trees,
    )
    baseline = rng.uniform(-1.0, 1.0, size=p)
    return attribution.AttributionContext(
        model=model, baseline=baseline, feature_names=names
    )


def _marginal(ctx, i, xi):
    """Contribution of coordinate i alone, summed over its stumps."""
    total = 0.0
    for tree in ctx.model.trees:
        if tree["feature"] == ctx.feature_names[i]:
            total += tree["left"]["leaf"] if xi <= tree["threshold"] else tree["right"]["leaf"]
    return total


def test_exact_equals_additive_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = int(rng.integers(2, 7))
        ctx = _additive_ctx(rng, p)
        x = rng.uniform(-1.5, 1.5, size=p)
        phi = attribution.shapley_exact(ctx, x)
        for i in range(p):
            expected = _marginal(ctx, i, x[i]) - _marginal(ctx, i, ctx.baseline[i])
            assert phi[i] == pytest.approx(expected, abs=1e-9)


def test_approx_equals_abs_exact_on_additive_models():
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = int(rng.integers(2, 8))
        ctx = _additive_ctx(rng, p)
        x = rng.uniform(-1.5, 1.5, size=p)
        exact = attribution.shapley_exact(ctx, x)
        approx = attribution.shapley_approx(ctx, x)
        assert np.allclose(approx, np.abs(exact), atol=1e-9)
        assert np.all(approx >= 0.0)


def test_exact_efficiency():
    rng = np.random.default_rng(2)
    ctx = _additive_ctx(rng, 5)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=5)
        phi = attribution.shapley_exact(ctx, x)
        fx = gbdt.predict_matrix(ctx.model, x[None, :])[0]
        fb = gbdt.predict_matrix(ctx.model, ctx.baseline[None, :])[0]
        assert phi.sum() == pytest.approx(fx - fb, abs=1e-9)


def test_baseline_point_gives_zero():
    rng = np.random.default_rng(3)
    ctx = _additive_ctx(rng, 4)
    assert np.allclose(attribution.shapley_exact(ctx, ctx.baseline), 0.0, atol=1e-12)
    assert np.allclose(attribution.shapley_approx(ctx, ctx.baseline), 0.0, atol=1e-12)


def test_exact_symmetry_for_exchangeable_features():
    """Two coordinates with identical stumps and identical inputs tie."""
    stumps = []
    for name in ("fa", "fb"):
        stumps.append(_stump(name, 0.0, -1.0, 1.0))
    model = gbdt.GbdtModel(
        loss="squared", base_score=0.0, learning_rate=1.0,
        feature_names=("fa", "fb"), trees=stumps,
    )
    ctx = attribution.AttributionContext(
        model=model, baseline=np.zeros(2), feature_names=("fa", "fb")
    )
    phi = attribution.shapley_exact(ctx, np.array([0.7, 0.7]))
    assert phi[0] == pytest.approx(phi[1], abs=1e-9)


def test_exact_guard_rejects_wide_contexts():
    rng = np.random.default_rng(4)
    ctx = _additive_ctx(rng, 13, n_stumps=1)
    with pytest.raises(ValueError, match="shapley_approx"):
        attribution.shapley_exact(ctx, np.zeros(13))
    # the approximation itself has no width limit
    assert attribution.shapley_approx(ctx, np.zeros(13)).shape == (13,)


def test_identify_roots_cases():
    names = ("f13", "f19")
    mapping = {1: ("f13",), 2: ("f19",)}
    assert attribution.identify_roots(
        np.zeros(2), names, 0.5, mapping) == set()
    assert attribution.identify_roots(
        np.array([1.0, 0.3]), names, 0.0, mapping) == {1, 2}
    assert attribution.identify_roots(
        np.array([1.0, 0.3]), names, 0.5, mapping) == {1}


def test_identify_roots_normalizes_scale():
    names = ("f13", "f19")
    mapping = {1: ("f13",), 2: ("f19",)}
    small = attribution.identify_roots(
        np.array([2e-6, 6e-7]), names, 0.5, mapping)
    big = attribution.identify_roots(
        np.array([2e6, 6e5]), names, 0.5, mapping)
    assert small == big == {1}


def test_identify_roots_threshold_is_strict():
    names = ("f13", "f19")
    mapping = {1: ("f13",), 2: ("f19",)}
    got = attribution.identify_roots(np.array([1.0, 0.5]), names, 0.5, mapping)
    assert got == {1}, "importance exactly at theta must not qualify"


def test_identify_roots_antitone_in_theta():
    rng = np.random.default_rng(5)
    names = tuple(f"f{j}" for j in range(6))
    mapping = {1: names[:2], 2: names[2:4], 3: names[4:]}
    for _ in range(25):
        phi = rng.uniform(0.0, 1.0, size=6)
        prev = None
        for theta in (0.1, 0.3, 0.5, 0.7, 0.9):
            got = attribution.identify_roots(phi, names, theta, mapping)
            if prev is not None:
                assert got <= prev
            prev = got


def test_fit_context_constant_target():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(25, 3))
    y = np.full(25, 7.0)
    ctx = attribution.fit_context(X, y, ["f1", "f2", "f3"])
    probe = rng.normal(size=(10, 3))
    assert np.allclose(gbdt.predict_matrix(ctx.model, probe), 7.0, atol=1e-6)


def test_fit_context_baseline_is_column_means():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 3))
    y = X[:, 0] * 2.0 + rng.normal(scale=0.1, size=40)
    ctx = attribution.fit_context(X, y, ["f1", "f2", "f3"])
    order = [["f1", "f2", "f3"].index(n) for n in ctx.feature_names]
    assert np.allclose(ctx.baseline, X.mean(axis=0)[order], atol=1e-15)


def test_fit_context_deterministic():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 2))
    y = X[:, 0] - X[:, 1]
    a = attribution.fit_context(X, y, ["f1", "f2"])
    b = attribution.fit_context(X, y, ["f1", "f2"])
    assert gbdt.dumps(a.model) == gbdt.dumps(b.model)
    assert np.array_equal(a.baseline, b.baseline)


def test_fit_context_rejects_logistic_params():
    X = np.zeros((4, 1))
    with pytest.raises(ValueError, match="squared"):
        attribution.fit_context(
            X, np.zeros(4), ["f1"], params=gbdt.GbdtParams(loss="logistic")
        )


def test_context_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    X = rng.normal(size=(30, 3))
    y = X[:, 1] * 3.0
    ctx = attribution.fit_context(X, y, ["f1", "f2", "f3"])
    attribution.save(ctx, tmp_path / "attr.json")
    back = attribution.load(tmp_path / "attr.json")
    assert back.feature_names == ctx.feature_names
    assert back.reduction == ctx.reduction
    assert np.array_equal(back.baseline, ctx.baseline)
    x = rng.normal(size=3)
    assert np.array_equal(
        attribution.shapley_approx(ctx, x), attribution.shapley_approx(back, x)
    )


def test_summarize_means(default_schema):
    from conftest import build_sample

    vals = np.array([[10.0, 1.0, 4.0], [20.0, 3.0, 8.0]])
    s = build_sample("a", vals)
    X, y, names = attribution.summarize(
        [s], feature_ids=(0, 13, 15), internal_features=(13, 15),
        target_feature=0,
    )
    assert names == ["f13", "f15"]
    assert np.allclose(X, [[2.0, 6.0]])
    assert np.allclose(y, [15.0])
