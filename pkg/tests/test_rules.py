import numpy as np
import pytest

from netrca import rules


def _planted(n=300, seed=0, threshold=1.75e5):
    """y = 1 exactly when f13_min falls at or below the threshold."""
    rng = np.random.default_rng(seed)
    f13 = rng.uniform(0.5e5, 3.0e5, size=n)
    other = rng.normal(size=n)
    X = np.stack([f13, other], axis=1)
    y = (f13 <= threshold).astype(float)
    return X, y, ["f13_min", "f0_mean"]


def test_planted_rule_is_recovered():
    X, y, names = _planted()
    params = rules.RuleParams(precision_min=0.95, recall_min=0.5, seed=0)
    rs = rules.mine_rules(X, y, names, cause=1, params=params)
    assert rs.rules, "expected at least one mined rule"
    pos_max = X[y == 1.0, 0].max()
    neg_min = X[y == 0.0, 0].min()
    equivalents = [
        r for r in rs.rules
        if len(r.clauses) == 1
        and r.clauses[0][0] == "f13_min"
        and r.clauses[0][1] == "<="
        and pos_max <= r.clauses[0][2] < neg_min
        and r.precision == 1.0
    ]
    assert equivalents, f"no single-clause equivalent in {[r.text() for r in rs.rules]}"


def test_unreachable_precision_gives_empty_set():
    X, y, names = _planted(seed=1)
    params = rules.RuleParams(precision_min=1.01, recall_min=0.05, seed=1)
    rs = rules.mine_rules(X, y, names, cause=1, params=params)
    assert rs.rules == []


def test_mined_rules_pass_independent_remeasurement():
    """Re-measure every emitted rule with a separate pass over the table."""
    rng = np.random.default_rng(2)
    for trial in range(8):
        n = int(rng.integers(80, 200))
        X = rng.normal(size=(n, 4))
        y = ((X[:, 0] < -0.2) | (X[:, 2] > 0.9)).astype(float)
        if y.sum() < 5 or y.sum() > n - 5:
            continue
        names = [f"f{j}_stat" for j in range(4)]
        params = rules.RuleParams(
            precision_min=0.8, recall_min=0.1, seed=trial, n_estimators=15
        )
        rs = rules.mine_rules(X, y, names, cause=1, params=params)
        cover_sets = []
        for rule in rs.rules:
            covered = np.ones(n, dtype=bool)
            for feat, op, thr in rule.clauses:
                col = X[:, names.index(feat)]
                covered &= (col <= thr) if op == "<=" else (col > thr)
            assert covered.any()
            precision = float(y[covered].mean())
            recall = float(covered[y == 1.0].mean())
            assert precision >= params.precision_min - 1e-12
            assert recall >= params.recall_min - 1e-12
            assert precision == pytest.approx(rule.precision)
            assert recall == pytest.approx(rule.recall)
            cover_sets.append(frozenset(np.flatnonzero(covered).tolist()))
        for i in range(len(cover_sets)):
            for j in range(i + 1, len(cover_sets)):
                inter = len(cover_sets[i] & cover_sets[j])
                union = len(cover_sets[i] | cover_sets[j])
                assert inter / union <= params.jaccard_max + 1e-12


def test_duplicate_rules_deduplicated():
    X, y, names = _planted(seed=3)
    params = rules.RuleParams(
        precision_min=0.99, recall_min=0.9, seed=3, n_estimators=40, max_depth=1
    )
    rs = rules.mine_rules(X, y, names, cause=1, params=params)
    # depth-1 bagged trees regrow essentially the same boundary; the
    # survivor set must not contain near-identical coverage twins
    covers = []
    for rule in rs.rules:
        feat, op, thr = rule.clauses[0]
        col = X[:, names.index(feat)]
        covered = (col <= thr) if op == "<=" else (col > thr)
        covers.append(frozenset(np.flatnonzero(covered).tolist()))
    for i in range(len(covers)):
        for j in range(i + 1, len(covers)):
            inter = len(covers[i] & covers[j])
            union = len(covers[i] | covers[j])
            assert inter / union <= params.jaccard_max + 1e-12


def test_single_class_is_error():
    X = np.random.default_rng(4).normal(size=(20, 2))
    with pytest.raises(ValueError, match="single-class"):
        rules.mine_rules(X, np.zeros(20), ["a", "b"], 1, rules.RuleParams())


def test_apply_rules_empty_set():
    rs = rules.RuleSet(cause=1)
    fired, firing = rules.apply_rules(rs, {"f0_mean": 1.0})
    assert fired is False
    assert firing == []


def test_apply_rules_inclusive_le():
    rule = rules.Rule(clauses=(("f0_mean", "<=", 10.0),), cause=1,
                      precision=1.0, recall=1.0)
    rs = rules.RuleSet(cause=1, rules=[rule])
    fired, firing = rules.apply_rules(rs, {"f0_mean": 10.0})
    assert fired is True
    assert firing == [rule]
    fired, _ = rules.apply_rules(rs, {"f0_mean": 10.0001})
    assert fired is False


def test_apply_rules_reports_firing_subset():
    ra = rules.Rule(clauses=(("a", ">", 5.0),), cause=1, precision=1.0, recall=0.5)
    rb = rules.Rule(clauses=(("b", "<=", 0.0),), cause=1, precision=1.0, recall=0.5)
    rs = rules.RuleSet(cause=1, rules=[ra, rb])
    fired, firing = rules.apply_rules(rs, {"a": 1.0, "b": -1.0})
    assert fired is True
    assert firing == [rb]


def test_apply_rules_missing_feature_is_error():
    rule = rules.Rule(clauses=(("zz", ">", 0.0),), cause=1, precision=1.0, recall=1.0)
    rs = rules.RuleSet(cause=1, rules=[rule])
    with pytest.raises(ValueError):
        rules.apply_rules(rs, {"a": 1.0})


def test_explain_empty_and_single():
    assert "0 rules" in rules.explain(rules.RuleSet(cause=2))
    rule = rules.Rule(
        clauses=(("f13_min", "<=", 175000.0),), cause=1,
        precision=1.0, recall=0.8, n_covered=40, n_true_positive=40,
    )
    text = rules.explain(rules.RuleSet(cause=1, rules=[rule]))
    assert "f13_min" in text
    assert "<=" in text
    assert "p=1.0" in text


def test_text_round_trip_byte_identical():
    X, y, names = _planted(seed=5)
    params = rules.RuleParams(precision_min=0.9, recall_min=0.3, seed=5)
    rs = rules.mine_rules(X, y, names, cause=1, params=params)
    assert rs.rules
    text = rules.rules_to_text([rs])
    parsed = rules.rules_from_text(text, defaults=params)
    assert rules.rules_to_text(parsed) == text
    assert rules.explain(parsed[0]) == rules.explain(rs)


def test_determinism_under_seed():
    X, y, names = _planted(seed=6)
    params = rules.RuleParams(seed=11)
    a = rules.mine_rules(X, y, names, 1, params)
    b = rules.mine_rules(X, y, names, 1, params)
    assert rules.rules_to_text([a]) == rules.rules_to_text([b])
