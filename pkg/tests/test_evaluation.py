import numpy as np
import pytest

from conftest import build_sample
from netrca import evaluation


def _labeled(i, label, provenance=None):
    return build_sample(f"r{i:04d}", [0.0, 1.0], label=label, provenance=provenance)


def test_hand_example_three_samples():
    truth = {"a": {1}, "b": {2, 3}, "c": set()}
    preds = {"a": {1}, "b": {2}, "c": {3}}
    report = evaluation.challenge_score(preds, truth)
    assert report.final_score == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert report.attainable_max == pytest.approx(1.0, abs=1e-12)
    assert report.n_samples == 3


def test_perfect_singletons_score_one():
    truth = {f"s{i}": {1 + i % 3} for i in range(9)}
    report = evaluation.challenge_score(dict(truth), truth)
    assert report.final_score == 1.0
    assert all(a == 1.0 for a in report.per_cause_accuracy.values())


def test_empty_predictions_score_zero():
    truth = {"a": {1}, "b": {2}, "c": {2, 3}}
    preds = {k: set() for k in truth}
    report = evaluation.challenge_score(preds, truth)
    assert report.final_score == 0.0


def test_one_false_positive_moves_exactly_one_over_n():
    # dyadic n: the delta is exact in floating point
    truth = {f"s{i}": {1} for i in range(8)}
    clean = evaluation.challenge_score({k: {1} for k in truth}, truth)
    dirty_preds = {k: {1} for k in truth}
    dirty_preds["s3"] = {1, 2}
    dirty = evaluation.challenge_score(dirty_preds, truth)
    assert clean.final_score - dirty.final_score == 1.0 / 8.0

    truth = {f"s{i}": {1} for i in range(9)}
    clean = evaluation.challenge_score({k: {1} for k in truth}, truth)
    dirty_preds = {k: {1} for k in truth}
    dirty_preds["s0"] = {1, 3}
    dirty = evaluation.challenge_score(dirty_preds, truth)
    assert clean.final_score - dirty.final_score == pytest.approx(
        1.0 / 9.0, abs=1e-12
    )


def test_attainable_max_is_mean_truth_size():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(1, 30))
        truth = {
            f"s{i}": set(rng.choice([1, 2, 3], size=rng.integers(0, 4), replace=False).tolist())
            for i in range(n)
        }
        report = evaluation.challenge_score({k: set(v) for k, v in truth.items()}, truth)
        expected = sum(len(t) for t in truth.values()) / n
        assert report.attainable_max == pytest.approx(expected, abs=1e-12)
        # predicting the truth scores exactly the attainable maximum
        assert report.final_score == pytest.approx(expected, abs=1e-12)


def test_key_mismatch_raises():
    truth = {"a": {1}, "b": {2}}
    with pytest.raises(ValueError, match="key mismatch"):
        evaluation.challenge_score({"a": {1}}, truth)
    with pytest.raises(ValueError, match="key mismatch"):
        evaluation.challenge_score({"a": {1}, "b": {2}, "c": {3}}, truth)
    with pytest.raises(ValueError, match="empty"):
        evaluation.challenge_score({}, {})


def test_per_cause_bookkeeping():
    truth = {"a": {1}, "b": {1, 2}, "c": set(), "d": {2}}
    preds = {"a": {1}, "b": {2}, "c": {1}, "d": {2}}
    report = evaluation.challenge_score(preds, truth)
    assert report.tp == {1: 1, 2: 2}
    assert report.fp == {1: 1, 2: 0}
    assert report.fn == {1: 1, 2: 0}
    assert report.per_cause_accuracy[1] == pytest.approx(2.0 / 4.0)
    assert report.per_cause_accuracy[2] == pytest.approx(4.0 / 4.0)
    assert report.final_score == pytest.approx((3 - 1) / 4.0)


def test_report_text_shapes():
    truth = {"a": {1}, "b": {2, 3}, "c": set()}
    preds = {"a": {1}, "b": {2}, "c": {3}}
    report = evaluation.challenge_score(preds, truth)
    text = report.text()
    assert "final_score      0.3333" in text
    assert "attainable_max   1.0000" in text
    machine = report.machine_text()
    assert "n_samples=3" in machine
    values = dict(line.split("=", 1) for line in machine.strip().splitlines())
    assert float(values["final_score"]) == report.final_score


def test_split_fraction_one_gives_empty_validation():
    samples = [_labeled(i, frozenset({1 + i % 2})) for i in range(10)]
    train, val = evaluation.stratified_split(samples, 1.0, seed=0)
    assert len(train) == 10
    assert val == []


def test_split_deterministic_under_seed():
    samples = [_labeled(i, frozenset({1 + i % 3})) for i in range(30)]
    a_train, a_val = evaluation.stratified_split(samples, 2 / 3, seed=5)
    b_train, b_val = evaluation.stratified_split(samples, 2 / 3, seed=5)
    assert [s.sample_id for s in a_train] == [s.sample_id for s in b_train]
    assert [s.sample_id for s in a_val] == [s.sample_id for s in b_val]


def test_split_partitions_labeled_samples():
    samples = [_labeled(i, frozenset({1 + i % 3})) for i in range(24)]
    samples += [_labeled(100 + i, None) for i in range(6)]
    train, val = evaluation.stratified_split(samples, 0.5, seed=1)
    train_ids = {s.sample_id for s in train}
    val_ids = {s.sample_id for s in val}
    assert not train_ids & val_ids
    labeled_ids = {s.sample_id for s in samples if s.label is not None}
    assert train_ids | val_ids == labeled_ids


def test_split_stratified_per_label_combination():
    # 12 of {1}, 6 of {2}, 6 of {1,2} at fraction 1/2: quotas land exactly
    samples = [_labeled(i, frozenset({1})) for i in range(12)]
    samples += [_labeled(20 + i, frozenset({2})) for i in range(6)]
    samples += [_labeled(40 + i, frozenset({1, 2})) for i in range(6)]
    train, _ = evaluation.stratified_split(samples, 0.5, seed=2)
    by_label = {}
    for s in train:
        by_label[tuple(sorted(s.label))] = by_label.get(tuple(sorted(s.label)), 0) + 1
    assert by_label == {(1,): 6, (2,): 3, (1, 2): 3}


def test_split_provenance_always_trains():
    samples = [_labeled(i, frozenset({1 + i % 2})) for i in range(12)]
    samples += [
        _labeled(50 + i, frozenset({1}), provenance="transfer") for i in range(4)
    ]
    for seed in range(5):
        train, val = evaluation.stratified_split(samples, 0.5, seed=seed)
        val_ids = {s.sample_id for s in val}
        for i in range(4):
            assert f"r{50 + i:04d}" not in val_ids
        assert sum(1 for s in train if s.provenance is not None) == 4


def test_split_small_stratum_falls_back_globally():
    samples = [_labeled(i, frozenset({1})) for i in range(9)]
    samples.append(_labeled(99, frozenset({1, 2, 3})))
    with pytest.warns(UserWarning, match="stratum"):
        train, val = evaluation.stratified_split(samples, 0.5, seed=3)
    assert len(train) + len(val) == 10
    assert len(train) == 5


def test_split_reference_sizes():
    # 1407 labeled at fraction 942/1407 recovers the 942/465 sizes
    counts = {frozenset({1}): 700, frozenset({2}): 400, frozenset({1, 2}): 307}
    samples = []
    i = 0
    for label, n in counts.items():
        for _ in range(n):
            samples.append(_labeled(i, label))
            i += 1
    train, val = evaluation.stratified_split(samples, 942 / 1407, seed=7)
    assert abs(len(train) - 942) <= 1
    assert abs(len(val) - 465) <= 1
    assert len(train) + len(val) == 1407


def test_split_fraction_validation():
    samples = [_labeled(i, frozenset({1})) for i in range(4)]
    with pytest.raises(ValueError):
        evaluation.stratified_split(samples, 0.0, seed=0)
    with pytest.raises(ValueError):
        evaluation.stratified_split(samples, 1.5, seed=0)
