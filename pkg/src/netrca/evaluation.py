"""Challenge scoring and split management.

The challenge metric adds one mark per true-positive cause and removes one
per false positive, normalized by sample count. Its maximum for a given
truth assignment is the mean truth-set size, so the report carries that
attainable maximum alongside the final score.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ScoreReport:
    final_score: float
    attainable_max: float
    n_samples: int
    per_cause_accuracy: dict = field(default_factory=dict)
    tp: dict = field(default_factory=dict)
    fp: dict = field(default_factory=dict)
    fn: dict = field(default_factory=dict)

    def text(self):
        lines = [
            f"samples          {self.n_samples}",
            f"final_score      {self.final_score:.4f}",
            f"attainable_max   {self.attainable_max:.4f}",
        ]
        for c in sorted(self.per_cause_accuracy):
            lines.append(
                f"cause {c}: accuracy {self.per_cause_accuracy[c]:.4f}  "
                f"tp {self.tp[c]}  fp {self.fp[c]}  fn {self.fn[c]}"
            )
        return "\n".join(lines) + "\n"

    def machine_text(self):
        lines = [
            f"n_samples={self.n_samples}",
            f"final_score={self.final_score!r}",
            f"attainable_max={self.attainable_max!r}",
        ]
        for c in sorted(self.per_cause_accuracy):
            lines.append(f"cause_{c}_accuracy={self.per_cause_accuracy[c]!r}")
            lines.append(f"cause_{c}_tp={self.tp[c]}")
            lines.append(f"cause_{c}_fp={self.fp[c]}")
            lines.append(f"cause_{c}_fn={self.fn[c]}")
        return "\n".join(lines) + "\n"


def challenge_score(preds, truth):
    """(sum TP - sum FP) / n plus per-cause accuracy bookkeeping.

    preds and truth map sample_id -> cause set and must share key sets.
    """
    if set(preds) != set(truth):
        missing = set(truth) ^ set(preds)
        raise ValueError(f"prediction/truth key mismatch: {sorted(missing)[:5]}")
    if not truth:
        raise ValueError("empty truth mapping")
    n = len(truth)
    causes = sorted({c for s in truth.values() for c in s} | {c for s in preds.values() for c in s})
    tp_total = 0
    fp_total = 0
    tp = {c: 0 for c in causes}
    fp = {c: 0 for c in causes}
    fn = {c: 0 for c in causes}
    match = {c: 0 for c in causes}
    for sid, t in truth.items():
        p = preds[sid]
        tp_total += len(p & t)
        fp_total += len(p - t)
        for c in causes:
            in_p, in_t = c in p, c in t
            if in_p and in_t:
                tp[c] += 1
            elif in_p:
                fp[c] += 1
            elif in_t:
                fn[c] += 1
            if in_p == in_t:
                match[c] += 1
    return ScoreReport(
        final_score=(tp_total - fp_total) / n,
        attainable_max=sum(len(t) for t in truth.values()) / n,
        n_samples=n,
        per_cause_accuracy={c: match[c] / n for c in causes},
        tp=tp,
        fp=fp,
        fn=fn,
    )


def stratified_split(samples, fraction, seed):
    """Split labeled samples into (train, validation) at the given fraction.

    Strata are the distinct label sets; each stratum contributes its
    largest-remainder share of the train quota. Samples with augmentation
    provenance always land in train. A stratum smaller than 2 triggers a
    global (unstratified) split with a warning. Unlabeled samples are
    ignored entirely.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    labeled = [s for s in samples if s.label is not None]
    forced = [s for s in labeled if s.provenance is not None]
    pool = [s for s in labeled if s.provenance is None]
    if not pool:
        return forced, []

    rng = np.random.default_rng(seed)
    strata = {}
    for s in pool:
        strata.setdefault(tuple(sorted(s.label)), []).append(s)
    target_train = int(round(fraction * len(pool)))

    if min(len(v) for v in strata.values()) < 2:
        warnings.warn("stratum smaller than 2 samples, falling back to global split")
        ordered = sorted(pool, key=lambda s: s.sample_id)
        perm = rng.permutation(len(ordered))
        chosen = {ordered[i].sample_id for i in perm[:target_train]}
    else:
        keys = sorted(strata)
        quotas = {k: fraction * len(strata[k]) for k in keys}
        base = {k: int(np.floor(quotas[k])) for k in keys}
        leftover = target_train - sum(base.values())
        by_remainder = sorted(keys, key=lambda k: (-(quotas[k] - base[k]), k))
        for k in by_remainder[: max(0, leftover)]:
            base[k] += 1
        chosen = set()
        for k in keys:
            members = sorted(strata[k], key=lambda s: s.sample_id)
            perm = rng.permutation(len(members))
            take = min(base[k], len(members))
            chosen.update(members[i].sample_id for i in perm[:take])

    train = forced + [s for s in pool if s.sample_id in chosen]
    val = [s for s in pool if s.sample_id not in chosen]
    return train, val
