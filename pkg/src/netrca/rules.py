"""Conjunctive rule mining from bagged decision-tree paths.

Shallow gini trees are fit on bootstrap resamples with per-tree feature
subsampling; every root-to-node path whose terminal node is majority
positive becomes a candidate rule. Candidates are re-measured on the full
table, filtered by precision/recall minima, then greedily deduplicated so
survivors cover sufficiently different sample sets (Jaccard bound).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RuleParams:
    n_estimators: int = 30
    max_depth: int = 3
    precision_min: float = 0.9
    recall_min: float = 0.05
    jaccard_max: float = 0.8
    seed: int = 0

    def validate(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        for nm in ("precision_min", "recall_min"):
            v = getattr(self, nm)
            if not 0.0 <= v <= 1.01:
                raise ValueError(f"{nm} out of range")
        if not 0.0 <= self.jaccard_max <= 1.0:
            raise ValueError("jaccard_max must be in [0, 1]")


@dataclass(frozen=True)
class Rule:
    clauses: tuple  # of (feature_name, op in {"<=", ">"}, threshold)
    cause: int
    precision: float
    recall: float
    n_covered: int = 0
    n_true_positive: int = 0

    def holds(self, x):
        for name, op, thr in self.clauses:
            if name not in x:
                raise ValueError(f"missing feature '{name}'")
            v = x[name]
            if op == "<=":
                if not v <= thr:
                    return False
            elif not v > thr:
                return False
        return True

    def text(self):
        body = " AND ".join(f"{n} {op} {thr!r}" for n, op, thr in self.clauses)
        return (
            f"{body} [p={self.precision!r}, r={self.recall!r}, "
            f"cov={self.n_covered}, tp={self.n_true_positive}]"
        )


@dataclass
class RuleSet:
    cause: int
    rules: list = field(default_factory=list)
    precision_min: float = 0.9
    recall_min: float = 0.05
    jaccard_max: float = 0.8


def _gini_tree(X, y, depth_limit):
    """Greedy gini CART on the given rows; returns nested dict nodes."""

    def gini(pos, n):
        if n == 0:
            return 0.0
        q = pos / n
        return 2.0 * q * (1.0 - q)

    def grow(rows, depth):
        n = rows.size
        pos = int(y[rows].sum())
        node = {"pos": pos, "n": n}
        if depth >= depth_limit or n < 2 or pos == 0 or pos == n:
            return node
        parent = gini(pos, n)
        best = (0.0, -1, 0.0)  # (gain, feature, threshold)
        for j in range(X.shape[1]):
            vals = X[rows, j]
            sort = np.argsort(vals, kind="stable")
            sv = vals[sort]
            sy = y[rows][sort]
            cum_pos = np.cumsum(sy)
            boundary = np.nonzero(sv[1:] > sv[:-1])[0]
            for b in boundary:
                nl = b + 1
                pl = cum_pos[b]
                gain = parent - (
                    nl / n * gini(pl, nl) + (n - nl) / n * gini(pos - pl, n - nl)
                )
                if gain > best[0] + 1e-15:
                    thr = 0.5 * (sv[b] + sv[b + 1])
                    if thr >= sv[b + 1]:
                        thr = sv[b]
                    best = (gain, j, float(thr))
        if best[1] < 0:
            return node
        _, j, thr = best
        go_left = X[rows, j] <= thr
        node.update(
            feature=j,
            threshold=thr,
            left=grow(rows[go_left], depth + 1),
            right=grow(rows[~go_left], depth + 1),
        )
        return node

    return grow(np.arange(X.shape[0]), 0)


def _paths(node, prefix):
    """Yield (clauses, node) for every node below the root."""
    if "feature" in node:
        left = prefix + ((node["feature"], "<=", node["threshold"]),)
        right = prefix + ((node["feature"], ">", node["threshold"]),)
        yield left, node["left"]
        yield from _paths(node["left"], left)
        yield right, node["right"]
        yield from _paths(node["right"], right)


def _merge_clauses(clauses, names):
    """Tightest bound per (feature, op), emitted in first-seen order."""
    merged = {}
    seq = []
    for j, op, thr in clauses:
        key = (j, op)
        if key not in merged:
            merged[key] = thr
            seq.append(key)
        elif op == "<=":
            merged[key] = min(merged[key], thr)
        else:
            merged[key] = max(merged[key], thr)
    return tuple((names[j], op, merged[(j, op)]) for j, op in seq)


def _coverage(clauses, name_pos, X):
    mask = np.ones(X.shape[0], dtype=bool)
    for name, op, thr in clauses:
        col = X[:, name_pos[name]]
        mask &= col <= thr if op == "<=" else col > thr
    return mask


def mine_rules(X, y, feature_names, cause, params):
    """Mine a RuleSet for one cause from a binary-labeled feature table."""
    params.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    pos_total = int(y.sum())
    if pos_total == 0 or pos_total == n:
        raise ValueError("single-class input for rule mining")

    rng = np.random.default_rng(params.seed)
    k = max(1, int(round(np.sqrt(p))))
    seen = {}
    name_pos = {nm: j for j, nm in enumerate(feature_names)}
    for _ in range(params.n_estimators):
        rows = rng.integers(0, n, size=n)
        cols = np.sort(rng.choice(p, size=k, replace=False))
        Xb = X[rows][:, cols]
        yb = y[rows]
        if yb.min() == yb.max():
            continue
        tree = _gini_tree(Xb, yb, params.max_depth)
        for clauses, node in _paths(tree, ()):
            if node["pos"] * 2 <= node["n"]:
                continue
            mapped = tuple((int(cols[j]), op, thr) for j, op, thr in clauses)
            merged = _merge_clauses(mapped, feature_names)
            seen.setdefault(merged, None)

    measured = []
    for clauses in seen:
        mask = _coverage(clauses, name_pos, X)
        covered = int(mask.sum())
        if covered == 0:
            continue
        tp = int((y[mask] == 1.0).sum())
        precision = tp / covered
        recall = tp / pos_total
        if precision >= params.precision_min and recall >= params.recall_min:
            measured.append(
                (
                    Rule(
                        clauses=clauses,
                        cause=cause,
                        precision=precision,
                        recall=recall,
                        n_covered=covered,
                        n_true_positive=tp,
                    ),
                    frozenset(np.nonzero(mask)[0].tolist()),
                )
            )

    measured.sort(key=lambda rc: (-rc[0].precision, -rc[0].recall, repr(rc[0].clauses)))
    kept = []
    kept_cover = []
    for rule, cover in measured:
        diverse = True
        for other in kept_cover:
            inter = len(cover & other)
            union = len(cover | other)
            if union and inter / union > params.jaccard_max:
                diverse = False
                break
        if diverse:
            kept.append(rule)
            kept_cover.append(cover)
    return RuleSet(
        cause=cause,
        rules=kept,
        precision_min=params.precision_min,
        recall_min=params.recall_min,
        jaccard_max=params.jaccard_max,
    )


def apply_rules(ruleset, x):
    """(fired, firing rules) for one sample's feature mapping."""
    firing = [r for r in ruleset.rules if r.holds(x)]
    return bool(firing), firing


def explain(ruleset):
    """Deterministic text report of the rule set."""
    lines = [f"cause {ruleset.cause}: {len(ruleset.rules)} rules"]
    for r in ruleset.rules:
        lines.append(f"  {r.text()}")
    return "\n".join(lines) + "\n"


def rules_to_text(rulesets):
    lines = []
    for rs in sorted(rulesets, key=lambda r: r.cause):
        for r in rs.rules:
            lines.append(f"cause {rs.cause}: {r.text()}")
    return "\n".join(lines) + ("\n" if lines else "")


_LINE = re.compile(
    r"^cause (\d+): (.*) \[p=([^,]+), r=([^,]+), cov=(\d+), tp=(\d+)\]$"
)
_CLAUSE = re.compile(r"^(\S+) (<=|>) (\S+)$")


def rules_from_text(text, defaults=None):
    """Parse rules_to_text output back into RuleSets keyed by cause."""
    defaults = defaults or RuleParams()
    sets = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: malformed rule line")
        cause = int(m.group(1))
        clauses = []
        for part in m.group(2).split(" AND "):
            cm = _CLAUSE.match(part.strip())
            if not cm:
                raise ValueError(f"line {lineno}: malformed clause '{part}'")
            clauses.append((cm.group(1), cm.group(2), float(cm.group(3))))
        rule = Rule(
            clauses=tuple(clauses),
            cause=cause,
            precision=float(m.group(3)),
            recall=float(m.group(4)),
            n_covered=int(m.group(5)),
            n_true_positive=int(m.group(6)),
        )
        rs = sets.setdefault(
            cause,
            RuleSet(
                cause=cause,
                precision_min=defaults.precision_min,
                recall_min=defaults.recall_min,
                jaccard_max=defaults.jaccard_max,
            ),
        )
        rs.rules.append(rule)
    return [sets[c] for c in sorted(sets)]
