"""Label-set growth: Eros similarity transfer onto unlabeled samples and
timestamp-overlap label union across labeled samples.

Both operations are non-destructive: they return new Sample objects and
never shrink an existing label set. Samples whose labels were produced
here carry a provenance marker so splits can keep them out of validation.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

from . import eros

log = logging.getLogger(__name__)


@dataclass
class AugmentConfig:
    similarity_threshold: float = 0.9
    max_transfers_per_cause: int | None = None
    alignment_window: float = 60.0

    def validate(self):
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in (0, 1]")
        if self.max_transfers_per_cause is not None and self.max_transfers_per_cause < 0:
            raise ValueError("max_transfers_per_cause must be >= 0")
        if self.alignment_window <= 0:
            raise ValueError("alignment_window must be positive")


@dataclass(frozen=True)
class TransferRecord:
    sample_id: str
    cause: int
    source_id: str
    similarity: float


@dataclass
class TransferReport:
    assignments: list = field(default_factory=list)
    skipped_causes: list = field(default_factory=list)

    def causes_for(self, sample_id):
        return frozenset(r.cause for r in self.assignments if r.sample_id == sample_id)


def similarity_transfer(labeled, unlabeled, weights, cfg, causes=None, decomps=None):
    """Per cause, copy the label onto unlabeled samples whose nearest
    exemplar of that cause is at least similarity_threshold away by Eros.

    Assignments per cause are capped at max_transfers_per_cause, picked in
    descending similarity order with sample_id breaking ties. A cause with
    no labeled exemplar is skipped and recorded.
    """
    cfg.validate()
    if causes is None:
        causes = sorted({c for s in labeled for c in (s.label or ())})
    if decomps is None:
        decomps = {}
    report = TransferReport()

    def decomp(sample):
        d = decomps.get(sample.sample_id)
        if d is None:
            d = eros.decompose(sample)
            decomps[sample.sample_id] = d
        return d

    unl = sorted(unlabeled, key=lambda s: s.sample_id)
    for cause in causes:
        exemplars = sorted(
            (s for s in labeled if s.label is not None and cause in s.label),
            key=lambda s: s.sample_id,
        )
        if not exemplars:
            report.skipped_causes.append((cause, "no labeled exemplars"))
            warnings.warn(f"cause {cause}: no labeled exemplars, transfer skipped")
            continue
        ex_decomps = [decomp(s) for s in exemplars]
        candidates = []
        for u in unl:
            sims = eros.eros_many(decomp(u), ex_decomps, weights)
            best = int(sims.argmax())
            if sims[best] >= cfg.similarity_threshold:
                candidates.append(
                    TransferRecord(
                        sample_id=u.sample_id,
                        cause=cause,
                        source_id=exemplars[best].sample_id,
                        similarity=float(sims[best]),
                    )
                )
        candidates.sort(key=lambda r: (-r.similarity, r.sample_id))
        if cfg.max_transfers_per_cause is not None:
            candidates = candidates[: cfg.max_transfers_per_cause]
        report.assignments.extend(candidates)
    return report


def apply_transfers(samples, report):
    """Turn transfer assignments into labeled copies of unlabeled samples."""
    gained = {}
    for r in report.assignments:
        gained.setdefault(r.sample_id, set()).add(r.cause)
    out = []
    for s in samples:
        if s.label is None and s.sample_id in gained:
            out.append(
                replace(s, label=frozenset(gained[s.sample_id]), provenance="transfer")
            )
        else:
            out.append(s)
    return out


@dataclass
class UnionReport:
    changes: list = field(default_factory=list)
    converted_negatives: list = field(default_factory=list)
    n_groups: int = 0


def timestamp_union(samples, window=60.0):
    """Union label sets across labeled samples whose episodes co-occur.

    Timestamps are bucketed into bins of `window` seconds anchored at the
    epoch; two samples co-occur when their bin ranges intersect, and
    co-occurrence groups are the connected components of that relation.
    Unlabeled samples neither give nor receive labels. Returns (new
    samples, UnionReport); a labeled-no-fault sample absorbing causes is
    flagged in the report.
    """
    if window <= 0:
        raise ValueError("alignment window must be positive")
    labeled = [s for s in samples if s.label is not None]
    spans = []
    for s in labeled:
        t0, t1 = s.span
        spans.append((int(t0 // window), int(t1 // window), s.sample_id))
    spans.sort()

    group_of = {}
    group_labels = {}
    current = -1
    reach = None
    by_id = {s.sample_id: s for s in labeled}
    for b0, b1, sid in spans:
        if reach is None or b0 > reach:
            current += 1
            reach = b1
        else:
            reach = max(reach, b1)
        group_of[sid] = current
        group_labels.setdefault(current, set()).update(by_id[sid].label)

    report = UnionReport(n_groups=current + 1)
    out = []
    for s in samples:
        if s.label is None:
            out.append(s)
            continue
        union = frozenset(group_labels[group_of[s.sample_id]])
        if union == s.label:
            out.append(s)
            continue
        report.changes.append((s.sample_id, s.label, union))
        if not s.label:
            report.converted_negatives.append(s.sample_id)
        out.append(replace(s, label=union, provenance=s.provenance or "union"))
    if report.converted_negatives:
        log.warning(
            "timestamp union converted %d fault-free samples to positive",
            len(report.converted_negatives),
        )
    return out, report
