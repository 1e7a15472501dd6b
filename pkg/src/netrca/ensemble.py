"""Staged combination of the per-cause classifiers with rule firings,
attribution candidates, and the graph walk, plus the ablation harness.

The combination policy is additive: stage 0 thresholds the per-cause
probabilities, later stages only ever add causes. Every addition records
which stage made it and on what evidence, so a prediction explains itself.
"""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attribution, augment, eros, evaluation, features, gbdt, graphrank, rules

log = logging.getLogger(__name__)

STAGES = ("rules", "attribution", "graph")

META_FORMAT = "netrca-variant"
META_VERSION = 1


@dataclass
class EnsemblePolicy:
    default_threshold: float = 0.5
    thresholds: dict = field(default_factory=dict)
    band_low: float = 0.3
    band_high: float = 0.7
    rule_override: bool = True
    attribution_theta: float = 0.5
    graph_margin: float = 0.0
    stages: tuple = STAGES

    def validate(self):
        if not 0.0 <= self.band_low <= self.band_high <= 1.0:
            raise ValueError("uncertainty band must satisfy 0 <= lo <= hi <= 1")
        for v in (self.default_threshold, *self.thresholds.values()):
            if not 0.0 <= v <= 1.0:
                raise ValueError("decision thresholds must be in [0, 1]")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}")

    def threshold(self, cause):
        return self.thresholds.get(cause, self.default_threshold)


@dataclass
class Prediction:
    sample_id: str
    causes: set
    base_probs: dict
    adjustments: list = field(default_factory=list)

    def log_text(self):
        return ";".join(f"{stage}+{cause}:{why}" for stage, cause, why in self.adjustments)


def decide(sample_id, base_probs, policy, rule_hits=None, attr_candidates=None,
           graph_ranking=None):
    """Apply the staged policy to one sample's signals.

    rule_hits: cause -> list of firing rules; attr_candidates: cause set
    from identify_roots; graph_ranking: [(cause, score)] descending. Each
    enabled stage must have its artifact supplied.
    """
    policy.validate()
    causes = {c for c, p in base_probs.items() if p >= policy.threshold(c)}
    pred = Prediction(sample_id=sample_id, causes=causes, base_probs=dict(base_probs))

    if "rules" in policy.stages and policy.rule_override:
        if rule_hits is None:
            raise ValueError("rules stage enabled but rule_hits missing")
        for c in sorted(rule_hits):
            firing = rule_hits[c]
            if firing and c not in causes:
                causes.add(c)
                pred.adjustments.append(
                    ("rules", c, f"{len(firing)} rule(s) fired")
                )

    if "attribution" in policy.stages:
        if attr_candidates is None:
            raise ValueError("attribution stage enabled but candidates missing")
        for c in sorted(base_probs):
            p = base_probs[c]
            if c not in causes and policy.band_low <= p <= policy.band_high \
                    and c in attr_candidates:
                causes.add(c)
                pred.adjustments.append(
                    ("attribution", c, f"prob {p:.3f} in band, importance above theta")
                )

    if "graph" in policy.stages:
        if graph_ranking is None:
            raise ValueError("graph stage enabled but ranking missing")
        if not causes and any(p > policy.band_low for p in base_probs.values()):
            if graph_ranking:
                top_cause, top_score = graph_ranking[0]
                runner = graph_ranking[1][1] if len(graph_ranking) > 1 else 0.0
                if top_score - runner >= policy.graph_margin:
                    causes.add(top_cause)
                    pred.adjustments.append(
                        ("graph", top_cause,
                         f"walk score {top_score:.4f} vs runner-up {runner:.4f}")
                    )
    return pred


@dataclass
class VariantSpec:
    name: str
    feature_mode: str = "full"  # "means" or "full"
    stages: tuple = ()
    augmented: bool = False
    attr_features: bool = False


def reference_rule_params(seed):
    """Rule mining settings of the committed reference configuration."""
    return rules.RuleParams(
        precision_min=0.98, recall_min=0.30, jaccard_max=0.5, seed=seed
    )


def reference_augment_config():
    """Transfer settings of the committed reference configuration."""
    return augment.AugmentConfig(
        similarity_threshold=0.82, max_transfers_per_cause=10
    )


def reference_policy():
    """Decision policy of the committed reference configuration."""
    return EnsemblePolicy(graph_margin=0.1)


ABLATION_VARIANTS = (
    VariantSpec("XGB", feature_mode="means"),
    VariantSpec("XGB+FE"),
    VariantSpec("XGB+FE+Graph", stages=("graph",)),
    VariantSpec(
        "NetRCA",
        stages=STAGES,
        augmented=True,
        attr_features=True,
    ),
)


@dataclass
class TrainedVariant:
    spec: VariantSpec
    schema: object
    feature_ids: tuple
    models: dict
    rulesets: dict = field(default_factory=dict)
    attr_ctx: object = None
    policy: EnsemblePolicy = field(default_factory=EnsemblePolicy)
    internal: tuple = ()

    @property
    def needs_attr(self):
        return self.attr_ctx is not None


def internal_features(graph, feature_ids, target):
    """Feature nodes with a directed path into the target, target excluded."""
    feats = set(feature_ids)
    parents = {}
    for p, c in graph.edges:
        parents.setdefault(c, set()).add(p)
    seen = set()
    frontier = [target]
    while frontier:
        node = frontier.pop()
        for p in parents.get(node, ()):
            if p in feats and p not in seen:
                seen.add(p)
                frontier.append(p)
    return tuple(sorted(seen - {target}))


def _mean_vector(sample, feature_ids):
    entries = {
        f"f{f}_mean": float(np.mean(sample.values[:, j]))
        for j, f in enumerate(feature_ids)
    }
    return features.FeatureVector(sample_id=sample.sample_id, entries=entries)


def _cause_vector(sample, feature_ids, schema, cause, mode, attr_map=None):
    if mode == "means":
        return _mean_vector(sample, feature_ids)
    return features.featurize(sample, feature_ids, schema, cause, attribution=attr_map)


def _attr_map(variant, sample):
    """Single-removal importance of each internal feature for one sample."""
    ctx = variant.attr_ctx
    red = np.mean if ctx.reduction == "mean" else np.min
    order = {f: j for j, f in enumerate(variant.feature_ids)}
    x = np.array([red(sample.values[:, order[f]]) for f in variant.internal])
    by_name = dict(zip([f"f{f}" for f in variant.internal], x))
    xo = np.array([by_name[n] for n in ctx.feature_names])
    phi = attribution.shapley_approx(ctx, xo)
    by_feat = dict(zip(ctx.feature_names, phi))
    return {f: float(by_feat[f"f{f}"]) for f in variant.internal}


def train_variant(spec, train_samples, unlabeled_samples, feature_ids, schema,
                  graph, seed, gbdt_params=None, rule_params=None,
                  augment_cfg=None, policy=None, attr_params=None):
    """Fit one ablation variant on (already interpolated) training samples."""
    if policy is None:
        policy = EnsemblePolicy(stages=spec.stages)
    else:
        policy = replace(policy, stages=spec.stages)
    gbdt_params = gbdt_params or gbdt.GbdtParams(seed=seed)
    rule_params = rule_params or rules.RuleParams(seed=seed)
    augment_cfg = augment_cfg or augment.AugmentConfig()

    training = list(train_samples)
    originals = list(train_samples)
    if spec.augmented:
        # Union first, over the verified labels only: co-occurring faults
        # share incidents, so the union is still ground truth. Transferred
        # labels are inferred, so they join afterwards and never spread
        # through the union.
        training, _ = augment.timestamp_union(
            training, augment_cfg.alignment_window
        )
        decomps = {s.sample_id: eros.decompose(s) for s in training + list(unlabeled_samples)}
        weights = eros.eros_weights(list(decomps.values()))
        report = augment.similarity_transfer(
            training, unlabeled_samples, weights, augment_cfg,
            causes=schema.causes, decomps=decomps,
        )
        transferred = [
            s for s in augment.apply_transfers(unlabeled_samples, report)
            if s.label is not None
        ]
        training = training + transferred
        log.info(
            "%s: augmentation added %d transferred samples (%d assignments)",
            spec.name, len(transferred), len(report.assignments),
        )

    variant = TrainedVariant(
        spec=spec,
        schema=schema,
        feature_ids=feature_ids,
        models={},
        policy=policy,
        internal=internal_features(graph, feature_ids, schema.target_feature),
    )

    if spec.attr_features or "attribution" in spec.stages:
        ax, ay, anames = attribution.summarize(
            training, feature_ids, variant.internal, schema.target_feature
        )
        actx_params = attr_params or gbdt.GbdtParams(
            loss="squared", n_trees=80, max_depth=3, seed=seed
        )
        variant.attr_ctx = attribution.fit_context(ax, ay, anames, actx_params)

    attr_maps = {}
    if spec.attr_features:
        for s in training:
            attr_maps[s.sample_id] = _attr_map(variant, s)

    for cause in schema.causes:
        y = np.array([1.0 if cause in s.label else 0.0 for s in training])
        vectors = []
        for s in training:
            amap = None
            if spec.attr_features:
                adj = set(schema.adjacent_features.get(cause, ()))
                amap = {f: attr_maps[s.sample_id][f]
                        for f in variant.internal if f in adj}
            vectors.append(
                _cause_vector(s, feature_ids, schema, cause, spec.feature_mode, amap)
            )
        names, X = features.build_matrix(vectors)
        n_pos = int(y.sum())
        n_neg = len(y) - n_pos
        if n_pos == 0 or n_neg == 0:
            warnings.warn(f"cause {cause}: single-class training data, constant model")
            score = 20.0 if n_neg == 0 else -20.0
            variant.models[cause] = gbdt.GbdtModel(
                loss="logistic", base_score=score,
                learning_rate=gbdt_params.learning_rate,
                feature_names=tuple(sorted(names)), trees=[],
            )
            continue
        params = gbdt.GbdtParams(
            n_trees=gbdt_params.n_trees,
            max_depth=gbdt_params.max_depth,
            learning_rate=gbdt_params.learning_rate,
            min_child_weight=gbdt_params.min_child_weight,
            l2_lambda=gbdt_params.l2_lambda,
            positive_class_weight=n_neg / n_pos,
            loss="logistic",
            seed=gbdt_params.seed,
            feature_subsample=gbdt_params.feature_subsample,
        )
        variant.models[cause] = gbdt.train(X, y, names, params)
        if "rules" in spec.stages:
            # Rules assert a precision bound, so they are mined from the
            # original labels only (transferred labels are too noisy to
            # certify precision against) and over the observable
            # statistics, never attribution columns.
            ovecs = [
                _cause_vector(s, feature_ids, schema, cause, spec.feature_mode)
                for s in originals
            ]
            oy = np.array([1.0 if cause in s.label else 0.0 for s in originals])
            rnames, rX = features.build_matrix(ovecs)
            if 0 < oy.sum() < len(oy):
                variant.rulesets[cause] = rules.mine_rules(
                    rX, oy, rnames, cause, rule_params
                )
            else:
                variant.rulesets[cause] = rules.RuleSet(cause=cause)
    return variant


def predict_samples(variant, samples, graph, walk_cfg=None, threads=None):
    """Predictions for interpolated samples under the variant's policy."""
    schema = variant.schema
    feature_ids = variant.feature_ids
    stages = variant.policy.stages
    cause_names = attribution.cause_feature_names(schema)

    def one(sample):
        attr_map = _attr_map(variant, sample) if variant.needs_attr else None
        base = {}
        rule_hits = {} if "rules" in stages else None
        for cause in schema.causes:
            amap = None
            if variant.spec.attr_features:
                adj = set(schema.adjacent_features.get(cause, ()))
                amap = {f: attr_map[f] for f in variant.internal if f in adj}
            vec = _cause_vector(
                sample, feature_ids, schema, cause, variant.spec.feature_mode, amap
            )
            base[cause] = gbdt.predict(variant.models[cause], vec.entries)
            if rule_hits is not None:
                rs = variant.rulesets.get(cause)
                _, firing = rules.apply_rules(rs, vec.entries) if rs else (False, [])
                rule_hits[cause] = firing
        candidates = None
        if "attribution" in stages:
            phi = np.array([attr_map[f] for f in variant.internal])
            names = tuple(f"f{f}" for f in variant.internal)
            candidates = attribution.identify_roots(
                phi, names, variant.policy.attribution_theta, cause_names
            )
        ranking = None
        if "graph" in stages:
            ranking, _, _ = graphrank.rank_sample(
                sample, feature_ids, schema, graph, walk_cfg
            )
        return decide(
            sample.sample_id, base, variant.policy,
            rule_hits=rule_hits, attr_candidates=candidates, graph_ranking=ranking,
        )

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, samples))
    return [one(s) for s in samples]


@dataclass
class AblationRow:
    variant: str
    final_score: float
    attainable_max: float
    per_cause_accuracy: dict
    n_validation: int


def run_ablation(dataset, seed, fraction=2.0 / 3.0, variants=ABLATION_VARIANTS,
                 gbdt_params=None, rule_params=None, augment_cfg=None,
                 policy=None, threads=None):
    """Train and score each variant on an identical stratified split.

    The default rule, transfer, and policy settings are the committed
    reference configuration: rule mining is held to a stricter precision
    bar than the module default, transfers are capped to the closest
    matches, and the graph stage only acts on a decisive ranking gap.
    """
    from .data import interpolate_sample

    if rule_params is None:
        rule_params = reference_rule_params(seed)
    if augment_cfg is None:
        augment_cfg = reference_augment_config()
    if policy is None:
        policy = reference_policy()

    interp = {s.sample_id: interpolate_sample(s) for s in dataset.samples}
    labeled = [interp[s.sample_id] for s in dataset.labeled()]
    unlabeled = [interp[s.sample_id] for s in dataset.unlabeled()]
    train_set, val_set = evaluation.stratified_split(labeled, fraction, seed)
    if not val_set:
        raise ValueError("validation split is empty")
    for cause in dataset.schema.causes:
        pos = sum(1 for s in train_set if cause in s.label)
        if pos < 2 or len(train_set) - pos < 2:
            raise ValueError(f"cause {cause}: fewer than 2 samples per class in train split")

    truth = {s.sample_id: set(s.label) for s in val_set}
    rows = []
    for spec in variants:
        variant = train_variant(
            spec, train_set, unlabeled, dataset.feature_ids, dataset.schema,
            dataset.graph, seed, gbdt_params=gbdt_params,
            rule_params=rule_params, augment_cfg=augment_cfg, policy=policy,
        )
        preds = predict_samples(variant, val_set, dataset.graph, threads=threads)
        report = evaluation.challenge_score(
            {p.sample_id: p.causes for p in preds}, truth
        )
        log.info("%s: final score %.4f", spec.name, report.final_score)
        rows.append(
            AblationRow(
                variant=spec.name,
                final_score=report.final_score,
                attainable_max=report.attainable_max,
                per_cause_accuracy=report.per_cause_accuracy,
                n_validation=report.n_samples,
            )
        )
    return rows


def ablation_table(rows):
    """Fixed-width score table, one row per variant."""
    causes = sorted({c for r in rows for c in r.per_cause_accuracy})
    head = "variant".ljust(14) + "".join(f"acc(c{c})".rjust(10) for c in causes)
    head += "final".rjust(10)
    lines = [head]
    for r in rows:
        line = r.variant.ljust(14)
        for c in causes:
            line += f"{r.per_cause_accuracy.get(c, 0.0):10.4f}"
        line += f"{r.final_score:10.4f}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def save_variant(variant, dirpath):
    """Write a trained variant as a model directory.

    Layout: meta.json (spec, policy, column order), schema.json, one
    model_c<k>.json per cause, rules.txt when the rules stage is trained,
    attribution.json when an attribution context exists.
    """
    from . import data

    out = Path(dirpath)
    out.mkdir(parents=True, exist_ok=True)
    spec = variant.spec
    pol = variant.policy
    meta = {
        "format": META_FORMAT,
        "version": META_VERSION,
        "spec": {
            "name": spec.name,
            "feature_mode": spec.feature_mode,
            "stages": list(spec.stages),
            "augmented": spec.augmented,
            "attr_features": spec.attr_features,
        },
        "policy": {
            "default_threshold": pol.default_threshold,
            "thresholds": {str(c): t for c, t in sorted(pol.thresholds.items())},
            "band_low": pol.band_low,
            "band_high": pol.band_high,
            "rule_override": pol.rule_override,
            "attribution_theta": pol.attribution_theta,
            "graph_margin": pol.graph_margin,
            "stages": list(pol.stages),
        },
        "feature_ids": list(variant.feature_ids),
        "internal": list(variant.internal),
        "causes": sorted(variant.models),
    }
    (out / "meta.json").write_text(
        json.dumps(meta, indent=1) + "\n", encoding="utf-8"
    )
    data.write_schema(variant.schema, out / "schema.json")
    for cause, model in variant.models.items():
        gbdt.save(model, out / f"model_c{cause}.json")
    if variant.rulesets:
        (out / "rules.txt").write_text(
            rules.rules_to_text(variant.rulesets.values()), encoding="utf-8"
        )
    if variant.attr_ctx is not None:
        attribution.save(variant.attr_ctx, out / "attribution.json")


def load_variant(dirpath):
    """Read back a model directory written by save_variant."""
    from . import data

    src = Path(dirpath)
    meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
    if meta.get("format") != META_FORMAT:
        raise ValueError(f"{src}: not a model directory")
    sdoc = meta["spec"]
    spec = VariantSpec(
        name=sdoc["name"],
        feature_mode=sdoc["feature_mode"],
        stages=tuple(sdoc["stages"]),
        augmented=sdoc["augmented"],
        attr_features=sdoc["attr_features"],
    )
    pdoc = meta["policy"]
    policy = EnsemblePolicy(
        default_threshold=pdoc["default_threshold"],
        thresholds={int(c): t for c, t in pdoc["thresholds"].items()},
        band_low=pdoc["band_low"],
        band_high=pdoc["band_high"],
        rule_override=pdoc["rule_override"],
        attribution_theta=pdoc["attribution_theta"],
        graph_margin=pdoc["graph_margin"],
        stages=tuple(pdoc["stages"]),
    )
    variant = TrainedVariant(
        spec=spec,
        schema=data.load_schema(src / "schema.json"),
        feature_ids=tuple(meta["feature_ids"]),
        models={
            cause: gbdt.load(src / f"model_c{cause}.json")
            for cause in meta["causes"]
        },
        policy=policy,
        internal=tuple(meta["internal"]),
    )
    rules_path = src / "rules.txt"
    if rules_path.exists():
        parsed = {
            rs.cause: rs
            for rs in rules.rules_from_text(rules_path.read_text(encoding="utf-8"))
        }
        for cause in meta["causes"]:
            variant.rulesets[cause] = parsed.get(cause, rules.RuleSet(cause=cause))
    attr_path = src / "attribution.json"
    if attr_path.exists():
        variant.attr_ctx = attribution.load(attr_path)
    return variant
