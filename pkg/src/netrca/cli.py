"""Command-line entry point chaining the pipeline stages.

Every stage reads and writes plain files, so each one can be re-run or
inspected on its own:

    netrca synth    --seed 7 --out run/
    netrca featurize --data run/ --out run/
    netrca augment  --data run/ --out run/
    netrca train    --data run/ --out run/model/
    netrca predict  --model run/model/ --data run/ --out run/predictions.txt
    netrca score    --pred run/predictions.txt --truth run/truth.txt --data run/
    netrca explain  --model run/model/
    netrca ablate   --seed 7

Exit codes: 0 success, 1 usage error, 2 data or validation error. The
NETRCA_LOG environment variable sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import time
from dataclasses import fields as dc_fields, replace
from pathlib import Path

from . import attribution, augment, data, ensemble, evaluation, features, gbdt, graphrank, rules, synth

log = logging.getLogger("netrca.cli")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _setup_logging():
    name = os.environ.get("NETRCA_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_config(path):
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise data.FormatError(f"{path}: config root must be an object")
    return doc


def _coerce_into(obj, section, values):
    """Copy a config-file section onto a parameter dataclass.

    JSON has no tuples and only string keys, so containers are coerced to
    the shape of the field's current value. Returns a new instance (some
    parameter types are frozen).
    """
    known = {f.name for f in dc_fields(obj)}
    updates = {}
    for key, val in values.items():
        if key not in known:
            raise data.FormatError(f"config section '{section}': unknown field '{key}'")
        cur = getattr(obj, key)
        if isinstance(cur, tuple) and isinstance(val, list):
            val = tuple(tuple(v) if isinstance(v, list) else v for v in val)
        elif isinstance(cur, dict) and isinstance(val, dict):
            val = {int(k): v for k, v in val.items()}
        updates[key] = val
    return replace(obj, **updates) if updates else obj


def _data_paths(args):
    base = Path(args.data)
    return {
        "dataset": Path(args.dataset) if args.dataset else base / "dataset.txt",
        "schema": Path(args.schema) if args.schema else base / "schema.json",
        "labels": Path(args.labels) if args.labels else base / "labels.txt",
        "graph": Path(args.graph) if args.graph else base / "graph.txt",
    }


def _load_data(args, with_labels=True, with_graph=True):
    paths = _data_paths(args)
    labels = paths["labels"] if with_labels and paths["labels"].exists() else None
    graph = paths["graph"] if with_graph and paths["graph"].exists() else None
    return data.load_dataset(paths["dataset"], paths["schema"], labels, graph)


def _label_text(label):
    if label is None:
        return "UNLABELED"
    if not label:
        return "NONE"
    return ",".join(str(c) for c in sorted(label))


def cmd_synth(args, config):
    cfg = _coerce_into(synth.SynthConfig(), "synth", config.get("synth", {}))
    overrides = {"seed": args.seed}
    if args.n_samples is not None:
        overrides["n_samples"] = args.n_samples
    if args.unlabeled_fraction is not None:
        overrides["unlabeled_fraction"] = args.unlabeled_fraction
    if args.missing_rate is not None:
        overrides["missing_rate"] = args.missing_rate
    cfg = replace(cfg, **overrides)

    t0 = time.time()
    graph = synth.default_graph()
    schema = synth.default_schema()
    ds, truth = synth.generate(cfg, graph, schema)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data.write_dataset(ds, out / "dataset.txt")
    data.write_labels({s.sample_id: s.label for s in ds.samples}, out / "labels.txt")
    data.write_labels({k: frozenset(v) for k, v in sorted(truth.items())},
                      out / "truth.txt")
    data.write_causal_graph(graph, out / "graph.txt")
    data.write_schema(schema, out / "schema.json")
    log.info("synth: %d samples in %.2f s", len(ds.samples), time.time() - t0)
    print(f"wrote {len(ds.samples)} samples to {out}")
    return 0


def cmd_featurize(args, config):
    t0 = time.time()
    ds = _load_data(args, with_graph=False)
    causes = [args.cause] if args.cause is not None else list(ds.schema.causes)
    for c in causes:
        if c not in ds.schema.causes:
            raise data.FormatError(f"cause {c} not in schema")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    interp = [data.interpolate_sample(s) for s in ds.samples]
    for c in causes:
        vecs = [features.featurize(s, ds.feature_ids, ds.schema, c) for s in interp]
        names = list(vecs[0].entries)
        path = out / f"features_c{c}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("sample_id " + " ".join(names) + "\n")
            for v in vecs:
                row = " ".join(data._fmt(v.entries[n]) for n in names)
                fh.write(f"{v.sample_id} {row}\n")
        log.info("featurize: cause %d -> %s (%d columns)", c, path, len(names))
    log.info("featurize finished in %.2f s", time.time() - t0)
    print(f"wrote feature tables for causes {causes} to {out}")
    return 0


def cmd_augment(args, config):
    cfg = _coerce_into(augment.AugmentConfig(), "augment", config.get("augment", {}))
    overrides = {}
    if args.tau is not None:
        overrides["similarity_threshold"] = args.tau
    if args.cap is not None:
        overrides["max_transfers_per_cause"] = args.cap
    if args.window is not None:
        overrides["alignment_window"] = args.window
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()

    t0 = time.time()
    ds = _load_data(args, with_graph=False)
    interp = {s.sample_id: data.interpolate_sample(s) for s in ds.samples}
    labeled = [interp[s.sample_id] for s in ds.labeled()]
    unlabeled = [interp[s.sample_id] for s in ds.unlabeled()]

    unioned, union_report = augment.timestamp_union(labeled, cfg.alignment_window)
    t1 = time.time()
    log.info("augment: union pass over %d labeled samples in %.2f s",
             len(labeled), t1 - t0)

    from . import eros

    decomps = {s.sample_id: eros.decompose(s) for s in unioned + unlabeled}
    weights = eros.eros_weights([decomps[s.sample_id] for s in unioned])
    transfer_report = augment.similarity_transfer(
        unioned, unlabeled, weights, cfg,
        causes=ds.schema.causes, decomps=decomps,
    )
    transferred = augment.apply_transfers(unlabeled, transfer_report)
    log.info("augment: transfer pass in %.2f s", time.time() - t1)

    final = {s.sample_id: s.label for s in unioned}
    for s in transferred:
        final[s.sample_id] = s.label
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ordered = {s.sample_id: final.get(s.sample_id, s.label) for s in ds.samples}
    data.write_labels(ordered, out / "labels_augmented.txt")

    lines = []
    for sid, old, new in union_report.changes:
        lines.append(f"union {sid}: {_label_text(old)} -> {_label_text(new)}")
    for sid in union_report.converted_negatives:
        lines.append(f"union-converted-negative {sid}")
    for rec in transfer_report.assignments:
        lines.append(
            f"transfer {rec.sample_id} cause {rec.cause} "
            f"from {rec.source_id} similarity {rec.similarity!r}"
        )
    for c, reason in transfer_report.skipped_causes:
        lines.append(f"skipped cause {c}: {reason}")
    (out / "provenance.txt").write_text(
        "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
    )
    n_transfers = len(transfer_report.assignments)
    log.info("augment finished in %.2f s", time.time() - t0)
    print(f"union changed {len(union_report.changes)} samples, "
          f"{n_transfers} transfers; wrote {out / 'labels_augmented.txt'}")
    return 0


_VARIANTS_BY_NAME = {v.name.lower(): v for v in ensemble.ABLATION_VARIANTS}


def cmd_train(args, config):
    spec = _VARIANTS_BY_NAME.get(args.variant.lower())
    if spec is None:
        raise data.FormatError(
            f"unknown variant '{args.variant}' "
            f"(choose from {sorted(_VARIANTS_BY_NAME)})"
        )
    gbdt_params = _coerce_into(
        gbdt.GbdtParams(seed=args.seed), "gbdt", config.get("gbdt", {})
    )
    rule_params = _coerce_into(
        ensemble.reference_rule_params(args.seed), "rules", config.get("rules", {})
    )
    augment_cfg = _coerce_into(
        ensemble.reference_augment_config(), "augment", config.get("augment", {})
    )
    policy = _coerce_into(
        ensemble.reference_policy(), "policy", config.get("policy", {})
    )

    t0 = time.time()
    ds = _load_data(args)
    interp = {s.sample_id: data.interpolate_sample(s) for s in ds.samples}
    labeled = [interp[s.sample_id] for s in ds.labeled()]
    unlabeled = [interp[s.sample_id] for s in ds.unlabeled()]
    if not labeled:
        raise data.FormatError("no labeled samples to train on")
    log.info("train: %d labeled / %d unlabeled samples", len(labeled), len(unlabeled))
    variant = ensemble.train_variant(
        spec, labeled, unlabeled, ds.feature_ids, ds.schema, ds.graph,
        args.seed, gbdt_params=gbdt_params, rule_params=rule_params,
        augment_cfg=augment_cfg, policy=policy,
    )
    ensemble.save_variant(variant, args.out)
    log.info("train finished in %.2f s", time.time() - t0)
    print(f"trained {spec.name} on {len(labeled)} samples; model dir {args.out}")
    return 0


def cmd_predict(args, config):
    t0 = time.time()
    variant = ensemble.load_variant(args.model)
    ds = _load_data(args, with_labels=False)
    if ds.graph is None and "graph" in variant.policy.stages:
        raise data.FormatError("graph stage enabled but no graph file found")
    walk_cfg = _coerce_into(
        graphrank.WalkConfig(), "walk", config.get("walk", {})
    )
    interp = [data.interpolate_sample(s) for s in ds.samples]
    preds = ensemble.predict_samples(
        variant, interp, ds.graph, walk_cfg=walk_cfg, threads=args.threads
    )
    lines = [
        f"{p.sample_id}: {_label_text(frozenset(p.causes))} [{p.log_text()}]"
        for p in preds
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(lines)} predictions to {args.out}")
    else:
        sys.stdout.write(text)
    log.info("predict finished in %.2f s", time.time() - t0)
    return 0


_PRED_LINE = re.compile(r"^(\S+): (\S+) \[(.*)\]$")


def read_predictions(path):
    """Parse a predict output file into {sample_id: cause set}."""
    preds = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        m = _PRED_LINE.match(line)
        if not m:
            raise data.FormatError(f"{path}:{lineno}: malformed prediction line")
        sid, spec = m.group(1), m.group(2)
        if sid in preds:
            raise data.FormatError(f"{path}:{lineno}: duplicate sample id {sid}")
        if spec == "NONE":
            preds[sid] = set()
        else:
            try:
                preds[sid] = {int(tok) for tok in spec.split(",")}
            except ValueError as exc:
                raise data.FormatError(
                    f"{path}:{lineno}: malformed cause list '{spec}'"
                ) from exc
    return preds


def cmd_score(args, config):
    t0 = time.time()
    preds = read_predictions(args.pred)
    schema = data.load_schema(_data_paths(args)["schema"])
    truth_all = data.load_labels(args.truth, schema.causes)
    truth = {}
    for sid in preds:
        if sid not in truth_all:
            raise data.FormatError(f"{args.truth}: no ground truth for {sid}")
        if truth_all[sid] is None:
            raise data.FormatError(f"{args.truth}: {sid} is unlabeled")
        truth[sid] = set(truth_all[sid])
    report = evaluation.challenge_score(preds, truth)
    sys.stdout.write(report.text())
    if args.out:
        Path(args.out).write_text(report.machine_text(), encoding="utf-8")
    log.info("score finished in %.2f s", time.time() - t0)
    return 0


def cmd_explain(args, config):
    variant = ensemble.load_variant(args.model)
    if variant.rulesets:
        for cause in sorted(variant.rulesets):
            sys.stdout.write(rules.explain(variant.rulesets[cause]))
    else:
        print("no rule artifacts in this model directory")
    if args.sample is None:
        return 0
    if variant.attr_ctx is None:
        raise data.FormatError("model directory has no attribution context")
    ds = _load_data(args, with_labels=False, with_graph=False)
    by_id = {s.sample_id: s for s in ds.samples}
    if args.sample not in by_id:
        raise data.FormatError(f"sample {args.sample} not in dataset")
    sample = data.interpolate_sample(by_id[args.sample])
    amap = ensemble._attr_map(variant, sample)
    cause_feats = attribution.cause_feature_names(variant.schema)
    print(f"attribution for {args.sample} (theta {variant.policy.attribution_theta}):")
    for f, phi in sorted(amap.items(), key=lambda kv: (-kv[1], kv[0])):
        owners = ",".join(
            str(c) for c in sorted(
                c for c, names in cause_feats.items() if f"f{f}" in names
            )
        )
        print(f"  f{f}  {phi:.6f}  causes[{owners or '-'}]")
    return 0


def cmd_ablate(args, config):
    t0 = time.time()
    if _data_paths(args)["dataset"].exists():
        ds = _load_data(args)
    else:
        cfg = _coerce_into(
            synth.reference_config(args.seed), "synth", config.get("synth", {})
        )
        ds, _ = synth.generate(cfg, synth.default_graph(), synth.default_schema())
        log.info("ablate: generated reference dataset (%d samples)", len(ds.samples))
    rows = ensemble.run_ablation(ds, seed=args.seed, threads=args.threads)
    table = ensemble.ablation_table(rows)
    sys.stdout.write(table)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    log.info("ablate finished in %.2f s", time.time() - t0)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=7, help="master random seed")
    common.add_argument("--config", help="JSON file with per-stage parameter sections")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for prediction (default: serial)")

    paths = argparse.ArgumentParser(add_help=False)
    paths.add_argument("--data", default=".", help="directory with the standard file names")
    paths.add_argument("--dataset", help="override path to dataset.txt")
    paths.add_argument("--schema", help="override path to schema.json")
    paths.add_argument("--labels", help="override path to labels.txt")
    paths.add_argument("--graph", help="override path to graph.txt")

    parser = _Parser(prog="netrca", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--unlabeled-fraction", type=float)
    p.add_argument("--missing-rate", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", parents=[common, paths],
                       help="write per-cause feature tables")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cause", type=int, help="single cause id (default: all)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("augment", parents=[common, paths],
                       help="label union plus similarity transfer")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tau", type=float, help="similarity threshold")
    p.add_argument("--cap", type=int, help="max transfers per cause")
    p.add_argument("--window", type=float, help="alignment window seconds")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", parents=[common, paths], help="train a model variant")
    p.add_argument("--out", required=True, help="model directory")
    p.add_argument("--variant", default="netrca",
                   help="xgb, xgb+fe, xgb+fe+graph, or netrca")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common, paths],
                       help="emit per-sample cause predictions")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--out", help="predictions file (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", parents=[common, paths],
                       help="challenge score of a prediction file")
    p.add_argument("--pred", required=True, help="predictions file")
    p.add_argument("--truth", required=True, help="ground-truth label file")
    p.add_argument("--out", help="machine-readable report file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("explain", parents=[common, paths],
                       help="print mined rules and per-sample attribution")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--sample", help="sample id for an attribution table")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ablate", parents=[common, paths],
                       help="score the model variants on one split "
                            "(generates the reference dataset when --data "
                            "has no dataset.txt)")
    p.add_argument("--out", help="write the table here as well")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except FileNotFoundError as exc:
        print(f"netrca {args.command}: missing file: {exc}", file=sys.stderr)
        return 2
    except (data.FormatError, ValueError) as exc:
        print(f"netrca {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
