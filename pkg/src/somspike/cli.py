"""Command-line surface.

Subcommands: split, train, eval, ablate, ttest, gradcheck.
Exit codes: 0 success, 1 check/threshold failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from somspike import data, gradcheck, metrics, trainer
from somspike.network import load_checkpoint

GRADCHECK_THRESHOLDS = {"ssol": 1e-6, "spikehead": 1e-5, "full": 1e-5}

_CONFIG_PATH_KEYS = {"store", "report_path", "ablation_out"}


class InputError(Exception):
    pass


def _load_run_config(path: str):
    """Validated config file: TrainConfig fields plus store/report paths."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    known = {f.name for f in dataclasses.fields(trainer.TrainConfig)} | _CONFIG_PATH_KEYS
    unknown = doc.keys() - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    if "store" not in doc:
        raise InputError("config must name a 'store' path")
    paths = {k: doc.pop(k) for k in list(doc) if k in _CONFIG_PATH_KEYS}
    try:
        config = trainer.TrainConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from exc
    return config, paths


def _load_store(path: str) -> data.FeatureStore:
    try:
        return data.load_feature_store(path)
    except data.StoreError as exc:
        raise InputError(str(exc)) from exc


def _read_series(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    values = [v for chunk in text.replace(",", "\n").split() for v in [chunk.strip()] if v]
    try:
        return np.array([float(v) for v in values])
    except ValueError as exc:
        raise InputError(f"non-numeric value in {path}: {exc}") from exc


def cmd_split(args) -> int:
    store = _load_store(args.store)
    split = data.stratified_split(store.labels, seed=args.seed)
    Path(args.out).write_text(split.to_json())
    names = store.manifest.class_names
    print(f"{'class':<16}{'train':>8}{'val':>8}{'test':>8}")
    totals = {s: 0 for s in data.SUBSETS}
    for cls, name in enumerate(names):
        row = {s: int(np.sum(store.labels[split.indices(s)] == cls)) for s in data.SUBSETS}
        for s in data.SUBSETS:
            totals[s] += row[s]
        print(f"{name:<16}{row['train']:>8}{row['val']:>8}{row['test']:>8}")
    print(f"{'total':<16}{totals['train']:>8}{totals['val']:>8}{totals['test']:>8}")
    return 0


def cmd_train(args) -> int:
    config, paths = _load_run_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    store = _load_store(paths["store"])
    report = trainer.train(config, store)
    for row in report.epochs:
        print(f"epoch {row['epoch']:>3}  loss {row['train_loss']:.4f}  "
              f"val_acc {row['val_accuracy']:.2f}%  lr {row['lr']:.2e}")
    report_path = paths.get("report_path", "train_report.json")
    Path(report_path).write_text(report.to_json())
    print(f"best epoch {report.best_epoch} (val {report.best_val_accuracy:.2f}%), "
          f"test accuracy {report.test['accuracy']:.2f}%")
    return 0


def cmd_eval(args) -> int:
    try:
        model, _, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    store = _load_store(args.store)
    try:
        split = data.SplitAssignment.from_json(Path(args.split).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read split: {exc}") from exc
    idx = split.indices(args.subset)
    _, cm = trainer.evaluate(model, store.features[idx], store.labels[idx],
                             store.manifest.num_classes, store.manifest.class_names)
    print(metrics.class_report(cm).to_json())
    return 0


def cmd_ablate(args) -> int:
    config, paths = _load_run_config(args.config)
    store = _load_store(paths["store"])
    out = Path(paths.get("ablation_out", "ablation.csv"))
    rows = trainer.ablate(config, store, out_dir=out.parent)
    out.write_text(trainer.ablation_csv(rows))
    print(trainer.ablation_csv(rows), end="")
    return 0


def cmd_ttest(args) -> int:
    a = _read_series(args.a)
    b = _read_series(args.b)
    try:
        result = metrics.paired_ttest(a, b)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(result.to_json())
    return 0


def cmd_gradcheck(args) -> int:
    check = gradcheck.COMPONENT_CHECKS[args.component]
    threshold = GRADCHECK_THRESHOLDS[args.component]
    error = check(args.seed)
    print(json.dumps({"component": args.component, "seed": args.seed,
                      "max_relative_error": error, "threshold": threshold}))
    return 0 if error < threshold else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="somspike")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified 70/15/15 split of a feature store")
    p.add_argument("--store", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("train", help="run the training protocol")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a subset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", default="test", choices=data.SUBSETS)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="train all four variants and emit a CSV")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("ttest", help="two-tailed paired t-test on two accuracy series")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(fn=cmd_ttest)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--component", required=True, choices=sorted(GRADCHECK_THRESHOLDS))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
