"""Command-line interface.

Four subcommands cover the pipeline end to end::

    dippm dataset --n 1000 --families mlp,vggish,resnetish --seed 7 --out d.jsonl
    dippm train   --data d.jsonl --epochs 500 --seed 7 --out model.json
    dippm predict --model model.json --graph net.json [--batch 8]
    dippm eval    --model model.json --data d.jsonl

stdout carries machine-readable output only: JSON objects for dataset/predict/
eval and `key=value` lines for train. Diagnostics go to stderr. Exit codes:
0 success, 1 runtime failure, 2 usage error. When --seed is omitted the
DIPPM_SEED environment variable is used, defaulting to 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import dataset as ds
from . import gnn, graph_ir, featurize
from .errors import DippmError
from .mig import MigProfile, mig_profile
from .numerics import DEFAULT_LEARNING_RATE


@dataclass
class PredictReport:
    latency_ms: float
    memory_mb: float
    energy_j: float
    mig: MigProfile | None
    model_name: str
    vocab_version: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "latency_ms": self.latency_ms,
                "memory_mb": self.memory_mb,
                "energy_j": self.energy_j,
                "mig": self.mig.label if self.mig is not None else None,
                "model_name": self.model_name,
                "vocab_version": self.vocab_version,
            }
        )


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    return int(os.environ.get("DIPPM_SEED", "0"))


def _parse_families(text: str) -> dict[str, float]:
    mix: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            family, weight = part.split(":", 1)
            mix[family.strip()] = float(weight)
        else:
            mix[part] = 1.0
    return mix


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dippm",
        description="Predict inference latency, memory, and energy of a computation graph "
        "and suggest an A100 MIG profile.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dataset = sub.add_parser("dataset", help="generate a labeled synthetic dataset (JSONL)")
    p_dataset.add_argument("--n", type=int, required=True, help="number of records")
    p_dataset.add_argument("--families", type=str, default="mlp,vggish,resnetish",
                           help="comma list, optionally weighted: mlp:2,vggish:1")
    p_dataset.add_argument("--seed", type=int, default=None)
    p_dataset.add_argument("--out", type=str, required=True)
    p_dataset.set_defaults(func=cmd_dataset)

    p_train = sub.add_parser("train", help="train on a dataset with a 70/15/15 split")
    p_train.add_argument("--data", type=str, required=True)
    p_train.add_argument("--epochs", type=int, default=10)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--lr", type=float, default=DEFAULT_LEARNING_RATE)
    p_train.add_argument("--baseline", choices=["mlp"], default=None,
                         help="train the static-features-only baseline instead")
    p_train.add_argument("--hidden", type=int, default=gnn.DEFAULT_HIDDEN)
    p_train.add_argument("--out", type=str, required=True)
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="predict one graph and suggest a MIG profile")
    p_predict.add_argument("--model", type=str, required=True)
    p_predict.add_argument("--graph", type=str, required=True)
    p_predict.add_argument("--batch", type=int, default=None,
                           help="re-run shape inference and featurization at this batch size")
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="report per-target MAPE of a model on a dataset")
    p_eval.add_argument("--model", type=str, required=True)
    p_eval.add_argument("--data", type=str, required=True)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def cmd_dataset(args) -> int:
    if args.n < 1:
        print("error: --n must be at least 1", file=sys.stderr)
        return 2
    records = ds.synth_dataset(args.n, _parse_families(args.families), seed=_resolve_seed(args.seed))
    ds.write_dataset(records, args.out)
    histogram: dict[str, int] = {}
    for record in records:
        family = record.model_name.split("-", 1)[0]
        histogram[family] = histogram.get(family, 0) + 1
    print(json.dumps({"n": len(records), "families": {k: histogram[k] for k in sorted(histogram)}}))
    return 0


def cmd_train(args) -> int:
    seed = _resolve_seed(args.seed)
    records = ds.read_dataset(args.data)
    train_set, val_set, test_set = ds.split(records, ds.SplitSpec(seed=seed))
    config = gnn.TrainConfig(epochs=args.epochs, lr=args.lr, seed=seed, hidden=args.hidden)
    fit = gnn.train_mlp if args.baseline == "mlp" else gnn.train
    model, history = fit(train_set, val_set, config)
    for entry in history:
        val_mape = entry["val_mape"]
        print(f"epoch={entry['epoch']} train_mape={entry['train_mape']} "
              f"val_mape={val_mape if val_mape is not None else 'nan'}")
    gnn.save_model(model, args.out)
    if test_set:
        preds = [gnn.predict_record(model, record) for record in test_set]
        result = ds.mape(preds, [record.target for record in test_set])
        print(f"test_mape={result.overall}")
    return 0


def cmd_predict(args) -> int:
    if args.batch is not None and args.batch < 1:
        print("error: --batch must be at least 1", file=sys.stderr)
        return 2
    model = gnn.load_model(args.model)
    try:
        text = Path(args.graph).read_text(encoding="utf-8")
    except OSError as exc:
        raise DippmError(f"cannot read graph from {args.graph}: {exc}") from exc
    graph = graph_ir.parse_graph_json(text)
    if args.batch is not None:
        graph = graph_ir.with_batch_size(graph, args.batch)
    encoding = featurize.create_graph_encoding(graph)
    fs = featurize.static_features(graph)
    target = gnn.predict(model, encoding, fs)
    report = PredictReport(
        latency_ms=target.latency_ms,
        memory_mb=target.memory_mb,
        energy_j=target.energy_j,
        mig=mig_profile(target.memory_mb),
        model_name=graph.name,
        vocab_version=model.vocab_version,
    )
    print(report.to_json())
    return 0


def cmd_eval(args) -> int:
    model = gnn.load_model(args.model)
    records = ds.read_dataset(args.data)
    if not records:
        print("error: dataset is empty", file=sys.stderr)
        return 1
    preds = [gnn.predict_record(model, record) for record in records]
    result = ds.mape(preds, [record.target for record in records])
    print(json.dumps({
        "mape": {
            "latency": result.latency,
            "memory": result.memory,
            "energy": result.energy,
            "overall": result.overall,
        },
        "n": len(records),
    }))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except DippmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
