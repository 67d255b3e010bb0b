"""``artforge`` command line.

Exit codes: 0 ok, 1 other failure, 2 config/input error, 3 infeasible
generation, 4 labels reference unknown transactions, 5 unknown tx to classify.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .chain import load_snapshot
from .errors import ArtError, ConfigError
from .ml import ForestModel
from . import pipeline as pl


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out[key] = value
    return out


def _apply_set(data: dict, updates: dict) -> dict:
    """Dotted keys reach into nested objects: ``gen.n_background_txs=800``."""
    for dotted, value in updates.items():
        node = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {dotted}: {p} is not an object")
        node[leaf] = value
    return data


def build_config(args: argparse.Namespace) -> pl.PipelineConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    _apply_set(data, _parse_set(args.set))
    flags = {
        "seed": args.seed, "out": args.out, "workers": args.workers,
        "snapshot": getattr(args, "snapshot", None), "labels": getattr(args, "labels", None),
        "positives": getattr(args, "positives", None), "negatives": getattr(args, "count", None),
        "window": getattr(args, "window", None), "n_hops": getattr(args, "n_hops", None),
        "features": getattr(args, "features", None), "train_fraction": getattr(args, "train_fraction", None),
        "smote_k": getattr(args, "smote_k", None), "model": getattr(args, "model", None),
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    try:
        return pl.PipelineConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def cmd_synth(cfg: pl.PipelineConfig, args) -> int:
    summary = pl.run_synth(cfg)
    print(f"wrote {cfg.path(pl.CHAIN_FILE)}: {summary.n_txs} txs "
          f"({summary.n_coinbase} coinbase), {len(summary.positives)} planted positives")
    return 0


def cmd_sample_negatives(cfg: pl.PipelineConfig, args) -> int:
    rows = pl.run_sample_negatives(cfg)
    n_pos = sum(lab for _, lab in rows)
    print(f"wrote {cfg.path(pl.DATASET_FILE)}: {len(rows)} rows ({n_pos} positive, {len(rows) - n_pos} negative)")
    return 0


def cmd_features(cfg: pl.PipelineConfig, args) -> int:
    n = pl.run_features(cfg)
    print(f"wrote {cfg.path(pl.FEATURES_FILE)}: {n} rows x {cfg.feature_config().width} features")
    return 0


def cmd_train(cfg: pl.PipelineConfig, args) -> int:
    result = pl.run_train(cfg)
    r = result.report
    print(f"wrote {cfg.path(pl.MODEL_FILE)}; test tp={r['tp']} fp={r['fp']} tn={r['tn']} fn={r['fn']} "
          f"precision={r['precision']:.3f} recall={r['recall']:.3f} f1={r['f1']:.3f}")
    return 0


def cmd_classify(cfg: pl.PipelineConfig, args) -> int:
    model_path = pl._require(cfg.model or cfg.path(pl.MODEL_FILE), "model")
    snap = pl._require(cfg.snapshot or cfg.path(pl.CHAIN_FILE), "snapshot")
    ids = list(args.ids)
    if args.ids_file:
        with open(args.ids_file, encoding="utf-8") as fh:
            ids += [line.strip() for line in fh if line.strip()]
    try:
        model = ForestModel.load(model_path)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad model file {model_path}: {exc}") from None
    store = load_snapshot(snap)
    pl.model_feature_config(model, getattr(args, "n_hops", None))
    known = [t for t in ids if t in store.txs]
    unknown = [t for t in ids if t not in store.txs]
    for tx_id, score, label in pl.classify(model, store, known):
        print(f"{tx_id},{score!r},{label}")
    if unknown:
        print("unknown transaction(s): " + ", ".join(unknown), file=sys.stderr)
        return 5
    return 0


def _window(text: str) -> list[int]:
    lo, sep, hi = text.partition(",")
    if not sep:
        raise argparse.ArgumentTypeError("window must be START,END (unix seconds)")
    return [int(lo), int(hi)]


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (version 1)")
    common.add_argument("--seed", type=int, help="master 64-bit seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes for features/train")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key; dotted keys for nested objects")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="artforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a chain with a planted pattern")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sample-negatives", parents=[common], help="add label-0 rows sampled from a window")
    s.add_argument("--snapshot")
    s.add_argument("--positives", help="labels CSV holding the positives")
    s.add_argument("--count", type=int)
    s.add_argument("--window", type=_window, help="START,END unix seconds (default: positives' span)")
    s.set_defaults(func=cmd_sample_negatives)

    s = sub.add_parser("features", parents=[common], help="extract per-transaction feature vectors")
    s.add_argument("--snapshot")
    s.add_argument("--labels")
    s.add_argument("--n-hops", type=int)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", parents=[common], help="split, oversample, fit and evaluate a forest")
    s.add_argument("--features")
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--smote-k", type=int)
    s.add_argument("--n-hops", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("classify", parents=[common], help="score transactions with a trained model")
    s.add_argument("--model")
    s.add_argument("--snapshot")
    s.add_argument("--ids-file")
    s.add_argument("--n-hops", type=int)
    s.add_argument("ids", nargs="*")
    s.set_defaults(func=cmd_classify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
        return args.func(cfg, args)
    except ArtError as exc:
        print(f"artforge {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"artforge {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
