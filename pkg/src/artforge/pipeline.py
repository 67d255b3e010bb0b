"""Run configuration and the five pipeline stages behind the CLI.

All stages read and write plain files inside ``PipelineConfig.out``; each one
records what it consumed and produced in ``run-manifest.json`` there.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainStore, load_snapshot, write_snapshot
from .errors import ConfigError, LabelMismatchError, UnknownTxError
from .features import (FeatureConfig, read_features_csv, read_schema, write_features_csv,
                       write_schema)
from .ml import (ConfusionCounts, Dataset, ForestModel, ForestParams, fit_balanced_forest,
                 metrics_report, stratified_split)
from .synth import (GenConfig, PatternConfig, config_from_dict, config_to_dict, generate_chain,
                    inject_pattern, read_labels, write_labels, write_truth)

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
MANIFEST = "run-manifest.json"

CHAIN_FILE = "chain.chain.jsonl"
TRUTH_FILE = "chain.truth.jsonl"
POSITIVES_FILE = "positives.labels.csv"
DATASET_FILE = "dataset.labels.csv"
FEATURES_FILE = "features.csv"
SCHEMA_FILE = "features.schema"
MODEL_FILE = "model.forest.json"
METRICS_FILE = "model.metrics.json"


def derive_seed(master: int, stream: str) -> int:
    """Independent 64-bit seed for one named random stream."""
    digest = hashlib.blake2b(f"{master}:{stream}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class PipelineConfig:
    version: int = CONFIG_VERSION
    seed: int = 7
    out: str = "run"
    workers: int = 1
    # synth
    gen: dict = field(default_factory=dict)
    pattern: dict = field(default_factory=dict)
    # sample-negatives
    positives: str | None = None
    negatives: int = 150
    window: list[int] | None = None
    # features
    snapshot: str | None = None
    labels: str | None = None
    n_hops: int = 2
    hop_count: bool = True
    include_all_rings: bool = False
    # train
    features: str | None = None
    train_fraction: float = 0.8
    smote_k: int = 5
    forest: dict = field(default_factory=dict)
    # classify
    model: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if data.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {data.get('version')!r}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def override(self, **kwargs) -> "PipelineConfig":
        cfg = replace(self, **{k: v for k, v in kwargs.items() if v is not None})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.n_hops < 1:
            raise ConfigError("n_hops must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.smote_k < 1:
            raise ConfigError("smote_k must be >= 1")
        if self.negatives < 0:
            raise ConfigError("negatives must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.window is not None and (len(self.window) != 2 or self.window[0] > self.window[1]):
            raise ConfigError("window must be [start, end] with start <= end")
        for name in ("gen", "pattern", "forest"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"{name} must be a JSON object")

    # -- derived pieces -------------------------------------------------------

    def path(self, name: str) -> Path:
        return Path(self.out) / name

    def gen_config(self) -> GenConfig:
        data = {"rng_seed": derive_seed(self.seed, "gen"), **self.gen}
        return config_from_dict(GenConfig, data)

    def pattern_config(self) -> PatternConfig:
        data = {"rng_seed": derive_seed(self.seed, "pattern"), **self.pattern}
        return config_from_dict(PatternConfig, data)

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(self.n_hops, self.hop_count, self.include_all_rings)

    def forest_params(self) -> ForestParams:
        names = {f.name for f in fields(ForestParams)}
        unknown = sorted(set(self.forest) - names)
        if unknown:
            raise ConfigError(f"unknown forest keys: {unknown}")
        params = ForestParams(**self.forest)
        params.validate()
        return params

    def to_record(self) -> dict:
        """Config as stored in the manifest. ``out`` and ``workers`` do not affect
        results and are left out, so equivalent runs hash alike."""
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return d


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _rel(cfg: PipelineConfig, path) -> str:
    return os.path.relpath(os.fspath(path), cfg.out).replace(os.sep, "/")


def write_manifest(cfg: PipelineConfig, command: str, inputs: list, outputs: list, seeds: dict,
                   notes: list[str] | None = None) -> None:
    path = cfg.path(MANIFEST)
    manifest = {"artforge_version": __version__, "commands": {}}
    if path.exists():
        try:
            with open(path, encoding="utf-8") as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError):
            pass
    record = cfg.to_record()
    blob = json.dumps(record, sort_keys=True, separators=(",", ":")).encode()
    manifest.setdefault("commands", {})[command] = {
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "config": record,
        "inputs": {_rel(cfg, p): file_sha256(p) for p in inputs},
        "outputs": {_rel(cfg, p): file_sha256(p) for p in outputs},
        "seeds": seeds,
        "notes": notes or [],
    }
    manifest["commands"] = dict(sorted(manifest["commands"].items()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


# -- synth --------------------------------------------------------------------

@dataclass
class SynthSummary:
    n_txs: int
    n_coinbase: int
    positives: list[str]


def run_synth(cfg: PipelineConfig) -> SynthSummary:
    gen, pattern = cfg.gen_config(), cfg.pattern_config()
    chain = generate_chain(gen)
    chain, positives = inject_pattern(chain, pattern)
    os.makedirs(cfg.out, exist_ok=True)
    outs = [cfg.path(CHAIN_FILE), cfg.path(TRUTH_FILE), cfg.path(POSITIVES_FILE)]
    write_snapshot(chain.records, outs[0])
    write_truth(chain.truth, outs[1])
    write_labels([(t, 1) for t in positives], outs[2])
    write_manifest(cfg, "synth", [], outs, {"gen": gen.rng_seed, "pattern": pattern.rng_seed},
                   [f"gen={json.dumps(config_to_dict(gen), sort_keys=True)}",
                    f"pattern={json.dumps(config_to_dict(pattern), sort_keys=True)}"])
    n_cb = sum(1 for t in chain.records if t.is_coinbase)
    return SynthSummary(len(chain.records), n_cb, positives)


# -- sample-negatives ---------------------------------------------------------

def sample_negatives(store: ChainStore, labeled: list[tuple[str, int]], count: int,
                     window: tuple[int, int] | None, rng_seed: int) -> list[tuple[str, int]]:
    """Append ``count`` label-0 rows drawn uniformly from unlabeled, non-coinbase
    transactions whose timestamp lies in ``window`` (inclusive).

    The default window runs from the earliest to the latest positive.
    """
    if store.span is None:
        raise ConfigError("snapshot is empty")
    known = {t for t, _ in labeled}
    unknown = [t for t, _ in labeled if t not in store.txs]
    if unknown:
        raise LabelMismatchError(unknown)
    if window is None:
        stamps = [store.txs[t].timestamp for t, lab in labeled if lab == 1]
        if not stamps:
            raise ConfigError("no positives to derive the sampling window from; pass a window")
        window = (min(stamps), max(stamps))
    lo, hi = window
    if lo < store.span[0] or hi > store.span[1]:
        raise ConfigError(f"window {list(window)} lies outside snapshot span {list(store.span)}")
    candidates = [t.tx_id for t in store.txs.values()
                  if not t.is_coinbase and t.tx_id not in known and lo <= t.timestamp <= hi]
    if count > len(candidates):
        raise ConfigError(f"only {len(candidates)} candidate negatives in window, {count} requested")
    rng = np.random.default_rng(rng_seed)
    chosen = set(rng.choice(len(candidates), size=count, replace=False).tolist())
    return list(labeled) + [(candidates[i], 0) for i in sorted(chosen)]


def run_sample_negatives(cfg: PipelineConfig) -> list[tuple[str, int]]:
    snap = _require(cfg.snapshot or cfg.path(CHAIN_FILE), "snapshot")
    pos_path = _require(cfg.positives or cfg.path(POSITIVES_FILE), "positives labels")
    store = load_snapshot(snap)
    seed = derive_seed(cfg.seed, "negatives")
    rows = sample_negatives(store, read_labels(pos_path), cfg.negatives,
                            tuple(cfg.window) if cfg.window else None, seed)
    os.makedirs(cfg.out, exist_ok=True)
    out = cfg.path(DATASET_FILE)
    write_labels(rows, out)
    write_manifest(cfg, "sample-negatives", [snap, pos_path], [out], {"negatives": seed},
                   ["negatives exclude coinbase transactions and already-labeled ids"])
    return rows


# -- features -----------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(snapshot: str, fcfg: FeatureConfig) -> None:
    _WORKER["store"] = load_snapshot(snapshot)
    _WORKER["fcfg"] = fcfg


def _extract_one(tx_id: str) -> tuple[float, ...]:
    return _WORKER["fcfg"].extract(_WORKER["store"], tx_id).values


def extract_rows(store: ChainStore, ids: list[str], fcfg: FeatureConfig, workers: int = 1,
                 snapshot_path: str | os.PathLike | None = None) -> list[tuple[float, ...]]:
    """Feature values for ``ids`` in input order, optionally fanned out over processes."""
    out: list[tuple[float, ...]] = []
    if workers > 1 and snapshot_path is not None and len(ids) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(os.fspath(snapshot_path), fcfg)) as pool:
            for n, values in enumerate(pool.map(_extract_one, ids, chunksize=16), start=1):
                out.append(values)
                if n % 100 == 0:
                    log.info("features: %d/%d seeds", n, len(ids))
        return out
    for n, tx_id in enumerate(ids, start=1):
        out.append(fcfg.extract(store, tx_id).values)
        if n % 100 == 0:
            log.info("features: %d/%d seeds", n, len(ids))
    return out


def run_features(cfg: PipelineConfig) -> int:
    snap = _require(cfg.snapshot or cfg.path(CHAIN_FILE), "snapshot")
    lab_path = _require(cfg.labels or cfg.path(DATASET_FILE), "labels")
    store = load_snapshot(snap)
    labeled = read_labels(lab_path)
    unknown = [t for t, _ in labeled if t not in store.txs]
    if unknown:
        raise LabelMismatchError(unknown)
    fcfg = cfg.feature_config()
    values = extract_rows(store, [t for t, _ in labeled], fcfg, cfg.workers, snap)
    os.makedirs(cfg.out, exist_ok=True)
    out_csv, out_schema = cfg.path(FEATURES_FILE), cfg.path(SCHEMA_FILE)
    write_features_csv([(t, lab, v) for (t, lab), v in zip(labeled, values)], fcfg.width, out_csv)
    write_schema(fcfg.names(), out_schema)
    write_manifest(cfg, "features", [snap, lab_path], [out_csv, out_schema], {})
    return len(labeled)


# -- train ----------------------------------------------------------------------

def schema_path_for(features_csv: str | os.PathLike) -> Path:
    p = Path(features_csv)
    return p.with_name(p.name[: -len(".csv")] + ".schema" if p.name.endswith(".csv") else p.name + ".schema")


def load_dataset(features_csv: str | os.PathLike) -> Dataset:
    try:
        ids, labels, rows, width = read_features_csv(features_csv)
    except (ValueError, StopIteration) as exc:
        raise ConfigError(f"bad features file {features_csv}: {exc}") from None
    schema = schema_path_for(features_csv)
    if schema.is_file():
        try:
            names = read_schema(schema)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if len(names) != width:
            raise ConfigError(f"features file has {width} columns, schema sidecar lists {len(names)}")
    return Dataset(np.asarray(rows, dtype=np.float64).reshape(len(rows), width), labels, ids)


@dataclass
class TrainResult:
    model: ForestModel
    counts: ConfusionCounts
    report: dict
    train: Dataset
    test: Dataset


def train_and_evaluate(data: Dataset, cfg: PipelineConfig) -> TrainResult:
    n_neg, n_pos = data.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise ConfigError("features file must contain both classes")
    fcfg = cfg.feature_config()
    if data.width != fcfg.width:
        raise ConfigError(f"features have width {data.width}; n_hops={cfg.n_hops} implies {fcfg.width}")
    train, test = stratified_split(data, cfg.train_fraction, derive_seed(cfg.seed, "split"))
    model = fit_balanced_forest(
        train, cfg.forest_params(), cfg.smote_k, derive_seed(cfg.seed, "smote"),
        derive_seed(cfg.seed, "forest"), workers=cfg.workers,
        extra={"n_hops": cfg.n_hops, "hop_count": cfg.hop_count,
               "include_all_rings": cfg.include_all_rings},
    )
    labels, _ = model.predict_many(test.X)
    counts = ConfusionCounts.from_predictions(test.y, labels)
    return TrainResult(model, counts, metrics_report(counts), train, test)


def run_train(cfg: PipelineConfig) -> TrainResult:
    feats = _require(cfg.features or cfg.path(FEATURES_FILE), "features")
    result = train_and_evaluate(load_dataset(feats), cfg)
    os.makedirs(cfg.out, exist_ok=True)
    model_path, metrics_path = cfg.path(MODEL_FILE), cfg.path(METRICS_FILE)
    result.model.save(model_path)
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.report, fh, indent=2)
        fh.write("\n")
    inputs = [feats] + ([schema_path_for(feats)] if schema_path_for(feats).is_file() else [])
    write_manifest(cfg, "train", inputs, [model_path, metrics_path],
                   {k: derive_seed(cfg.seed, k) for k in ("split", "smote", "forest")},
                   ["SMOTE applied to training rows only, after the split"])
    return result


# -- classify -------------------------------------------------------------------

def model_feature_config(model: ForestModel, n_hops: int | None = None) -> FeatureConfig:
    """Feature layout a model was trained on; ``n_hops`` must agree if given."""
    trained = int(model.extra.get("n_hops", 2))
    fcfg = FeatureConfig(trained, bool(model.extra.get("hop_count", True)),
                         bool(model.extra.get("include_all_rings", False)))
    if n_hops is not None and n_hops != trained:
        raise ConfigError(f"model was trained with n_hops={trained}, got n_hops={n_hops}")
    if fcfg.width != model.width:
        raise ConfigError(f"model width {model.width} does not match n_hops={trained} features ({fcfg.width})")
    return fcfg


def classify(model: ForestModel, store: ChainStore, ids: list[str],
             n_hops: int | None = None) -> list[tuple[str, float, int]]:
    """``(tx_id, score, label)`` per id; raises UnknownTxError before scoring anything."""
    fcfg = model_feature_config(model, n_hops)
    unknown = [t for t in ids if t not in store.txs]
    if unknown:
        raise UnknownTxError("unknown transaction(s): " + ", ".join(unknown))
    if not ids:
        return []
    X = np.asarray([fcfg.extract(store, t).values for t in ids])
    labels, scores = model.predict_many(X)
    return [(t, float(s), int(lab)) for t, s, lab in zip(ids, scores, labels)]
