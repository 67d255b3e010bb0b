"""Synthetic ledgers with recency-biased decoys and a planted three-phase pattern.

Background generation is sequential: each transaction picks its real inputs
among still-unspent outputs and pads every ring with decoys, both drawn with
weight ``exp(-age / decoy_recency_scale)``. Which member is real is written to
a separate truth file and never into the snapshot.

The planted pattern (entering -> consolidating -> exiting) is inserted into an
existing chain without touching its transactions. Planted outputs get global
indexes above every existing one, so pre-existing records stay byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .chain import TxRecord, build_store
from .errors import ConfigError, InfeasibleError

DAY = 86_400
HOUR = 3_600
# 2017-07-20T00:00:00Z; with the default span the planted window opens ~3 Aug 2017.
DEFAULT_GENESIS = 1_500_508_800
PHASE_JITTER = 6 * HOUR


@dataclass(frozen=True)
class GenConfig:
    n_background_txs: int = 600
    ring_size: int = 5
    outputs_per_tx: int = 2
    inputs_per_tx_range: tuple[int, int] = (1, 2)
    block_interval: int = 120
    decoy_recency_scale: float = 2.0 * DAY
    rng_seed: int = 42
    # beyond the core knobs: time axis and bootstrap size
    span_seconds: int = 120 * DAY
    n_bootstrap_coinbase: int = 10
    genesis_timestamp: int = DEFAULT_GENESIS
    fee_per_input: int = 4_000_000_000
    fee_jitter: int = 1_000_000_000

    def validate(self) -> None:
        lo, hi = self.inputs_per_tx_range
        checks = [
            (self.n_background_txs >= 0, "n_background_txs must be >= 0"),
            (self.ring_size >= 1, "ring_size must be >= 1"),
            (self.outputs_per_tx >= 1, "outputs_per_tx must be >= 1"),
            (1 <= lo <= hi, "inputs_per_tx_range must satisfy 1 <= min <= max"),
            (self.block_interval >= 1, "block_interval must be >= 1"),
            (self.decoy_recency_scale > 0, "decoy_recency_scale must be > 0"),
            (0 <= self.rng_seed < 2**64, "rng_seed must be a 64-bit unsigned integer"),
            (self.span_seconds >= 0, "span_seconds must be >= 0"),
            (self.n_bootstrap_coinbase >= 1, "n_bootstrap_coinbase must be >= 1"),
            (self.genesis_timestamp >= 0, "genesis_timestamp must be >= 0"),
            (self.fee_per_input >= 0 and self.fee_jitter >= 0, "fees must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


@dataclass(frozen=True)
class PatternConfig:
    n_entering: int = 8
    n_consolidating: int = 3
    n_exiting: int = 8
    gap_enter_to_consolidate: int = 14 * DAY
    gap_consolidate_to_exit: int = 77 * DAY
    rng_seed: int = 7
    # None: ceil(n_entering / n_consolidating)
    consolidating_inputs: int | None = None
    exiting_inputs: int = 1
    # None: centre the pattern inside the chain's time span
    start_timestamp: int | None = None

    @property
    def n_positives(self) -> int:
        return self.n_entering + self.n_consolidating + self.n_exiting

    @property
    def inputs_per_consolidating(self) -> int:
        if self.consolidating_inputs is not None:
            return self.consolidating_inputs
        return math.ceil(self.n_entering / self.n_consolidating)

    def validate(self) -> None:
        for name in ("n_entering", "n_consolidating", "n_exiting"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.gap_enter_to_consolidate < 0 or self.gap_consolidate_to_exit < 0:
            raise ConfigError("phase gaps must be >= 0")
        if self.consolidating_inputs is not None and self.consolidating_inputs < 1:
            raise ConfigError("consolidating_inputs must be >= 1")
        if self.exiting_inputs < 1:
            raise ConfigError("exiting_inputs must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TruthEntry:
    tx_id: str
    ring: int
    true_member_pos: int


@dataclass
class SynthChain:
    records: list[TxRecord]
    truth: list[TruthEntry]
    config: GenConfig
    positives: list[str] = field(default_factory=list)


def config_from_dict(cls, data: dict | None):
    """Build a GenConfig/PatternConfig from a JSON mapping, rejecting unknown keys."""
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {unknown}")
    if "inputs_per_tx_range" in data:
        rng = data["inputs_per_tx_range"]
        if not isinstance(rng, (list, tuple)) or len(rng) != 2:
            raise ConfigError("inputs_per_tx_range must be a [min, max] pair")
        data["inputs_per_tx_range"] = tuple(rng)
    try:
        cfg = cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def config_to_dict(cfg) -> dict:
    out = asdict(cfg)
    if "inputs_per_tx_range" in out:
        out["inputs_per_tx_range"] = list(out["inputs_per_tx_range"])
    return out


def _tx_id(kind: str, seed: int, index: int) -> str:
    return hashlib.sha256(f"{kind}:{seed}:{index}".encode()).hexdigest()


def _weighted_pick(rng: np.random.Generator, candidates: np.ndarray, weights: np.ndarray, k: int) -> np.ndarray:
    """k distinct candidates without replacement, probability proportional to weight."""
    if k == 0:
        return candidates[:0]
    if len(candidates) < k:
        raise InfeasibleError(f"need {k} candidate outputs, only {len(candidates)} available")
    w = np.maximum(weights, np.finfo(float).tiny)
    return rng.choice(candidates, size=k, replace=False, p=w / w.sum())


class _OutputPool:
    """Growing table of produced outputs: creation time and spent flag."""

    def __init__(self, scale: float):
        self.scale = scale
        self.ts: list[int] = []
        self.gi: list[int] = []
        self.spent: set[int] = set()

    def add(self, gi: int, ts: int) -> None:
        self.gi.append(gi)
        self.ts.append(ts)

    def weights(self, now: int, limit: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        n = len(self.gi) if limit is None else limit
        gi = np.asarray(self.gi[:n], dtype=np.int64)
        age = now - np.asarray(self.ts[:n], dtype=np.float64)
        return gi, np.exp(-age / self.scale)

    def pick_spends(self, rng, now: int, k: int, limit: int | None = None) -> list[int]:
        gi, w = self.weights(now, limit)
        mask = np.array([g not in self.spent for g in gi.tolist()], dtype=bool)
        picks = _weighted_pick(rng, gi[mask], w[mask], k)
        return [int(g) for g in picks]

    def pick_decoys(self, rng, now: int, k: int, exclude: set[int], limit: int | None = None) -> list[int]:
        gi, w = self.weights(now, limit)
        mask = np.array([g not in exclude for g in gi.tolist()], dtype=bool)
        return [int(g) for g in _weighted_pick(rng, gi[mask], w[mask], k)]


def _make_ring(rng, pool: _OutputPool, now: int, real: int, ring_size: int,
               forced: int | None = None, limit: int | None = None) -> tuple[tuple[int, ...], int]:
    exclude = {real} if forced is None else {real, forced}
    n_decoys = ring_size - len(exclude)
    if n_decoys < 0:
        raise InfeasibleError("ring_size too small to hold a forced linkage member")
    decoys = pool.pick_decoys(rng, now, n_decoys, exclude, limit)
    members = sorted([real, *decoys] + ([forced] if forced is not None else []))
    return tuple(members), members.index(real)


def _fee(rng: np.random.Generator, cfg: GenConfig, n_inputs: int) -> int:
    jitter = int(rng.integers(0, cfg.fee_jitter + 1)) if cfg.fee_jitter else 0
    return cfg.fee_per_input * n_inputs + jitter


def generate_chain(cfg: GenConfig) -> SynthChain:
    """Bootstrap coinbases followed by ``n_background_txs`` ring-signed transactions."""
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    pool = _OutputPool(cfg.decoy_recency_scale)
    records: list[TxRecord] = []
    truth: list[TruthEntry] = []
    next_gi = 0

    def emit(tx_id, height, ts, fee, rings):
        nonlocal next_gi
        outs = tuple(range(next_gi, next_gi + cfg.outputs_per_tx))
        next_gi += cfg.outputs_per_tx
        records.append(TxRecord(tx_id, height, ts, fee, tuple(rings), outs))
        for g in outs:
            pool.add(g, ts)

    for h in range(cfg.n_bootstrap_coinbase):
        emit(_tx_id("coinbase", cfg.rng_seed, h), h, cfg.genesis_timestamp + h * cfg.block_interval, 0, [])

    offsets = np.sort(rng.uniform(0.0, float(cfg.span_seconds), size=cfg.n_background_txs))
    lo, hi = cfg.inputs_per_tx_range
    for i, off in enumerate(offsets):
        height = cfg.n_bootstrap_coinbase + int(off // cfg.block_interval)
        ts = cfg.genesis_timestamp + height * cfg.block_interval
        if next_gi < cfg.ring_size:
            raise InfeasibleError(
                f"only {next_gi} prior outputs for ring_size {cfg.ring_size}; raise n_bootstrap_coinbase"
            )
        k = int(rng.integers(lo, hi + 1))
        try:
            reals = pool.pick_spends(rng, ts, k)
        except InfeasibleError as exc:
            raise InfeasibleError(f"background tx {i}: unspent pool exhausted ({exc})") from None
        tx_id = _tx_id("tx", cfg.rng_seed, i)
        rings = []
        for r, real in enumerate(reals):
            members, pos = _make_ring(rng, pool, ts, real, cfg.ring_size)
            rings.append(members)
            truth.append(TruthEntry(tx_id, r, pos))
        pool.spent.update(reals)
        emit(tx_id, height, ts, _fee(rng, cfg, k), rings)

    return SynthChain(records, truth, cfg)


def spent_outputs(records: list[TxRecord], truth: list[TruthEntry]) -> set[int]:
    by_id = {t.tx_id: t for t in records}
    return {by_id[e.tx_id].rings[e.ring][e.true_member_pos] for e in truth}


@dataclass
class _Planted:
    tx_id: str
    timestamp: int
    rings: list[tuple[int, ...]]
    positions: list[int]
    outputs: tuple[int, ...]
    fee: int


def inject_pattern(chain: SynthChain, p: PatternConfig) -> tuple[SynthChain, list[str]]:
    """Insert the entering/consolidating/exiting pattern; returns (augmented chain, positives)."""
    p.validate()
    cfg = chain.config
    if not chain.records:
        raise InfeasibleError("cannot plant a pattern into an empty chain")
    store = build_store(chain.records)
    span_lo, span_hi = store.span
    half = PHASE_JITTER // 2
    total = p.gap_enter_to_consolidate + p.gap_consolidate_to_exit
    if p.start_timestamp is None:
        if span_hi - span_lo < total + PHASE_JITTER:
            raise InfeasibleError(
                f"chain spans {span_hi - span_lo}s, pattern needs {total + PHASE_JITTER}s"
            )
        start = span_lo + half + (span_hi - span_lo - total - PHASE_JITTER) // 2
    else:
        start = p.start_timestamp
        if start - half < span_lo or start + total + half > span_hi:
            raise InfeasibleError("pattern window does not fit inside the chain span")

    rng = np.random.default_rng(p.rng_seed)
    pool = _OutputPool(cfg.decoy_recency_scale)
    existing = list(store.txs.values())
    for tx in existing:
        for g in tx.outputs:
            pool.add(g, tx.timestamp)
    pool.spent = spent_outputs(chain.records, chain.truth)
    ts_sorted = [tx.timestamp for tx in existing]
    next_gi = max(store.producer) + 1

    out_ts = np.asarray(pool.ts)

    def visible(now: int) -> int:
        # existing outputs created at or before `now`; pool is in snapshot order
        return int(np.searchsorted(out_ts, now, side="right"))

    def phase_times(centre: int, n: int) -> list[int]:
        return sorted(int(t) for t in centre + rng.integers(-half, half + 1, size=n))

    planted: list[_Planted] = []

    def plant(kind: str, index: int, now: int, rings, positions, n_inputs) -> _Planted:
        nonlocal next_gi
        outs = tuple(range(next_gi, next_gi + cfg.outputs_per_tx))
        next_gi += cfg.outputs_per_tx
        tx = _Planted(_tx_id(kind, p.rng_seed, index), now, rings, positions, outs, _fee(rng, cfg, n_inputs))
        planted.append(tx)
        return tx

    lo, hi = cfg.inputs_per_tx_range

    def background_ring(now: int, forced: int | None = None):
        limit = visible(now)
        real = pool.pick_spends(rng, now, 1, limit)[0]
        pool.spent.add(real)
        return _make_ring(rng, pool, now, real, cfg.ring_size, forced, limit)

    def linked_ring(now: int, real: int):
        pool.spent.add(real)
        return _make_ring(rng, pool, now, real, cfg.ring_size, None, visible(now))

    # entering: ordinary-looking spends of unspent outputs
    entering = []
    for i, now in enumerate(phase_times(start, p.n_entering)):
        k = int(rng.integers(lo, hi + 1))
        rings, positions = zip(*(background_ring(now) for _ in range(k)))
        entering.append(plant("enter", i, now, list(rings), list(positions), k))

    def linked_phase(kind: str, sources: list[_Planted], centre: int, n: int, n_inputs: int):
        made = []
        slot = 0
        for j, now in enumerate(phase_times(centre, n)):
            rings, positions = [], []
            for _ in range(n_inputs):
                src = sources[slot % len(sources)]
                out_idx = slot // len(sources)
                if out_idx < len(src.outputs):
                    ring, pos = linked_ring(now, src.outputs[out_idx])
                else:
                    # source outputs exhausted: spend elsewhere, keep the link as a decoy
                    ring, pos = background_ring(now, forced=src.outputs[0])
                rings.append(ring)
                positions.append(pos)
                slot += 1
            made.append(plant(kind, j, now, rings, positions, n_inputs))
        return made

    consolidating = linked_phase(
        "consolidate", entering, start + p.gap_enter_to_consolidate, p.n_consolidating,
        p.inputs_per_consolidating,
    )
    exiting = linked_phase("exit", consolidating, start + total, p.n_exiting, p.exiting_inputs)

    # merge: each planted tx goes after every existing tx with timestamp <= its own
    by_slot: dict[int, list[_Planted]] = {}
    for tx in sorted(planted, key=lambda t: t.timestamp):
        slot = int(np.searchsorted(ts_sorted, tx.timestamp, side="right"))
        by_slot.setdefault(slot, []).append(tx)

    merged: list[TxRecord] = []
    new_truth = list(chain.truth)
    for slot in range(len(existing) + 1):
        for tx in by_slot.get(slot, []):
            prev = existing[slot - 1] if slot > 0 else existing[0]
            height = prev.height + max(0, tx.timestamp - prev.timestamp) // cfg.block_interval
            if slot < len(existing):
                height = min(height, existing[slot].height)
            merged.append(TxRecord(tx.tx_id, height, tx.timestamp, tx.fee, tuple(tx.rings), tx.outputs))
            new_truth.extend(TruthEntry(tx.tx_id, r, pos) for r, pos in enumerate(tx.positions))
        if slot < len(existing):
            merged.append(existing[slot])

    positives = [t.tx_id for t in entering + consolidating + exiting]
    out = SynthChain(merged, new_truth, cfg, list(chain.positives) + positives)
    return out, positives


def decoy_ages(chain: SynthChain) -> np.ndarray:
    """Age (seconds) of every decoy member at the time of the referencing tx."""
    store = build_store(chain.records)
    ages = []
    for e in chain.truth:
        tx = store.txs[e.tx_id]
        for pos, g in enumerate(tx.rings[e.ring]):
            if pos != e.true_member_pos:
                ages.append(tx.timestamp - store.txs[store.producer[g][0]].timestamp)
    return np.asarray(ages, dtype=float)


def write_truth(truth: list[TruthEntry], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in truth:
            fh.write(json.dumps({"tx_id": e.tx_id, "ring": e.ring, "true_member_pos": e.true_member_pos},
                                separators=(",", ":")))
            fh.write("\n")


def read_truth(path: str | os.PathLike) -> list[TruthEntry]:
    with open(path, encoding="utf-8") as fh:
        return [TruthEntry(**json.loads(line)) for line in fh if line.strip()]


def write_labels(rows: list[tuple[str, int]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tx_id", "label"])
        for tx_id, label in rows:
            w.writerow([tx_id, int(label)])


def read_labels(path: str | os.PathLike) -> list[tuple[str, int]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if header != ["tx_id", "label"]:
            raise ConfigError(f"{path}: expected header 'tx_id,label', got {header}")
        rows = []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or row[1] not in ("0", "1"):
                raise ConfigError(f"{path}:{n}: bad label row {row}")
            rows.append((row[0], int(row[1])))
    return rows


def with_seed(cfg, seed: int):
    return replace(cfg, rng_seed=seed)
