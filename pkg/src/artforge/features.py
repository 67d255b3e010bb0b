"""Per-seed feature vectors: a 0-hop block plus one block per hop level.

Layout for ``n_hops`` levels (all summaries in mean, std, min, max, median order)::

    0-hop (10): n_rings, ring_size_mean, n_outputs, fee, unique_ring_members,
                member_age x5          # seed ts - producer ts, per ring member occurrence
    hop i (16): hop_tx_count, rings_per_tx x5, ring_size x5 (pooled over rings),
                delay x5               # hop tx ts - seed ts

Empty sets summarize to -1.0 in every field; genuine values are never negative.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

from .chain import ChainStore
from .graph import build_art_graph, hop_sets

SENTINEL = -1.0
SUMMARY_FIELDS = ("mean", "std", "min", "max", "median")
ZERO_HOP_WIDTH = 10


class StatSummary(NamedTuple):
    min: float
    max: float
    mean: float
    std: float
    median: float

    def features(self) -> tuple[float, float, float, float, float]:
        return (self.mean, self.std, self.min, self.max, self.median)


EMPTY_SUMMARY = StatSummary(SENTINEL, SENTINEL, SENTINEL, SENTINEL, SENTINEL)


def stats(values) -> StatSummary:
    """min/max/mean/population std/median; the all -1 sentinel for no values."""
    xs = sorted(float(v) for v in values)
    n = len(xs)
    if n == 0:
        return EMPTY_SUMMARY
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / n
    mid = n // 2
    median = xs[mid] if n % 2 else (xs[mid - 1] + xs[mid]) / 2.0
    return StatSummary(xs[0], xs[-1], mean, math.sqrt(var), median)


@dataclass(frozen=True)
class FeatureConfig:
    n_hops: int = 2
    hop_count: bool = True
    include_all_rings: bool = False

    @property
    def hop_width(self) -> int:
        return 16 if self.hop_count else 15

    @property
    def width(self) -> int:
        return ZERO_HOP_WIDTH + self.hop_width * self.n_hops

    def names(self) -> list[str]:
        return feature_names(self.n_hops, self.hop_count)

    def extract(self, store: ChainStore, seed: str) -> FeatureVector:
        return extract_features(store, seed, self.n_hops, hop_count=self.hop_count,
                                include_all_rings=self.include_all_rings)


@dataclass(frozen=True)
class FeatureVector:
    seed: str
    n_hops: int
    values: tuple[float, ...]


def feature_names(n_hops: int, hop_count: bool = True) -> list[str]:
    names = ["n_rings", "ring_size_mean", "n_outputs", "fee", "unique_ring_members"]
    names += [f"member_age_{s}" for s in SUMMARY_FIELDS]
    for i in range(1, n_hops + 1):
        if hop_count:
            names.append(f"hop{i}_tx_count")
        for block in ("rings_per_tx", "ring_size", "delay"):
            names += [f"hop{i}_{block}_{s}" for s in SUMMARY_FIELDS]
    return names


def zero_hop_features(store: ChainStore, seed: str) -> tuple[float, ...]:
    tx = store.tx(seed)
    members = [g for ring in tx.rings for g in ring]
    ring_size = sum(len(r) for r in tx.rings) / len(tx.rings) if tx.rings else SENTINEL
    ages = [tx.timestamp - store.txs[store.producer[g][0]].timestamp for g in members]
    head = (float(len(tx.rings)), float(ring_size), float(len(tx.outputs)), float(tx.fee),
            float(len(set(members))))
    return head + stats(ages).features()


def hop_block(store: ChainStore, seed_ts: int, hop_txs: list[str], hop_count: bool = True) -> tuple[float, ...]:
    recs = [store.txs[t] for t in hop_txs]
    block: tuple[float, ...] = (float(len(recs)),) if hop_count else ()
    block += stats([len(r.rings) for r in recs]).features()
    block += stats([len(ring) for r in recs for ring in r.rings]).features()
    block += stats([r.timestamp - seed_ts for r in recs]).features()
    return block


def extract_features(store: ChainStore, seed: str, n_hops: int = 2, *, hop_count: bool = True,
                     include_all_rings: bool = False) -> FeatureVector:
    values = zero_hop_features(store, seed)
    graph = build_art_graph(store, seed, n_hops, include_all_rings=include_all_rings)
    seed_ts = store.txs[seed].timestamp
    for hop_txs in hop_sets(graph)[1:]:
        values += hop_block(store, seed_ts, hop_txs, hop_count)
    return FeatureVector(seed, n_hops, values)


# -- files ------------------------------------------------------------------

def format_value(x: float) -> str:
    return repr(float(x))


def column_names(width: int) -> list[str]:
    return [f"f{i:03d}" for i in range(width)]


def write_features_csv(rows: list[tuple[str, int, tuple[float, ...]]], width: int,
                       path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tx_id", "label", *column_names(width)])
        for tx_id, label, values in rows:
            if len(values) != width:
                raise ValueError(f"{tx_id}: {len(values)} features, expected {width}")
            w.writerow([tx_id, int(label), *(format_value(v) for v in values)])


def read_features_csv(path: str | os.PathLike) -> tuple[list[str], list[int], list[list[float]], int]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["tx_id", "label"]:
            raise ValueError(f"{path}: header must start with tx_id,label")
        width = len(header) - 2
        if header[2:] != column_names(width):
            raise ValueError(f"{path}: feature columns must be f000..f{width - 1:03d}")
        ids, labels, rows = [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != width + 2:
                raise ValueError(f"{path}: row for {row[0]} has {len(row) - 2} features, expected {width}")
            ids.append(row[0])
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
    return ids, labels, rows, width


def write_schema(names: list[str], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for col, name in zip(column_names(len(names)), names):
            fh.write(f"{col}={name}\n")


def read_schema(path: str | os.PathLike) -> list[str]:
    names = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            col, sep, name = line.partition("=")
            if not sep or col != f"f{n:03d}":
                raise ValueError(f"{path}: bad schema line {line!r}")
            names.append(name)
    return names
