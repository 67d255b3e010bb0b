"""Indexed in-memory ledger built from ``.chain.jsonl`` snapshots.

Outputs ("stealth addresses") are plain ints: the chain-wide global output
index. A ring is a tuple of such ints, sorted the way Monero orders key
offsets. Amounts and key material are not modeled.

Snapshot line schema (canonical form, keys in this order, no whitespace)::

    {"tx_id":str,"height":int,"timestamp":int,"fee":int,"rings":[[int,...],...],"outputs":[int,...]}
"""

from __future__ import annotations

import io
import json
import os
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from typing import IO, Union

from .errors import SnapshotError, UnknownOutputError, UnknownTxError

OutputRef = int
Ring = tuple[int, ...]

SNAPSHOT_KEYS = ("tx_id", "height", "timestamp", "fee", "rings", "outputs")


@dataclass(frozen=True)
class TxRecord:
    tx_id: str
    height: int
    timestamp: int
    fee: int
    rings: tuple[Ring, ...]
    outputs: tuple[int, ...]

    @property
    def is_coinbase(self) -> bool:
        return not self.rings

    def to_json(self) -> str:
        obj = {
            "tx_id": self.tx_id,
            "height": self.height,
            "timestamp": self.timestamp,
            "fee": self.fee,
            "rings": [list(r) for r in self.rings],
            "outputs": list(self.outputs),
        }
        return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ChainStore:
    """Immutable ledger with producer and reverse-reference indexes.

    ``txs`` preserves snapshot (height, intra-block) order. ``referencing``
    only holds outputs that appear in at least one ring; use
    :func:`rings_referencing` for the total lookup.
    """

    txs: dict[str, TxRecord]
    producer: dict[int, tuple[str, int]]
    referencing: dict[int, tuple[tuple[str, int], ...]]
    span: tuple[int, int] | None
    order: dict[str, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.txs)

    def __contains__(self, tx_id: object) -> bool:
        return tx_id in self.txs

    def tx(self, tx_id: str) -> TxRecord:
        try:
            return self.txs[tx_id]
        except KeyError:
            raise UnknownTxError(f"unknown transaction {tx_id!r}") from None

    def sort_key(self, tx_id: str) -> tuple[int, str]:
        return (self.txs[tx_id].height, tx_id)


def _fail(msg: str, line: int | None) -> SnapshotError:
    return SnapshotError(msg, line)


def _check_int(value: object, name: str, line: int | None) -> int:
    if type(value) is not int:
        raise _fail(f"{name} must be an integer, got {value!r}", line)
    if value < 0:
        raise _fail(f"{name} must be non-negative, got {value}", line)
    return value


def _record_from_obj(obj: object, line: int | None) -> TxRecord:
    if not isinstance(obj, dict):
        raise _fail("record is not a JSON object", line)
    if set(obj) != set(SNAPSHOT_KEYS):
        missing = [k for k in SNAPSHOT_KEYS if k not in obj]
        extra = sorted(set(obj) - set(SNAPSHOT_KEYS))
        raise _fail(f"bad keys (missing={missing}, unexpected={extra})", line)
    tx_id = obj["tx_id"]
    if not isinstance(tx_id, str) or not tx_id or any(c.isspace() for c in tx_id):
        raise _fail(f"tx_id must be a non-empty string without whitespace, got {tx_id!r}", line)
    height = _check_int(obj["height"], "height", line)
    timestamp = _check_int(obj["timestamp"], "timestamp", line)
    fee = _check_int(obj["fee"], "fee", line)

    raw_rings = obj["rings"]
    if not isinstance(raw_rings, list):
        raise _fail("rings must be a list", line)
    rings = []
    for r, raw in enumerate(raw_rings):
        if not isinstance(raw, list) or not raw:
            raise _fail(f"ring {r} must be a non-empty list", line)
        members = tuple(_check_int(m, f"ring {r} member", line) for m in raw)
        if len(set(members)) != len(members):
            raise _fail(f"ring {r} has duplicate members", line)
        rings.append(members)

    raw_outputs = obj["outputs"]
    if not isinstance(raw_outputs, list) or not raw_outputs:
        raise _fail("outputs must be a non-empty list", line)
    outputs = tuple(_check_int(g, "output", line) for g in raw_outputs)
    if any(b <= a for a, b in zip(outputs, outputs[1:])):
        raise _fail("outputs must be strictly increasing", line)
    lowest = outputs[0]
    for r, members in enumerate(rings):
        if max(members) >= lowest:
            raise _fail(f"ring {r} references future output {max(members)}", line)
    return TxRecord(tx_id, height, timestamp, fee, tuple(rings), outputs)


def build_store(records: Iterable[TxRecord], *, lines: bool = True) -> ChainStore:
    """Validate ``records`` (in snapshot order) and index them.

    Raises :class:`SnapshotError` on the first violation; line numbers are
    reported 1-based when ``lines`` is true.
    """
    txs: dict[str, TxRecord] = {}
    producer: dict[int, tuple[str, int]] = {}
    refs: dict[int, list[tuple[str, int]]] = {}
    last_height = -1
    last_ts = -1
    for n, tx in enumerate(records, start=1):
        where = n if lines else None
        if tx.tx_id in txs:
            raise _fail(f"duplicate tx_id {tx.tx_id!r}", where)
        if tx.height < last_height:
            raise _fail(f"height {tx.height} after height {last_height}", where)
        if tx.timestamp < last_ts:
            raise _fail(f"non-monotone timestamp {tx.timestamp} after {last_ts} (height {tx.height})", where)
        for r, members in enumerate(tx.rings):
            for g in members:
                if g not in producer:
                    raise _fail(f"ring {r} references unknown output {g}", where)
        for pos, g in enumerate(tx.outputs):
            if g in producer:
                raise _fail(f"duplicate global_index {g}", where)
            producer[g] = (tx.tx_id, pos)
        for r, members in enumerate(tx.rings):
            for g in members:
                refs.setdefault(g, []).append((tx.tx_id, r))
        txs[tx.tx_id] = tx
        last_height, last_ts = tx.height, tx.timestamp

    order = {tx_id: i for i, tx_id in enumerate(txs)}
    referencing = {
        g: tuple(sorted(pairs, key=lambda p: (txs[p[0]].height, p[0], p[1])))
        for g, pairs in sorted(refs.items())
    }
    span = None
    if txs:
        stamps = [t.timestamp for t in txs.values()]
        span = (min(stamps), max(stamps))
    return ChainStore(txs, producer, referencing, span, order)


def _iter_lines(stream: Union[IO[bytes], IO[str], Iterable[str], Iterable[bytes]]) -> Iterator[str]:
    for raw in stream:
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise SnapshotError(f"invalid UTF-8: {exc}") from None
        yield raw


def iter_records(stream) -> Iterator[TxRecord]:
    for n, line in enumerate(_iter_lines(stream), start=1):
        text = line.rstrip("\r\n")
        if not text.strip():
            raise SnapshotError("blank line", n)
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"malformed JSON ({exc.msg})", n) from None
        yield _record_from_obj(obj, n)


def parse_snapshot(stream) -> ChainStore:
    """Parse a line-delimited snapshot (binary or text stream, or lines)."""
    return build_store(iter_records(stream))


def load_snapshot(path: str | os.PathLike) -> ChainStore:
    with open(path, "rb") as fh:
        return parse_snapshot(fh)


def parse_snapshot_text(text: str) -> ChainStore:
    return parse_snapshot(io.StringIO(text))


def dump_snapshot(records: ChainStore | Iterable[TxRecord], stream: IO[str]) -> None:
    if isinstance(records, ChainStore):
        records = records.txs.values()
    for tx in records:
        stream.write(tx.to_json())
        stream.write("\n")


def snapshot_text(records: ChainStore | Iterable[TxRecord]) -> str:
    buf = io.StringIO()
    dump_snapshot(records, buf)
    return buf.getvalue()


def write_snapshot(records: ChainStore | Iterable[TxRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_snapshot(records, fh)


def producing_tx(store: ChainStore, g: OutputRef) -> tuple[str, int]:
    """Return ``(tx_id, timestamp)`` of the transaction that created output ``g``."""
    try:
        tx_id, _ = store.producer[g]
    except KeyError:
        raise UnknownOutputError(f"unknown output {g}") from None
    return tx_id, store.txs[tx_id].timestamp


def rings_referencing(store: ChainStore, g: OutputRef) -> list[tuple[str, int]]:
    """All ``(tx_id, ring position)`` pairs whose ring contains ``g``.

    Ordered by (height, tx_id, ring position); empty when ``g`` was never used
    as a ring member.
    """
    if g not in store.producer:
        raise UnknownOutputError(f"unknown output {g}")
    return list(store.referencing.get(g, ()))
