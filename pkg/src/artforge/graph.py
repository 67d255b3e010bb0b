"""Address-Ring-Transaction graphs grown forward from a seed transaction.

Node kinds: transactions (keyed by tx_id, carrying hop depth), rings (keyed
by ``(owner tx_id, ring position)``) and addresses (global output index).
Edge kinds: ``PROD`` tx -> address, ``MEMB`` address -> ring and ``INPT``
ring -> tx.

Expansion from depth d to d + 1 takes every output of the depth-d
transactions, looks up each ring that lists it, and adds the ring's owner at
depth d + 1 if it is not in the graph yet. The seed's own input rings are not
traversed.
"""

from __future__ import annotations

import io
import os
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import IO

from .chain import ChainStore
from .errors import ArtError, UnknownTxError

PROD, MEMB, INPT = "PROD", "MEMB", "INPT"
EDGE_KINDS = (PROD, MEMB, INPT)

RingKey = tuple[str, int]
Edge = tuple[str, object, object]


class GraphFormatError(ArtError, ValueError):
    exit_code = 2


@dataclass
class ArtGraph:
    seed: str
    n_hops: int
    tx_nodes: dict[str, int]
    ring_nodes: list[RingKey] = field(default_factory=list)
    address_nodes: list[int] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    def hop(self, i: int) -> set[str]:
        return hop_transactions(self, i)

    def node_sets(self) -> tuple[dict[str, int], set[RingKey], set[int], set[Edge]]:
        return dict(self.tx_nodes), set(self.ring_nodes), set(self.address_nodes), set(self.edges)


def build_art_graph(store: ChainStore, seed: str, n_hops: int, *, include_all_rings: bool = False) -> ArtGraph:
    """Expand ``n_hops`` levels in the output direction around ``seed``.

    With ``include_all_rings`` every ring of a newly reached transaction is
    added along with its members as address nodes (sideways growth). Those
    members are not expanded further. Off by default.
    """
    if seed not in store.txs:
        raise UnknownTxError(f"unknown seed transaction {seed!r}")
    if n_hops < 1:
        raise ValueError(f"n_hops must be >= 1, got {n_hops}")

    txs = store.txs
    depth: dict[str, int] = {seed: 0}
    rings: set[RingKey] = set()
    addresses: set[int] = set()
    edges: set[Edge] = set()
    frontier = [seed]

    for d in range(n_hops):
        reached: set[str] = set()
        for tx_id in frontier:
            for g in txs[tx_id].outputs:
                addresses.add(g)
                edges.add((PROD, tx_id, g))
                for owner, pos in store.referencing.get(g, ()):
                    if owner == seed:
                        continue
                    key = (owner, pos)
                    rings.add(key)
                    edges.add((MEMB, g, key))
                    edges.add((INPT, key, owner))
                    if owner not in depth:
                        depth[owner] = d + 1
                        reached.add(owner)
        if include_all_rings:
            for owner in reached:
                for pos, members in enumerate(txs[owner].rings):
                    key = (owner, pos)
                    rings.add(key)
                    edges.add((INPT, key, owner))
                    for g in members:
                        addresses.add(g)
                        edges.add((MEMB, g, key))
        frontier = sorted(reached, key=store.sort_key)
        if not frontier:
            break

    return _canonical(store, seed, n_hops, depth, rings, addresses, edges)


def _canonical(store, seed, n_hops, depth, rings, addresses, edges) -> ArtGraph:
    tkey = store.sort_key

    def rkey(r: RingKey):
        return (*tkey(r[0]), r[1])

    tx_nodes = {t: depth[t] for t in sorted(depth, key=tkey)}

    def ekey(e: Edge):
        kind, src, dst = e
        if kind == PROD:
            return (0, *tkey(src), dst)
        if kind == MEMB:
            return (1, src, *rkey(dst))
        return (2, *rkey(src))

    return ArtGraph(
        seed=seed,
        n_hops=n_hops,
        tx_nodes=tx_nodes,
        ring_nodes=sorted(rings, key=rkey),
        address_nodes=sorted(addresses),
        edges=sorted(edges, key=ekey),
    )


def hop_transactions(g: ArtGraph, i: int) -> set[str]:
    """Transactions at exactly depth ``i`` (hop 0 is the seed)."""
    if not 0 <= i <= g.n_hops:
        raise ValueError(f"hop {i} outside [0, {g.n_hops}]")
    return {t for t, d in g.tx_nodes.items() if d == i}


def hop_sets(g: ArtGraph) -> list[list[str]]:
    """Per-depth transaction lists, in graph node order."""
    out: list[list[str]] = [[] for _ in range(g.n_hops + 1)]
    for t, d in g.tx_nodes.items():
        out[d].append(t)
    return out


# -- edge-list export -------------------------------------------------------

def _ring_token(r: RingKey) -> str:
    return f"{r[0]}#{r[1]}"


def _parse_ring_token(tok: str) -> RingKey:
    owner, sep, pos = tok.rpartition("#")
    if not sep or not owner or not pos.isdigit():
        raise GraphFormatError(f"bad ring token {tok!r}")
    return owner, int(pos)


def _node_token(x) -> str:
    if isinstance(x, tuple):
        return _ring_token(x)
    return str(x)


def export_graph(g: ArtGraph, sink: IO[str]) -> None:
    """Write the edge-list text form: header, T/A/R node lines, then E lines."""
    sink.write(f"# art-graph seed={g.seed} hops={g.n_hops}\n")
    for t, d in g.tx_nodes.items():
        sink.write(f"T {t} {d}\n")
    for a in g.address_nodes:
        sink.write(f"A {a}\n")
    for owner, pos in g.ring_nodes:
        sink.write(f"R {owner} {pos}\n")
    for kind, src, dst in g.edges:
        sink.write(f"E {kind} {_node_token(src)} {_node_token(dst)}\n")


def graph_text(g: ArtGraph) -> str:
    buf = io.StringIO()
    export_graph(g, buf)
    return buf.getvalue()


def write_graph(g: ArtGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        export_graph(g, fh)


def import_graph(lines: Iterable[str] | str) -> ArtGraph:
    """Inverse of :func:`export_graph`; keeps line order as node/edge order."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    it = iter(lines)
    header = next(it, None)
    if header is None:
        raise GraphFormatError("empty graph file")
    parts = header.strip().split()
    if len(parts) != 4 or parts[:2] != ["#", "art-graph"] or not parts[2].startswith("seed=") \
            or not parts[3].startswith("hops="):
        raise GraphFormatError(f"bad header {header!r}")
    seed = parts[2][len("seed="):]
    try:
        n_hops = int(parts[3][len("hops="):])
    except ValueError:
        raise GraphFormatError(f"bad hop count in header {header!r}") from None

    g = ArtGraph(seed=seed, n_hops=n_hops, tx_nodes={})
    for n, raw in enumerate(it, start=2):
        tok = raw.split()
        if not tok:
            continue
        try:
            if tok[0] == "T" and len(tok) == 3:
                g.tx_nodes[tok[1]] = int(tok[2])
            elif tok[0] == "A" and len(tok) == 2:
                g.address_nodes.append(int(tok[1]))
            elif tok[0] == "R" and len(tok) == 3:
                g.ring_nodes.append((tok[1], int(tok[2])))
            elif tok[0] == "E" and len(tok) == 4 and tok[1] in EDGE_KINDS:
                kind = tok[1]
                if kind == PROD:
                    g.edges.append((kind, tok[2], int(tok[3])))
                elif kind == MEMB:
                    g.edges.append((kind, int(tok[2]), _parse_ring_token(tok[3])))
                else:
                    g.edges.append((kind, _parse_ring_token(tok[2]), tok[3]))
            else:
                raise GraphFormatError(f"line {n}: unrecognised record {raw.rstrip()!r}")
        except ValueError as exc:
            if isinstance(exc, GraphFormatError):
                raise
            raise GraphFormatError(f"line {n}: {exc}") from None
    return g
