"""Brute-force reference computations. Nothing here touches the store's
indexes or the graph builder; everything is recomputed from raw records."""

from __future__ import annotations

import statistics

import numpy as np


def scan_producer(records, g):
    for tx in records:
        for pos, out in enumerate(tx.outputs):
            if out == g:
                return tx.tx_id, pos
    return None


def scan_referencing(records, g):
    hits = []
    for tx in records:
        for r, ring in enumerate(tx.rings):
            for m in ring:
                if m == g:
                    hits.append((tx.height, tx.tx_id, r))
    return [(t, r) for _, t, r in sorted(hits)]


def tx_links(records):
    """All (parent, child) pairs where a child ring lists a parent output."""
    links = set()
    for child in records:
        members = {m for ring in child.rings for m in ring}
        for parent in records:
            if parent.tx_id != child.tx_id and members & set(parent.outputs):
                links.add((parent.tx_id, child.tx_id))
    return links


def relaxation_depths(records, seed, n_hops, links=None):
    """Minimum hop depth by repeated edge relaxation over tx -> tx links."""
    by_id = {t.tx_id: t for t in records}
    if links is None:
        links = tx_links(records)
    inf = float("inf")
    dist = {t: inf for t in by_id}
    dist[seed] = 0
    for _ in range(n_hops):
        changed = False
        for p, c in links:
            if c != seed and dist[p] + 1 < dist[c] and dist[p] + 1 <= n_hops:
                dist[c] = dist[p] + 1
                changed = True
        if not changed:
            break
    return {t: int(d) for t, d in dist.items() if d != inf}


def brute_graph(records, seed, n_hops, links=None):
    """(tx depths, ring set, address set, edge set) by exhaustive enumeration."""
    depth = relaxation_depths(records, seed, n_hops, links)
    inner = {t for t, d in depth.items() if d < n_hops}
    by_id = {t.tx_id: t for t in records}
    addresses = {g for t in inner for g in by_id[t].outputs}
    edges = {("PROD", t, g) for t in inner for g in by_id[t].outputs}
    rings = set()
    for tx in records:
        if tx.tx_id == seed:
            continue
        for r, ring in enumerate(tx.rings):
            for g in ring:
                if g in addresses:
                    rings.add((tx.tx_id, r))
                    edges.add(("MEMB", g, (tx.tx_id, r)))
                    edges.add(("INPT", (tx.tx_id, r), tx.tx_id))
    return depth, rings, addresses, edges


def ref_stats(values):
    """(mean, std, min, max, median) via the statistics module; -1s when empty."""
    if not values:
        return (-1.0,) * 5
    xs = [float(v) for v in values]
    return (statistics.fmean(xs), statistics.pstdev(xs), min(xs), max(xs), statistics.median(xs))


def brute_features(records, seed, n_hops, links=None):
    by_id = {t.tx_id: t for t in records}
    tx = by_id[seed]
    members = [m for ring in tx.rings for m in ring]
    ages = []
    for m in members:
        producer, _ = scan_producer(records, m)
        ages.append(tx.timestamp - by_id[producer].timestamp)
    ring_size = statistics.fmean(len(r) for r in tx.rings) if tx.rings else -1.0
    out = [len(tx.rings), ring_size, len(tx.outputs), tx.fee, len(set(members)), *ref_stats(ages)]
    depth = relaxation_depths(records, seed, n_hops, links)
    for i in range(1, n_hops + 1):
        hop = [by_id[t] for t, d in depth.items() if d == i]
        out.append(len(hop))
        out += ref_stats([len(h.rings) for h in hop])
        out += ref_stats([len(r) for h in hop for r in h.rings])
        out += ref_stats([h.timestamp - tx.timestamp for h in hop])
    return [float(v) for v in out]


def knn_sets(X, k):
    """For each row: indexes of other rows within its k-th nearest distance."""
    n = len(X)
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    out = []
    for i in range(n):
        others = sorted(d[i, j] for j in range(n) if j != i)
        radius = others[k - 1]
        out.append([j for j in range(n) if j != i and d[i, j] <= radius + 1e-12])
    return out


def on_knn_segment(S, X, neigh, tol=1e-9):
    """Boolean per row of S: lies on some segment x_i -> x_j with j in neigh[i]."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    pairs = [(i, j) for i, js in enumerate(neigh) for j in js]
    pi = np.array([i for i, _ in pairs])
    pj = np.array([j for _, j in pairs])
    V = X[pj] - X[pi]                              # (m, d)
    W = S[:, None, :] - X[pi][None, :, :]          # (n, m, d)
    vv = (V * V).sum(-1)                           # (m,)
    safe = np.where(vv > 0, vv, 1.0)
    lam = np.where(vv > 0, (W * V).sum(-1) / safe, 0.0)
    resid = W - lam[..., None] * V
    scale = 1.0 + np.abs(S).max(axis=1, keepdims=True)
    close = np.sqrt((resid ** 2).sum(-1)) <= tol * scale
    inside = (lam >= -tol) & (lam <= 1 + tol)
    return (close & inside).any(axis=1)
