"""Acceptance criteria AC-1 .. AC-7, one test each.

Every test records a single ``AC-n PASS|FAIL ...`` line (echoed with ``-s``
and repeated in the terminal summary) and fails when its criterion does.
"""

import hashlib
import random
import time

import numpy as np
import pytest

from artforge import pipeline as pl
from artforge.chain import build_store
from artforge.features import extract_features
from artforge.graph import build_art_graph
from artforge.ml import ConfusionCounts, Dataset, compute_metrics, smote, stratified_split
from artforge.synth import GenConfig, PatternConfig, generate_chain, inject_pattern

from conftest import ACCEPTANCE
from oracles import brute_features, brute_graph, knn_sets, on_knn_segment, tx_links


def verdict(ac: str, ok: bool, detail: str, started: float, budget: float | None = None) -> None:
    elapsed = time.perf_counter() - started
    if budget is not None and elapsed > budget:
        ok, detail = False, f"{detail}; took {elapsed:.1f}s, budget {budget:.0f}s"
    line = f"{ac} {'PASS' if ok else 'FAIL'} {detail} ({elapsed:.2f}s)"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def oracle_chains():
    """20 chains of at most 500 transactions; every other one carries the planted pattern."""
    out = []
    for i in range(20):
        planted = i % 2 == 0
        n = [150, 250, 350, 471][i % 4] if planted else [100, 200, 300, 400, 490][i % 5]
        chain = generate_chain(GenConfig(n_background_txs=n, rng_seed=1000 + i))
        positives = []
        if planted:
            chain, positives = inject_pattern(chain, PatternConfig(rng_seed=2000 + i))
        assert len(chain.records) <= 500
        out.append((chain.records, positives))
    return out


@pytest.fixture(scope="module")
def chains():
    return [(records, positives, tx_links(records)) for records, positives in oracle_chains()]


def test_ac1_metrics_arithmetic():
    t0 = time.perf_counter()
    m = compute_metrics(ConfusionCounts(tp=3, fp=0, tn=30, fn=1))
    ok = abs(m.precision - 1.000) <= 1e-3 and abs(m.recall - 0.750) <= 1e-3 and abs(m.f1 - 0.857) <= 1e-3
    verdict("AC-1", ok, f"precision={m.precision:.3f} recall={m.recall:.3f} f1={m.f1:.3f}", t0)


def test_ac2_graph_oracle(chains):
    t0 = time.perf_counter()
    checked, mismatches = 0, []
    for records, _, links in chains:
        store = build_store(records)
        for s in (t.tx_id for t in records):
            g = build_art_graph(store, s, 2)
            depth, rings, addrs, edges = brute_graph(records, s, 2, links)
            same = (g.tx_nodes == depth and set(g.ring_nodes) == rings
                    and set(g.address_nodes) == addrs and set(g.edges) == edges
                    and len(g.ring_nodes) == len(rings) and len(g.edges) == len(edges))
            checked += 1
            if not same:
                mismatches.append((n, s))
    verdict("AC-2", not mismatches,
            f"{checked} 2-hop graphs over {len(chains)} chains, {len(mismatches)} mismatches", t0, 60)


def test_ac3_feature_oracle(chains):
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for n, (records, positives, links) in enumerate(chains):
        store = build_store(records)
        seeds = positives[:5] + random.Random(100 + n).sample([t.tx_id for t in records], 30)
        for s in seeds:
            got = np.asarray(extract_features(store, s, 2).values)
            want = np.asarray(brute_features(records, s, 2, links))
            assert got.shape == want.shape == (42,)
            rel = np.abs(got - want) / np.maximum(np.abs(want), np.finfo(float).tiny)
            rel[got == want] = 0.0
            worst = max(worst, float(rel.max()))
            checked += 1
    verdict("AC-3", worst <= 1e-9, f"{checked} seeds x 42 features, worst relative error {worst:.2e}", t0, 60)


def test_ac4_planted_recovery(tmp_path):
    t0 = time.perf_counter()
    reports = []
    for seed in range(1, 11):
        cfg = pl.PipelineConfig.from_dict({"seed": seed, "out": str(tmp_path / str(seed))})
        assert len(pl.run_synth(cfg).positives) == 19
        assert cfg.gen_config().n_background_txs >= 500
        pl.run_sample_negatives(cfg)
        pl.run_features(cfg)
        reports.append(pl.run_train(cfg).report)
    mean_f1 = float(np.mean([r["f1"] for r in reports]))
    majority = sum(r["precision"] >= r["recall"] for r in reports)
    ok = mean_f1 >= 0.8 and majority > len(reports) / 2
    verdict("AC-4", ok, f"mean F1 {mean_f1:.3f} over 10 seeds, precision>=recall in {majority}/10", t0, 300)


def test_ac5_smote_geometry():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    total, bad = 0, 0
    for i in range(25):
        n, d = int(rng.integers(3, 40)), int(rng.integers(1, 9))
        X = rng.normal(size=(n, d)) * rng.uniform(0.1, 50)
        if i % 5 == 0:
            X[1] = X[0]  # duplicate rows make distance ties
        k = int(rng.integers(1, min(6, n)))
        S = smote(X, k, 400, int(rng.integers(2**32)))
        bad += int((~on_knn_segment(S, X, knn_sets(X, k))).sum())
        total += len(S)
    verdict("AC-5", total >= 10_000 and bad == 0,
            f"{total} synthetic points, {bad} off their k-NN segments", t0, 30)


def _digests(out):
    names = (pl.CHAIN_FILE, pl.TRUTH_FILE, pl.POSITIVES_FILE, pl.DATASET_FILE,
             pl.FEATURES_FILE, pl.SCHEMA_FILE, pl.MODEL_FILE, pl.METRICS_FILE)
    return {n: hashlib.sha256((out / n).read_bytes()).hexdigest() for n in names}


def test_ac6_determinism(tmp_path):
    t0 = time.perf_counter()
    runs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 3)):
        cfg = pl.PipelineConfig.from_dict({"seed": 7, "out": str(tmp_path / tag), "workers": workers})
        pl.run_synth(cfg)
        pl.run_sample_negatives(cfg)
        pl.run_features(cfg)
        pl.run_train(cfg)
        runs.append(_digests(tmp_path / tag))
    differing = sorted({n for r in runs[1:] for n in r if r[n] != runs[0][n]})
    verdict("AC-6", not differing,
            f"3 runs (workers 1,1,3), {len(runs[0])} files each, differing: {differing or 'none'}", t0, 120)


def test_ac7_split_arithmetic():
    t0 = time.perf_counter()
    y = np.r_[np.ones(19), np.zeros(150)].astype(int)
    d = Dataset(np.zeros((169, 1)), y, [str(i) for i in range(169)])
    train, test = stratified_split(d, 0.8, 7)
    (tn, tp), (sn, sp) = train.class_counts(), test.class_counts()
    ok = (tp, tn, sp, sn) == (15, 120, 4, 30)
    verdict("AC-7", ok, f"train {tp}+{tn}, test {sp}+{sn}", t0)
