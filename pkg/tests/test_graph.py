import random
from concurrent.futures import ProcessPoolExecutor

import pytest
from hypothesis import given, strategies as st

from artforge.chain import build_store
from artforge.errors import UnknownTxError
from artforge.graph import (GraphFormatError, build_art_graph, graph_text, hop_sets,
                            hop_transactions, import_graph)

from conftest import small_chain, tx
from oracles import brute_graph, tx_links


def test_abc_depths(abc_store):
    g = build_art_graph(abc_store, "A", 2)
    assert g.tx_nodes == {"A": 0, "B": 1, "C": 2}
    assert hop_transactions(g, 0) == {"A"}
    assert hop_transactions(g, 2) == {"C"}
    assert g.address_nodes == [0, 1, 2, 3]
    assert g.ring_nodes == [("B", 0), ("C", 0)]


def test_abc_export(abc_store):
    text = graph_text(build_art_graph(abc_store, "A", 2))
    lines = text.splitlines()
    assert lines[0] == "# art-graph seed=A hops=2"
    assert [ln for ln in lines if ln.startswith("T ")] == ["T A 0", "T B 1", "T C 2"]
    assert "E MEMB 0 B#0" in lines and "E INPT C#0 C" in lines and "E PROD B 2" in lines


def test_chain_tip_seed(abc_store):
    g = build_art_graph(abc_store, "C", 2)
    assert g.tx_nodes == {"C": 0}
    assert g.address_nodes == [4, 5]
    assert g.ring_nodes == []
    lines = graph_text(g).splitlines()
    assert lines == ["# art-graph seed=C hops=2", "T C 0", "A 4", "A 5", "E PROD C 4", "E PROD C 5"]


def test_hop_range_and_bad_seed(abc_store):
    g = build_art_graph(abc_store, "A", 1)
    with pytest.raises(ValueError):
        hop_transactions(g, 2)
    with pytest.raises(ValueError):
        hop_transactions(g, -1)
    with pytest.raises(UnknownTxError):
        build_art_graph(abc_store, "nope", 2)
    with pytest.raises(ValueError):
        build_art_graph(abc_store, "A", 0)


def test_minimum_depth_wins():
    # D references outputs of both A (depth 0) and B (depth 1): it belongs to hop 1 only
    records = [
        tx("A", 0, 0, (), (0, 1)),
        tx("B", 1, 10, [(0,)], (2,)),
        tx("D", 2, 20, [(1, 2)], (3,)),
    ]
    g = build_art_graph(build_store(records), "A", 2)
    assert g.tx_nodes == {"A": 0, "B": 1, "D": 1}
    assert hop_transactions(g, 2) == set()
    assert ("MEMB", 2, ("D", 0)) in g.edges


def test_seed_input_rings_not_traversed(abc_store):
    g = build_art_graph(abc_store, "B", 2)
    assert "A" not in g.tx_nodes
    assert ("B", 0) not in g.ring_nodes
    assert 0 not in g.address_nodes


def test_include_all_rings_extension():
    records = [
        tx("A", 0, 0, (), (0, 1)),
        tx("X", 0, 0, (), (2,)),
        tx("B", 1, 10, [(0,), (2,)], (3,)),
    ]
    store = build_store(records)
    plain = build_art_graph(store, "A", 1)
    wide = build_art_graph(store, "A", 1, include_all_rings=True)
    assert plain.ring_nodes == [("B", 0)]
    assert wide.ring_nodes == [("B", 0), ("B", 1)]
    assert 2 in wide.address_nodes and 2 not in plain.address_nodes
    assert plain.tx_nodes == wide.tx_nodes


def _check_invariants(g, store):
    txs, rings, addrs, edges = g.node_sets()
    assert txs[g.seed] == 0
    assert all(0 <= d <= g.n_hops for d in txs.values())
    for owner, pos in rings:
        assert owner in txs
    for kind, src, dst in edges:
        if kind == "PROD":
            assert src in txs and dst in addrs
        elif kind == "MEMB":
            assert src in addrs and dst in rings
        else:
            assert src in rings and dst in txs and src[0] == dst
    for t, d in txs.items():
        if d == 0:
            continue
        parents = {p for p, dp in txs.items() if dp == d - 1}
        fed = {store.producer[m][0] for r in store.txs[t].rings for m in r}
        assert parents & fed
        # monotone timestamps along hops
        assert store.txs[t].timestamp >= min(store.txs[p].timestamp for p in parents & fed)


@given(seed=st.integers(0, 50), pick=st.integers(0, 10**6))
def test_oracle_and_invariants_on_small_chains(seed, pick):
    chain = small_chain(seed, 60)
    store = build_store(chain.records)
    ids = [t.tx_id for t in chain.records]
    s = ids[pick % len(ids)]
    g = build_art_graph(store, s, 2)
    depth, rings, addrs, edges = brute_graph(chain.records, s, 2)
    assert g.tx_nodes == depth
    assert set(g.ring_nodes) == rings and set(g.address_nodes) == addrs and set(g.edges) == edges
    _check_invariants(g, store)
    sets = hop_sets(g)
    flat = [t for hop in sets for t in hop]
    assert len(flat) == len(set(flat)) and set(flat) == set(g.tx_nodes)
    for i in range(1, 3):
        assert g.seed not in hop_transactions(g, i)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_growth_monotone(seed):
    chain = small_chain(seed, 80)
    store = build_store(chain.records)
    for s in [t.tx_id for t in chain.records][::7]:
        prev = None
        for d in range(1, 5):
            txs, rings, addrs, _ = build_art_graph(store, s, d).node_sets()
            if prev is not None:
                assert set(prev[0]) <= set(txs) and prev[1] <= rings and prev[2] <= addrs
                assert all(txs[t] == dd for t, dd in prev[0].items())
            prev = (txs, rings, addrs)


@pytest.mark.parametrize("seed", [4, 5])
def test_export_import_round_trip(seed, tmp_path):
    chain = small_chain(seed, 80)
    store = build_store(chain.records)
    for s in [t.tx_id for t in chain.records][::9]:
        g = build_art_graph(store, s, 2)
        text = graph_text(g)
        back = import_graph(text)
        assert graph_text(back) == text
        assert back.node_sets() == g.node_sets()


def test_import_rejects_garbage():
    with pytest.raises(GraphFormatError):
        import_graph("")
    with pytest.raises(GraphFormatError):
        import_graph("# something else\n")
    with pytest.raises(GraphFormatError):
        import_graph("# art-graph seed=A hops=2\nQ 1\n")
    with pytest.raises(GraphFormatError):
        import_graph("# art-graph seed=A hops=2\nE MEMB 1 nohash\n")


def _export_for(args):
    seed, s = args
    store = build_store(small_chain(seed, 200).records)
    return graph_text(build_art_graph(store, s, 2))


def test_results_independent_of_workers():
    chain = small_chain(8, 200)
    ids = random.Random(0).sample([t.tx_id for t in chain.records], 20)
    jobs = [(8, s) for s in ids]
    serial = [_export_for(j) for j in jobs]
    with ProcessPoolExecutor(3) as pool:
        parallel = list(pool.map(_export_for, jobs))
    assert serial == parallel


def test_links_oracle_sanity(abc_records):
    assert tx_links(abc_records) == {("A", "B"), ("B", "C")}
