import functools

import hypothesis
import pytest

from artforge.chain import TxRecord, build_store
from artforge.synth import GenConfig, PatternConfig, generate_chain, inject_pattern

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")


def tx(tx_id, height, ts, rings=(), outputs=(0,), fee=0):
    return TxRecord(tx_id, height, ts, fee, tuple(tuple(r) for r in rings), tuple(outputs))


@pytest.fixture
def abc_records():
    """A -> B -> C: B's ring holds an A output, C's ring holds a B output."""
    return [
        tx("A", 0, 1000, (), (0, 1)),
        tx("B", 1, 1120, [(0,)], (2, 3), fee=5),
        tx("C", 2, 1240, [(2,)], (4, 5), fee=7),
    ]


@pytest.fixture
def abc_store(abc_records):
    return build_store(abc_records)


@functools.lru_cache(maxsize=None)
def small_chain(seed: int, n: int = 50, ring_size: int = 3):
    cfg = GenConfig(n_background_txs=n, ring_size=ring_size, rng_seed=seed, span_seconds=20 * 86_400,
                    decoy_recency_scale=86_400.0)
    return generate_chain(cfg)


@functools.lru_cache(maxsize=None)
def planted_chain(seed: int, n: int = 500):
    chain = generate_chain(GenConfig(n_background_txs=n, rng_seed=seed))
    return inject_pattern(chain, PatternConfig(rng_seed=seed + 1))


@pytest.fixture(scope="session")
def chain50():
    return small_chain(3)


@pytest.fixture(scope="session")
def store50(chain50):
    return build_store(chain50.records)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
