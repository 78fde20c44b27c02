import functools
import warnings

import numpy as np
import pytest

from abstain_ea.forge import ForgeConfig, inject_dangling, split_dataset
from abstain_ea.kg import AlignmentStore, KnowledgeGraph
from abstain_ea.synthetic import isomorphic_clone, random_kg
from abstain_ea.trainer import TrainConfig

# desk-scale training setup shared by the end-to-end checks
DESK = dict(dim=64, lr=0.01, triple_margin=0.5, max_epochs=150, eval_every=10, patience=6)

ACCEPTANCE_LINES: list[str] = []


def desk_config(**kw) -> TrainConfig:
    return TrainConfig(**{**DESK, **kw})


@functools.lru_cache(maxsize=None)
def clean_instance():
    kg1 = random_kg(300, 1500, 20, seed=0)
    kg2, links = isomorphic_clone(kg1, seed=1)
    store = AlignmentStore(pairs=[(s, t, None) for s, t in links])
    store = split_dataset(store, ForgeConfig(0.0, 0.0, (0.3, 0.2, 0.5), rng_seed=0))
    return kg1, kg2, store


@functools.lru_cache(maxsize=None)
def dangling_instance():
    kg1 = random_kg(300, 1500, 20, seed=0)
    kg2, links = isomorphic_clone(kg1, seed=1)
    cfg = ForgeConfig(0.2, 0.2, (0.3, 0.2, 0.5), rng_seed=0)
    d1, d2, store = inject_dangling(kg1, kg2, links, cfg)
    return d1, d2, split_dataset(store, cfg)


@pytest.fixture
def toy_kgs():
    kg1 = KnowledgeGraph.from_triples([("a", "r", "b"), ("b", "r", "c"), ("c", "s", "a")])
    kg2 = KnowledgeGraph.from_triples([("a2", "r2", "b2"), ("b2", "r2", "c2"), ("c2", "s2", "a2")])
    return kg1, kg2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_range_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*outside explored range.*")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
