from pathlib import Path

import pytest

from searn_amr.corpus import load_corpus
from searn_amr.learner import SearnConfig, searn_train

FIXTURES = Path(__file__).parent / "fixtures"
TEST_HASH_BITS = 18


def fixture_paths(stem):
    return tuple(str(FIXTURES / f"{stem}.{ext}") for ext in ("amr", "ann", "align"))


@pytest.fixture(scope="session")
def train_examples():
    return load_corpus(*fixture_paths("train"))


@pytest.fixture(scope="session")
def heldout_examples():
    return load_corpus(*fixture_paths("heldout"))


@pytest.fixture(scope="session")
def reading_example():
    return load_corpus(*fixture_paths("reading"))[0]


@pytest.fixture(scope="session")
def trained_model(train_examples):
    return searn_train(train_examples, SearnConfig(hash_bits=TEST_HASH_BITS, seed=7))


def random_graph(rng, max_vars=6, concepts=("a", "b", "c"), relations=("r", "s")):
    """Connected random graph over a small vocabulary so that many mappings tie."""
    from searn_amr.graph import AmrGraph, ConceptLabel

    n = rng.randint(1, max_vars)
    nodes = [(f"v{k}", ConceptLabel.parse(rng.choice(concepts))) for k in range(n)]
    edges = [(f"v{rng.randrange(k)}", rng.choice(relations), f"v{k}") for k in range(1, n)]
    for _ in range(rng.randint(0, n)):
        s, t = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if s != t:
            edges.append((f"v{s}", rng.choice(relations), f"v{t}"))
    consts = [(f"v{rng.randrange(n)}", "op1", rng.choice(["x", "y"])) for _ in range(rng.randint(0, 2))]
    return AmrGraph(nodes, edges, "v0", consts)
