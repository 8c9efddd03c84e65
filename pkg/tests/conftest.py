import sys
from pathlib import Path

import numpy as np
import pytest

from lsr.docmodel import Document, Entity, Mention, RelationFact, Sentence, load_corpus

FIXTURES = Path(__file__).parent / "fixtures"


def chain_sentence(tokens):
    """Sentence whose token i (1-based) is headed by token i - 1."""
    return Sentence(tuple(tokens), tuple(range(len(tokens))))


def toy_document(doc_id="toy"):
    """Three sentences, three entities; entity 0 bridges sentences 0 and 1."""
    s0 = Sentence(("Ada", "met", "Bob", "today"), (2, 0, 2, 2))
    s1 = Sentence(("Bob", "likes", "Cy"), (2, 0, 2))
    s2 = Sentence(("then", "Ada", "left", "quickly"), (3, 3, 0, 3))
    ents = (
        Entity(0, (Mention(0, 0, 0, 1), Mention(0, 2, 1, 2))),
        Entity(1, (Mention(1, 0, 2, 3), Mention(1, 1, 0, 1))),
        Entity(2, (Mention(2, 1, 2, 3),)),
    )
    facts = (RelationFact(0, 1, 0), RelationFact(1, 2, 1), RelationFact(0, 2, 2))
    return Document(doc_id, (s0, s1, s2), ents, facts)


@pytest.fixture
def toy_doc():
    return toy_document()


@pytest.fixture
def fixture_corpus():
    return load_corpus(FIXTURES / "one_doc.jsonl")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_tree(rng, n):
    """Uniformly shuffled random recursive tree as a 1-based head array."""
    order = rng.permutation(n)
    heads = [0] * n
    for k in range(1, n):
        heads[order[k]] = int(order[rng.integers(k)]) + 1
    return tuple(heads)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
