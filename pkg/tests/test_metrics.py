import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_sentence
from lsr.docmodel import Corpus, Document, Entity, Mention, RelationFact
from lsr.harness.metrics import (ScoredFact, evaluate, facts_above, gold_facts, is_intra_pair, pick_threshold,
                                 prf, surface_key, train_fact_keys)


def three_entity_doc(doc_id="m", names=("A", "B", "C")):
    """A and B share sentence 0; C appears only in sentence 1."""
    s0 = chain_sentence([names[0], "x", names[1], "y"])
    s1 = chain_sentence(["z", names[2], names[1]])
    ents = (Entity(0, (Mention(0, 0, 0, 1),)), Entity(1, (Mention(1, 0, 2, 3), Mention(1, 1, 2, 3))),
            Entity(2, (Mention(2, 1, 1, 2),)))
    facts = (RelationFact(0, 1, 0), RelationFact(0, 2, 1), RelationFact(1, 2, 0))
    return Document(doc_id, (s0, s1), ents, facts)


def f1_by_hand(tp, n_pred, n_gold):
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def exhaustive_threshold(scored, gold):
    """Independent oracle: try every distinct score, keep the best F1, ties to the smaller score."""
    best = None
    for theta in sorted({s.p for s in scored}):
        pred = {(s.doc_id, s.h, s.t, s.r) for s in scored if s.p >= theta}
        f = f1_by_hand(len(pred & gold), len(pred), len(gold))
        if best is None or f > best[0]:
            best = (f, theta)
    return best


# -- intra / inter partition ---------------------------------------------------------

def test_intra_inter_by_definition():
    doc = three_entity_doc()
    assert is_intra_pair(doc, 0, 1)
    assert not is_intra_pair(doc, 0, 2)
    assert is_intra_pair(doc, 1, 2)  # B and C co-occur in sentence 1


# -- fixtures ----------------------------------------------------------------------

def test_fixture_perfect():
    doc = three_entity_doc()
    gold = gold_facts([doc])
    rep = evaluate(gold, gold, set(), [doc])
    assert (rep.precision, rep.recall, rep.f1, rep.intra_f1, rep.inter_f1, rep.ign_f1) == (1, 1, 1, 1, 1, 1)


def test_fixture_half_recall():
    doc = three_entity_doc()
    gold = {("m", 0, 1, 0), ("m", 0, 2, 1)}
    rep = evaluate({("m", 0, 1, 0)}, gold, set(), [doc])
    assert rep.precision == 1.0 and rep.recall == 0.5 and rep.f1 == 2 / 3
    assert rep.intra_f1 == 1.0 and rep.inter_f1 == 0.0
    assert rep.n_intra_gold == 1 and rep.n_inter_gold == 1


def test_fixture_mixed_with_ign():
    doc = three_entity_doc()
    train_doc = three_entity_doc("tr")
    gold = gold_facts([doc])  # (0,1,0) intra, (0,2,1) inter, (1,2,0) intra
    pred = {("m", 0, 1, 0), ("m", 0, 2, 1), ("m", 2, 0, 1), ("m", 1, 0, 0)}
    train_keys = {surface_key(train_doc, 0, 1, 0)}
    rep = evaluate(pred, gold, train_keys, [doc])
    # tp = 2, pred = 4, gold = 3
    assert rep.precision == 0.5 and rep.recall == 2 / 3
    assert rep.f1 == pytest.approx(f1_by_hand(2, 4, 3), abs=0)
    # intra: pred {(0,1,0), (1,0,0)}, gold {(0,1,0), (1,2,0)} -> tp 1
    assert rep.intra_f1 == pytest.approx(f1_by_hand(1, 2, 2), abs=0)
    # inter: pred {(0,2,1), (2,0,1)}, gold {(0,2,1)} -> tp 1
    assert rep.inter_f1 == pytest.approx(f1_by_hand(1, 2, 1), abs=0)
    # ign: the shared (A, B, 0) fact leaves both correct and predicted counts
    ign_p = (2 - 1) / (4 - 1)
    assert rep.ign_f1 == pytest.approx(2 * ign_p * (2 / 3) / (ign_p + 2 / 3), abs=0)
    assert rep.per_relation["0"] == {"pred": 2, "gold": 2, "correct": 1}


def test_train_keys_are_surface_based():
    a = three_entity_doc("a")
    b = three_entity_doc("b", names=("A", "B", "Q"))
    keys = train_fact_keys([a])
    assert surface_key(b, 0, 1, 0) in keys and surface_key(b, 0, 2, 1) not in keys


def test_prf_edge_cases():
    assert prf(0, 0, 0) == (0.0, 0.0, 0.0)
    assert prf(1, 1, 2) == (1.0, 0.5, 2 / 3)


def test_metrics_bounded_and_harmonic():
    doc = three_entity_doc()
    rep = evaluate({("m", 0, 1, 0), ("m", 2, 1, 1)}, gold_facts([doc]), set(), [doc])
    for k in ("precision", "recall", "f1", "ign_f1", "intra_f1", "inter_f1"):
        assert 0 <= getattr(rep, k) <= 1
    assert rep.f1 == pytest.approx(2 * rep.precision * rep.recall / (rep.precision + rep.recall))


@settings(max_examples=40, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 1)).filter(lambda x: x[0] != x[1])))
def test_evaluate_is_order_invariant_and_idempotent(pred_raw):
    doc = three_entity_doc()
    pred = [("m",) + p for p in pred_raw]
    gold = gold_facts([doc])
    a = evaluate(pred, gold, set(), [doc]).to_dict()
    b = evaluate(list(reversed(pred)), gold, set(), Corpus([doc])).to_dict()
    assert a == b == evaluate(pred, gold, set(), [doc]).to_dict()
    # the intra/inter partition is exhaustive and disjoint
    assert a["n_intra_gold"] + a["n_inter_gold"] == a["n_gold"]


# -- threshold ----------------------------------------------------------------------------

def test_threshold_separable():
    gold = {("d", 0, 1, 0)}
    scored = [ScoredFact("d", 0, 1, 0, 0.9), ScoredFact("d", 1, 0, 0, 0.1)]
    theta = pick_threshold(scored, gold)
    assert theta == 0.9
    rep = evaluate(facts_above(scored, theta), gold, set(), [three_entity_doc("d")])
    assert rep.f1 == 1.0


def test_threshold_all_equal():
    gold = {("d", 0, 1, 0)}
    scored = [ScoredFact("d", 0, 1, 0, 0.4), ScoredFact("d", 1, 0, 0, 0.4), ScoredFact("d", 0, 2, 0, 0.4)]
    theta = pick_threshold(scored, gold)
    assert theta == 0.4 and len(facts_above(scored, theta)) == 3


def test_threshold_six_scores_fixture():
    gold = {("d", 0, 1, 0), ("d", 0, 2, 0), ("d", 1, 2, 1)}
    scored = [ScoredFact("d", 0, 1, 0, 0.95), ScoredFact("d", 1, 0, 0, 0.80), ScoredFact("d", 0, 2, 0, 0.70),
              ScoredFact("d", 2, 0, 0, 0.60), ScoredFact("d", 1, 2, 1, 0.30), ScoredFact("d", 2, 1, 1, 0.20)]
    # by hand: 0.95 -> F1 1/2, 0.80 -> 2/5, 0.70 -> 2/3, 0.60 -> 4/7, 0.30 -> 3/4, 0.20 -> 2/3
    theta = pick_threshold(scored, gold)
    assert theta == 0.30
    assert exhaustive_threshold(scored, gold)[1] == theta


def test_threshold_tie_prefers_smaller():
    gold = {("d", 0, 1, 0), ("d", 1, 0, 0)}
    scored = [ScoredFact("d", 0, 1, 0, 0.9), ScoredFact("d", 2, 1, 0, 0.5), ScoredFact("d", 2, 0, 0, 0.45),
              ScoredFact("d", 1, 0, 0, 0.4), ScoredFact("d", 1, 2, 0, 0.3)]
    # theta 0.9: P 1, R 1/2, F1 2/3.  theta 0.4: P 1/2, R 1, F1 2/3.  Tie goes to 0.4.
    assert pick_threshold(scored, gold) == 0.4


def test_threshold_rejects_empty():
    with pytest.raises(ValueError):
        pick_threshold([], set())


def test_threshold_matches_exhaustive_scan_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 25))
        keys = list(itertools.product(range(3), range(3), range(2)))[:n]
        scored = [ScoredFact("d", h, t, r, float(np.round(rng.random(), 1))) for h, t, r in keys]
        gold = {("d", h, t, r) for h, t, r in keys if rng.random() < 0.4}
        theta = pick_threshold(scored, gold)
        best_f, best_theta = exhaustive_threshold(scored, gold)
        assert theta == best_theta
        pred = facts_above(scored, theta)
        assert f1_by_hand(len(pred & gold), len(pred), len(gold)) == pytest.approx(best_f, abs=1e-15)
