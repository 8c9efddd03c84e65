"""Micro F1, Ign F1, intra/inter-sentence F1 and dev-set threshold selection."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple

from ..docmodel import Corpus, Document


class ScoredFact(NamedTuple):
    doc_id: str
    h: int
    t: int
    r: int
    p: float


Fact = tuple[str, int, int, int]  # (doc_id, head, tail, relation)


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    ign_f1: float
    intra_f1: float
    inter_f1: float
    threshold: float | None
    n_pred: int
    n_gold: int
    n_correct: int
    n_intra_gold: int
    n_inter_gold: int
    per_relation: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def prf(n_correct: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = n_correct / n_pred if n_pred else 0.0
    r = n_correct / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def gold_facts(corpus: Iterable[Document]) -> set[Fact]:
    return {(d.doc_id, f.h, f.t, f.r) for d in corpus for f in d.facts}


def is_intra_pair(doc: Document, h: int, t: int) -> bool:
    """True when some mention of ``h`` and some mention of ``t`` share a sentence."""
    sh = {m.sent for m in doc.entity(h).mentions}
    return any(m.sent in sh for m in doc.entity(t).mentions)


def surface_key(doc: Document, h: int, t: int, r: int) -> tuple:
    """Entity-id-free identity of a fact, used to match against training facts."""
    def names(eid):
        return tuple(sorted({doc.mention_text(m) for m in doc.entity(eid).mentions}))
    return names(h), names(t), r


def train_fact_keys(corpus: Iterable[Document]) -> set[tuple]:
    return {surface_key(d, f.h, f.t, f.r) for d in corpus for f in d.facts}


def pick_threshold(scored: Iterable[ScoredFact], gold: set[Fact]) -> float:
    """Score threshold (predict ``p >= theta``) maximising micro F1 on dev.

    Every distinct score is a candidate; ties in F1 go to the smaller
    threshold.
    """
    scored = sorted(scored, key=lambda s: -s.p)
    if not scored:
        raise ValueError("pick_threshold: no scored facts")
    n_gold = len(gold)
    best_f, best_theta = -1.0, scored[0].p
    tp = 0
    i = 0
    while i < len(scored):
        theta = scored[i].p
        while i < len(scored) and scored[i].p == theta:
            s = scored[i]
            tp += (s.doc_id, s.h, s.t, s.r) in gold
            i += 1
        _, _, f = prf(tp, i, n_gold)
        if f >= best_f:  # later candidates are smaller thresholds
            best_f, best_theta = f, theta
    return best_theta


def evaluate(predicted: Iterable[Fact], gold: set[Fact], train_keys: set[tuple], corpus: Corpus | Iterable[Document],
             threshold: float | None = None) -> MetricsReport:
    """Micro metrics over (doc, head, tail, relation) facts.

    Ign F1 follows the DocRED convention: correct predictions whose surface
    identity occurs among training facts are removed from both the correct
    and predicted counts; recall is left as is.
    """
    pred = set(predicted)
    docs = {d.doc_id: d for d in corpus}
    correct = pred & gold
    p, r, f = prf(len(correct), len(pred), len(gold))

    in_train = sum(1 for (di, h, t, rel) in correct if surface_key(docs[di], h, t, rel) in train_keys)
    ign_p = (len(correct) - in_train) / (len(pred) - in_train) if len(pred) - in_train > 0 else 0.0
    ign_f = 2 * ign_p * r / (ign_p + r) if ign_p + r > 0 else 0.0

    intra_cache: dict[tuple[str, int, int], bool] = {}

    def intra(fact):
        key = fact[:3]
        if key not in intra_cache:
            intra_cache[key] = is_intra_pair(docs[fact[0]], fact[1], fact[2])
        return intra_cache[key]

    def split_f1(want_intra):
        pp = {x for x in pred if intra(x) == want_intra}
        gg = {x for x in gold if intra(x) == want_intra}
        return prf(len(pp & gg), len(pp), len(gg))[2], len(gg)

    intra_f, n_intra = split_f1(True)
    inter_f, n_inter = split_f1(False)

    per_rel: dict[int, dict[str, int]] = {}
    for name, facts in (("pred", pred), ("gold", gold), ("correct", correct)):
        for x in facts:
            per_rel.setdefault(x[3], {"pred": 0, "gold": 0, "correct": 0})[name] += 1
    return MetricsReport(p, r, f, ign_f, intra_f, inter_f, threshold, len(pred), len(gold), len(correct),
                         n_intra, n_inter, {str(k): v for k, v in sorted(per_rel.items())})


def facts_above(scored: Iterable[ScoredFact], threshold: float) -> set[Fact]:
    return {(s.doc_id, s.h, s.t, s.r) for s in scored if s.p >= threshold}
