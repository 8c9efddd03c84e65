"""Seeded synthetic corpora with planted two-hop (bridge) relations.

Every sentence states one base fact ``head <trigger_r> tail``.  The last
relation id is compositional: ``comp(A, C)`` is gold exactly when ``A r_first B``
and ``B r_second C`` are stated in different sentences and A, C never share a
sentence.  Base relations ``0 .. k-2`` are always intra-sentence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Corpus, CorpusError, Document, Entity, Mention, RelationFact, Sentence


@dataclass(frozen=True)
class GeneratorSpec:
    documents: int = 100
    sentences_per_doc: int = 4
    entities_per_doc: int = 6
    num_relations: int = 4
    bridge_prob: float = 0.5
    vocab_size: int = 200
    sentence_length: int = 8
    max_tries: int = 200

    @property
    def chain_relations(self) -> tuple[int, int]:
        return 0, min(1, self.num_relations - 2)

    @property
    def composite_relation(self) -> int:
        return self.num_relations - 1


def _check(spec: GeneratorSpec) -> None:
    if spec.num_relations < 2:
        raise CorpusError("generator: need at least 2 relations (one base, one composite)")
    if spec.sentences_per_doc < 1 or spec.entities_per_doc < 2:
        raise CorpusError("generator: need >= 1 sentence and >= 2 entities per document")
    if spec.bridge_prob > 0 and spec.sentences_per_doc < 2:
        raise CorpusError("generator: bridge chains need >= 2 sentences per document")
    if spec.sentence_length < 3:
        raise CorpusError("generator: sentences need room for two mentions and a trigger")
    if spec.entities_per_doc > 2 * spec.sentences_per_doc:
        raise CorpusError(
            f"generator: {spec.entities_per_doc} entities cannot fit in {spec.sentences_per_doc} "
            f"sentences of one fact each")
    if spec.bridge_prob > 0 and (spec.entities_per_doc < 3
                                 or spec.entities_per_doc - 3 > 2 * (spec.sentences_per_doc - 2)):
        raise CorpusError("generator: entity count incompatible with a bridge chain")
    if spec.entities_per_doc > spec.sentences_per_doc * spec.sentence_length:
        raise CorpusError("generator: more entities than tokens")
    n_fill = spec.vocab_size - (spec.num_relations - 1) - spec.vocab_size // 2
    if spec.vocab_size // 2 < spec.entities_per_doc or n_fill < 1:
        raise CorpusError(f"generator: vocab_size {spec.vocab_size} too small")
    if not 0.0 <= spec.bridge_prob <= 1.0:
        raise CorpusError("generator: bridge_prob outside [0, 1]")


def composite_facts(facts_by_sent: list[tuple[int, int, int]], spec: GeneratorSpec) -> list[tuple[int, int, int]]:
    """All (A, B, C) bridges implied by per-sentence base facts (h, r, t)."""
    r1, r2 = spec.chain_relations
    out = []
    for s, (a, ra, b) in enumerate(facts_by_sent):
        if ra != r1:
            continue
        for s2, (b2, rb, c) in enumerate(facts_by_sent):
            if s2 != s and rb == r2 and b2 == b and c != a:
                out.append((a, b, c))
    return out


def _cooccur(facts_by_sent, x, y) -> bool:
    return any({x, y} <= {h, t} for h, _, t in facts_by_sent)


def _plan_facts(rng: np.random.Generator, spec: GeneratorSpec, chain: bool):
    S, E = spec.sentences_per_doc, spec.entities_per_doc
    base = spec.num_relations - 1
    r1, r2 = spec.chain_relations
    for _ in range(spec.max_tries):
        order = [int(i) for i in rng.permutation(E)]
        facts: list[tuple[int, int, int]] = []
        unused = list(order)
        if chain:
            a, b, c = unused[:3]
            unused = unused[3:]
            facts += [(a, r1, b), (b, r2, c)]
        while len(facts) < S:
            if len(unused) >= 2:
                h, t = unused[0], unused[1]
                unused = unused[2:]
            elif len(unused) == 1:
                h = unused.pop()
                t = int(rng.choice([e for e in range(E) if e != h]))
                if rng.random() < 0.5:
                    h, t = t, h
            else:
                h, t = (int(x) for x in rng.choice(E, size=2, replace=False))
            facts.append((h, int(rng.integers(base)), t))
        if unused:
            continue
        bridges = composite_facts(facts, spec)
        if chain:
            if bridges != [(a, b, c)] or _cooccur(facts, a, c):
                continue
        elif bridges:
            continue
        if len({(h, t) for h, _, t in facts}) != len(facts):
            continue
        order_s = [int(i) for i in rng.permutation(S)]
        return [facts[i] for i in order_s], bridges
    raise CorpusError("generator: could not satisfy constraints; loosen the GeneratorSpec")


def _sentence(rng: np.random.Generator, spec: GeneratorSpec, head_tok: str, trig: str, tail_tok: str,
              fillers: list[str]) -> tuple[Sentence, int, int]:
    L = spec.sentence_length
    # linear order: head mention < trigger < tail mention
    pos = sorted(int(p) for p in rng.choice(L, size=3, replace=False))
    p_head, p_trig, p_tail = pos
    tokens = [fillers[int(i)] for i in rng.integers(len(fillers), size=L)]
    tokens[p_head], tokens[p_trig], tokens[p_tail] = head_tok, trig, tail_tok
    # random tree rooted at the trigger with the two mentions in different branches
    heads = [0] * L
    members = {0: [p_trig], 1: [p_trig], 2: [p_trig]}
    others = [i for i in range(L) if i not in pos]
    for i in (int(x) for x in rng.permutation(others)):
        b = int(rng.integers(3))
        heads[i] = int(rng.choice(members[b])) + 1
        members[b].append(i)
    heads[p_head] = int(rng.choice(members[1])) + 1
    heads[p_tail] = int(rng.choice(members[2])) + 1
    heads[p_trig] = 0
    return Sentence(tuple(tokens), tuple(heads)), p_head, p_tail


def generate_synthetic_corpus(spec: GeneratorSpec, seed: int) -> Corpus:
    _check(spec)
    rng = np.random.default_rng(seed)
    base = spec.num_relations - 1
    n_names = spec.vocab_size // 2
    names = [f"ent{i}" for i in range(n_names)]
    triggers = [f"rel{r}" for r in range(base)]
    fillers = [f"w{i}" for i in range(spec.vocab_size - n_names - base)]
    docs = []
    for di in range(spec.documents):
        chain = rng.random() < spec.bridge_prob
        facts_by_sent, bridges = _plan_facts(rng, spec, chain)
        surface = [names[int(i)] for i in rng.choice(n_names, size=spec.entities_per_doc, replace=False)]
        sentences, mentions = [], {e: [] for e in range(spec.entities_per_doc)}
        for s, (h, r, t) in enumerate(facts_by_sent):
            sent, ph, pt = _sentence(rng, spec, surface[h], triggers[r], surface[t], fillers)
            sentences.append(sent)
            mentions[h].append(Mention(h, s, ph, ph + 1))
            mentions[t].append(Mention(t, s, pt, pt + 1))
        facts = {RelationFact(h, t, r) for h, r, t in facts_by_sent}
        facts |= {RelationFact(a, c, spec.composite_relation) for a, _, c in bridges}
        entities = tuple(Entity(e, tuple(ms)) for e, ms in mentions.items())
        docs.append(Document(f"syn-{seed}-{di}", tuple(sentences), entities,
                             tuple(sorted(facts, key=lambda f: (f.h, f.t, f.r)))))
    return Corpus(docs)
