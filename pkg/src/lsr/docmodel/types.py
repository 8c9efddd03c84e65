from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class CorpusError(ValueError):
    """Malformed record or violated document invariant."""


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    dep_head: tuple[int, ...]  # 1-based head per token, 0 marks the root

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "dep_head", tuple(int(h) for h in self.dep_head))
        check_tree(self.dep_head, len(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def head_index(self, i: int) -> int | None:
        """0-based head of token ``i``; None for the root."""
        h = self.dep_head[i]
        return None if h == 0 else h - 1


def check_tree(dep_head, n: int) -> None:
    if len(dep_head) != n:
        raise CorpusError(f"dep_head length {len(dep_head)} != token count {n}")
    if n == 0:
        raise CorpusError("empty sentence")
    for h in dep_head:
        if not 0 <= h <= n:
            raise CorpusError(f"dep_head value {h} out of range [0, {n}]")
    roots = [i for i, h in enumerate(dep_head) if h == 0]
    if len(roots) != 1:
        raise CorpusError(f"dependency tree must have exactly one root, found {len(roots)}")
    # every token must reach the root without revisiting a node
    state = [0] * n  # 0 unseen, 1 on current walk, 2 reaches root
    state[roots[0]] = 2
    for start in range(n):
        walk = []
        i = start
        while state[i] == 0:
            state[i] = 1
            walk.append(i)
            i = dep_head[i] - 1
        if state[i] == 1:
            raise CorpusError(f"dependency heads contain a cycle through token {i}")
        for j in walk:
            state[j] = 2


@dataclass(frozen=True)
class Mention:
    entity_id: int
    sent: int
    start: int
    end: int  # exclusive

    @property
    def span(self) -> range:
        return range(self.start, self.end)


@dataclass(frozen=True)
class Entity:
    id: int
    mentions: tuple[Mention, ...]


@dataclass(frozen=True)
class RelationFact:
    h: int
    t: int
    r: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]
    entities: tuple[Entity, ...]
    facts: tuple[RelationFact, ...] = ()

    def __post_init__(self):
        for name in ("sentences", "entities", "facts"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        validate_document(self)

    @property
    def mentions(self) -> list[Mention]:
        """All mentions in document order (sentence, then start)."""
        ms = [m for e in self.entities for m in e.mentions]
        return sorted(ms, key=lambda m: (m.sent, m.start, m.end))

    def entity(self, eid: int) -> Entity:
        for e in self.entities:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def mention_text(self, m: Mention) -> str:
        return " ".join(self.sentences[m.sent].tokens[m.start:m.end])

    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


def validate_document(doc: Document) -> None:
    where = f"doc {doc.doc_id!r}"
    ids = [e.id for e in doc.entities]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"{where}: duplicate entity id")
    spans: dict[int, list[tuple[int, int]]] = {}
    for e in doc.entities:
        if not e.mentions:
            raise CorpusError(f"{where}: entity {e.id} has no mentions")
        for m in e.mentions:
            if m.entity_id != e.id:
                raise CorpusError(f"{where}: mention entity id {m.entity_id} under entity {e.id}")
            if not 0 <= m.sent < len(doc.sentences):
                raise CorpusError(f"{where}: entity {e.id} mention sentence {m.sent} out of range")
            n = len(doc.sentences[m.sent])
            if not 0 <= m.start < m.end <= n:
                raise CorpusError(
                    f"{where}: entity {e.id} mention span [{m.start}, {m.end}) out of range for {n} tokens")
            spans.setdefault(m.sent, []).append((m.start, m.end))
    for sent, ss in spans.items():
        ss.sort()
        for (a0, a1), (b0, b1) in zip(ss, ss[1:]):
            if b0 < a1:
                raise CorpusError(f"{where}: overlapping mentions in sentence {sent}")
    known = set(ids)
    seen = set()
    for f in doc.facts:
        if f.h not in known or f.t not in known:
            raise CorpusError(f"{where}: fact references unknown entity ({f.h}, {f.t})")
        if f.h == f.t:
            raise CorpusError(f"{where}: fact head equals tail ({f.h})")
        if f.r < 0:
            raise CorpusError(f"{where}: negative relation id {f.r}")
        if f in seen:
            raise CorpusError(f"{where}: duplicate fact {f}")
        seen.add(f)


class NodeKind(str, Enum):
    MENTION = "mention"
    ENTITY = "entity"
    MDP = "mdp"
    TOKEN = "token"


class PlanMode(str, Enum):
    WITH_MDP = "with-mdp"
    FULL_TOKENS = "full-tokens"


@dataclass(frozen=True)
class NodeDesc:
    kind: NodeKind
    ref: object  # Mention, entity id, or (sent, token)


@dataclass(frozen=True)
class NodePlan:
    nodes: tuple[NodeDesc, ...]
    mode: PlanMode = PlanMode.WITH_MDP

    @property
    def n(self) -> int:
        return len(self.nodes)

    def indices(self, kind: NodeKind) -> list[int]:
        return [i for i, d in enumerate(self.nodes) if d.kind == kind]

    def entity_rows(self) -> dict[int, int]:
        return {d.ref: i for i, d in enumerate(self.nodes) if d.kind == NodeKind.ENTITY}


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)

    def __iter__(self):
        return iter(self.documents)

    def __len__(self) -> int:
        return len(self.documents)

    def __getitem__(self, i):
        return self.documents[i]

    @property
    def num_relations(self) -> int:
        return max((f.r for d in self.documents for f in d.facts), default=-1) + 1
