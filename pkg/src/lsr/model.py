"""The full LSR forward pass: encode, build nodes, refine, classify."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .docmodel import Document, NodeKind, NodePlan, PlanMode, build_node_plan
from .encoder import BiLSTMParams, EmbeddingTable, encode_sentences, pooling_matrix
from .induction import InductionParams
from .numerics import Tensor, concat, matmul, take_rows
from .reasoner import (BlockParams, ClassifierParams, RefinementTrace, bce_loss, classify, pair_targets,
                       refine)


@dataclass
class ModelConfig:
    k: int
    d: int = 120
    d_emb: int = 100
    blocks: int = 2
    l_sub: int = 2
    dropout: float = 0.3
    mode: str = PlanMode.WITH_MDP.value
    structure: str = "induced"  # or "uniform" for the frozen-structure baseline
    share_induction: bool = False
    emb_scale: float = 1.0

    def __post_init__(self):
        PlanMode(self.mode)
        if self.structure not in ("induced", "uniform"):
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.blocks < 1:
            raise ValueError("need at least one refinement block")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PreparedDoc:
    doc: Document
    plan: NodePlan
    pooling: np.ndarray
    entity_ids: list[int]
    entity_rows: list[int]
    pairs: list[tuple[int, int]]  # ordered (head, tail) positions into entity_ids
    targets: np.ndarray


class LSRModel:
    """Parameter store plus forward pass.

    ``params`` is a flat, ordered name -> Tensor mapping; the structured
    views (embedding table, BiLSTM, blocks, classifier) share those tensors.
    """

    def __init__(self, config: ModelConfig, vocab: Sequence[str], seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        self.emb = EmbeddingTable.random(vocab, c.d_emb, rng, scale=c.emb_scale)
        self.lstm = BiLSTMParams.init(c.d_emb, c.d, rng)
        shared = InductionParams.init(c.d, rng, prefix="block.ind") if c.share_induction else None
        self.blocks = [BlockParams.init(c.d, c.l_sub, rng, prefix=f"block{t}", induction=shared)
                       for t in range(c.blocks)]
        self.classifier = ClassifierParams.init(c.d, c.k, rng)
        self._prepared: dict[int, PreparedDoc] = {}

    @property
    def vocab(self) -> list[str]:
        return self.emb.vocab

    @property
    def params(self) -> dict[str, Tensor]:
        out = {"emb": self.emb.matrix}
        out.update({f"lstm.{k}": v for k, v in self.lstm.tensors().items()})
        seen = set()
        for t, block in enumerate(self.blocks):
            for k, v in block.tensors().items():
                if id(v) in seen:
                    continue
                seen.add(id(v))
                name = f"block.{k}" if self.config.share_induction and k.startswith("ind.") else f"block{t}.{k}"
                out[name] = v
        out["cls.W_e"] = self.classifier.W_e
        out["cls.b_e"] = self.classifier.b_e
        return out

    def prepare(self, doc: Document) -> PreparedDoc:
        key = id(doc)
        hit = self._prepared.get(key)
        if hit is not None and hit.doc is doc:
            return hit
        plan = build_node_plan(doc, self.config.mode)
        rows = plan.entity_rows()
        entity_ids = sorted(rows)
        m = len(entity_ids)
        pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
        pos = {e: i for i, e in enumerate(entity_ids)}
        gold = {(pos[f.h], pos[f.t], f.r) for f in doc.facts if f.r < self.config.k}
        prep = PreparedDoc(doc, plan, pooling_matrix(doc, plan), entity_ids,
                           [rows[e] for e in entity_ids], pairs, pair_targets(pairs, gold, self.config.k))
        self._prepared[key] = prep
        return prep

    def node_matrix(self, prep: PreparedDoc) -> Tensor:
        reps = encode_sentences([s.tokens for s in prep.doc.sentences], self.emb, self.lstm)
        tokens = reps[0] if len(reps) == 1 else concat(reps, axis=0)
        return matmul(Tensor(prep.pooling), tokens)

    def forward(self, doc: Document, train: bool = False, rng: np.random.Generator | None = None,
                blocks: int | None = None) -> tuple[Tensor | None, PreparedDoc, RefinementTrace]:
        """Probabilities over (ordered entity pair, relation) for one document.

        Returns ``None`` probabilities for documents with fewer than two entities.
        """
        prep = self.prepare(doc)
        U0 = self.node_matrix(prep)
        use = self.blocks if blocks is None else self.blocks[:blocks]
        U, trace = refine(U0, use, self.config.dropout, train, rng, self.config.structure)
        if not prep.pairs:
            return None, prep, trace
        E = take_rows(U, prep.entity_rows)
        return classify(E, prep.pairs, self.classifier), prep, trace

    def loss(self, doc: Document, train: bool = False, rng: np.random.Generator | None = None) -> Tensor | None:
        probs, prep, _ = self.forward(doc, train, rng)
        if probs is None:
            return None
        return bce_loss(probs, prep.targets)
