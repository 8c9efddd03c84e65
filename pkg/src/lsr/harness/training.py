"""Training loop, prediction and structure dumps."""

from __future__ import annotations

import copy
import json
import logging
from typing import Iterable

import numpy as np

from ..docmodel import Corpus, Document, load_corpus
from ..docmodel.nodeplan import node_label
from ..encoder import build_vocab, load_pretrained
from ..induction import SingularStructure
from ..model import LSRModel, ModelConfig
from ..numerics import AdamState, Tape, adam_step
from .checkpoint import Checkpoint
from .config import ConfigError, RunConfig
from .metrics import (MetricsReport, ScoredFact, evaluate, facts_above, gold_facts, pick_threshold,
                      train_fact_keys)

log = logging.getLogger(__name__)


def model_config(cfg: RunConfig, k: int) -> ModelConfig:
    return ModelConfig(k=k, d=cfg.d, d_emb=cfg.d_emb, blocks=cfg.blocks, l_sub=cfg.l_sub, dropout=cfg.dropout,
                       mode=cfg.mode, structure=cfg.structure, share_induction=cfg.share_induction,
                       emb_scale=cfg.emb_scale)


def snapshot(model: LSRModel, cfg: RunConfig, epoch: int, history: list[dict],
             threshold: float | None) -> Checkpoint:
    return Checkpoint({"run": cfg.to_dict(), "model": model.config.to_dict()}, list(model.vocab),
                      {k: v.data.copy() for k, v in model.params.items()}, epoch, copy.deepcopy(history),
                      threshold)


def model_from_checkpoint(ckpt: Checkpoint) -> LSRModel:
    mc = ModelConfig.from_dict(ckpt.config["model"])
    model = LSRModel(mc, ckpt.vocab, seed=0)
    params = model.params
    if set(params) != set(ckpt.tensors):
        raise ValueError("checkpoint tensors do not match the model layout")
    for name, p in params.items():
        if p.shape != ckpt.tensors[name].shape:
            raise ValueError(f"checkpoint tensor {name} has shape {ckpt.tensors[name].shape}, expected {p.shape}")
        p.data = ckpt.tensors[name].copy()
    return model


def structure_deviation(trace) -> float:
    """Largest violation of ``root[j] + sum_i A[i, j] == 1`` in a refinement trace."""
    worst = 0.0
    for st in trace.structures:
        worst = max(worst, float(np.abs(st.root.data + st.A.data.sum(axis=0) - 1.0).max()))
    return worst


def predict(model: LSRModel, corpus: Iterable[Document], blocks: int | None = None,
            stats: dict | None = None) -> list[ScoredFact]:
    """Eval-mode scores for every ordered entity pair and relation."""
    out: list[ScoredFact] = []
    dev = 0.0
    skipped = 0
    for doc in corpus:
        try:
            probs, prep, trace = model.forward(doc, train=False, blocks=blocks)
        except SingularStructure as exc:
            log.warning("doc %s skipped: %s", doc.doc_id, exc)
            skipped += 1
            continue
        if model.config.structure == "induced":
            dev = max(dev, structure_deviation(trace))
        if probs is None:
            continue
        ids = prep.entity_ids
        for (i, j), row in zip(prep.pairs, probs.data):
            for r, p in enumerate(row):
                out.append(ScoredFact(doc.doc_id, ids[i], ids[j], r, float(p)))
    if stats is not None:
        stats["max_norm_deviation"] = dev
        stats["skipped"] = skipped
    return out


def score_corpus(model: LSRModel, corpus: Corpus, train_keys: set, threshold: float | str = "dev",
                 blocks: int | None = None, stats: dict | None = None) -> MetricsReport:
    scored = predict(model, corpus, blocks=blocks, stats=stats)
    gold = gold_facts(corpus)
    theta = pick_threshold(scored, gold) if threshold == "dev" else float(threshold)
    return evaluate(facts_above(scored, theta), gold, train_keys, corpus, threshold=theta)


def _load(path: str | None, what: str) -> Corpus | None:
    if path is None:
        return None
    try:
        return load_corpus(path)
    except FileNotFoundError:
        raise ConfigError(f"{what} corpus not found: {path}") from None


def train(cfg: RunConfig, train_corpus: Corpus | None = None, dev_corpus: Corpus | None = None,
          model: LSRModel | None = None) -> tuple[Checkpoint, LSRModel]:
    """Train with Adam on mini-batches; keep the parameters with the best dev F1.

    Returns the best checkpoint and the model loaded with its parameters.
    Epoch 0 in the history is the untrained model.
    """
    train_corpus = train_corpus if train_corpus is not None else _load(cfg.train, "train")
    dev_corpus = dev_corpus if dev_corpus is not None else _load(cfg.dev, "dev")
    if train_corpus is None or len(train_corpus) == 0:
        raise ConfigError("train: empty or missing training corpus")
    k = cfg.k if cfg.k is not None else max(train_corpus.num_relations,
                                            dev_corpus.num_relations if dev_corpus else 0)
    if model is None:
        vocab = build_vocab(train_corpus)
        model = LSRModel(model_config(cfg, k), vocab, seed=cfg.seed)
        if cfg.pretrained:
            rng = np.random.default_rng(cfg.seed)
            model.emb.matrix.data = load_pretrained(cfg.pretrained, model.vocab, cfg.d_emb, rng)
    params = model.params
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    order_rng = np.random.default_rng(seeds[0])
    drop_rng = np.random.default_rng(seeds[1])
    adam = AdamState(lr=cfg.lr)
    train_keys = train_fact_keys(train_corpus)
    history: list[dict] = []
    logfh = open(cfg.log, "w", encoding="utf-8") if cfg.log else None

    def record(entry):
        history.append(entry)
        log.info("epoch %d: %s", entry["epoch"], {k: v for k, v in entry.items() if k != "epoch"})
        if logfh:
            logfh.write(json.dumps(entry) + "\n")
            logfh.flush()

    def dev_eval(entry):
        if dev_corpus is None:
            return None
        stats: dict = {}
        rep = score_corpus(model, dev_corpus, train_keys, "dev", stats=stats)
        entry.update(dev_f1=rep.f1, dev_ign_f1=rep.ign_f1, dev_intra_f1=rep.intra_f1, dev_inter_f1=rep.inter_f1,
                     threshold=rep.threshold, max_norm_deviation=stats["max_norm_deviation"])
        return rep

    best = None
    try:
        entry = {"epoch": 0, "loss": None}
        rep = dev_eval(entry)
        record(entry)
        best_f1 = rep.f1 if rep is not None else -1.0
        best = snapshot(model, cfg, 0, history, entry.get("threshold"))
        docs = list(train_corpus)
        for epoch in range(1, cfg.epochs + 1):
            order = order_rng.permutation(len(docs))
            total, counted, skipped = 0.0, 0, 0
            for lo in range(0, len(order), cfg.batch_size):
                acc: dict[str, np.ndarray] = {}
                n_ok = 0
                for idx in order[lo:lo + cfg.batch_size]:
                    doc = docs[int(idx)]
                    try:
                        with Tape() as tape:
                            loss = model.loss(doc, train=True, rng=drop_rng)
                    except SingularStructure as exc:
                        log.warning("doc %s skipped: %s", doc.doc_id, exc)
                        skipped += 1
                        continue
                    if loss is None:
                        continue
                    grads = tape.backward(loss)
                    for name, p in params.items():
                        g = grads.get(p)
                        if g is not None:
                            acc[name] = acc[name] + g if name in acc else g.copy()
                    total += loss.item()
                    counted += 1
                    n_ok += 1
                if n_ok:
                    adam_step(adam, params, {k: v / n_ok for k, v in acc.items()})
            entry = {"epoch": epoch, "loss": total / max(counted, 1), "skipped": skipped}
            rep = dev_eval(entry)
            record(entry)
            score = rep.f1 if rep is not None else -entry["loss"]
            if score > best_f1:
                best_f1 = score
                best = snapshot(model, cfg, epoch, history, entry.get("threshold"))
    finally:
        if logfh:
            logfh.close()
    best.history = copy.deepcopy(history)
    final = model_from_checkpoint(best)
    return best, final


def induce_structure(model: LSRModel, doc: Document) -> dict:
    """Per-block edge/root marginals and node labels for one document (unscaled)."""
    _, prep, trace = model.forward(doc, train=False)
    nodes = [node_label(doc, d) for d in prep.plan.nodes]
    return {
        "doc_id": doc.doc_id,
        "blocks": [{"A": st.A.data.tolist(), "root": st.root.data.tolist(), "nodes": nodes}
                   for st in trace.structures],
    }
