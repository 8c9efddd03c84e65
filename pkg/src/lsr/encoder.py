"""Token embeddings, BiLSTM context encoding and initial node construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .docmodel import Document, NodeKind, NodePlan
from .numerics import Tensor, concat, matmul, reshape, sigmoid, stack_rows, take_rows, tanh, transpose
from .numerics.tensor import ShapeError

UNK = "<unk>"


class EmbeddingTable:
    """Token -> row lookup over a trainable ``|V| x d_emb`` matrix; row 0 is unk."""

    def __init__(self, vocab: Sequence[str], matrix: Tensor):
        if not vocab or vocab[0] != UNK:
            raise ValueError("vocab must start with the unk token")
        if matrix.shape[0] != len(vocab):
            raise ShapeError(f"embedding matrix has {matrix.shape[0]} rows for {len(vocab)} tokens")
        self.vocab = list(vocab)
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, 0) for t in tokens]

    def lookup(self, tokens: Sequence[str]) -> Tensor:
        return take_rows(self.matrix, self.ids(tokens))

    @classmethod
    def random(cls, vocab: Sequence[str], dim: int, rng: np.random.Generator, scale: float = 1.0,
               name: str = "emb") -> "EmbeddingTable":
        vocab = [UNK] + [t for t in vocab if t != UNK]
        mat = rng.normal(0.0, scale / np.sqrt(dim), size=(len(vocab), dim))
        return cls(vocab, Tensor(mat, requires_grad=True, name=name))


def build_vocab(docs: Iterable[Document], min_count: int = 1) -> list[str]:
    counts: dict[str, int] = {}
    for d in docs:
        for s in d.sentences:
            for t in s.tokens:
                counts[t] = counts.get(t, 0) + 1
    return [UNK] + sorted(t for t, c in counts.items() if c >= min_count and t != UNK)


def load_pretrained(path, vocab: Sequence[str], dim: int, rng: np.random.Generator) -> np.ndarray:
    """Embedding matrix for ``vocab``; rows missing from the file are random.

    The file holds whitespace-separated ``token v1 ... v_dim`` lines.
    """
    index = {t: i for i, t in enumerate(vocab)}
    mat = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(vocab), dim))
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, found {len(parts) - 1}")
            if parts[0] in index:
                mat[index[parts[0]]] = np.array(parts[1:], dtype=np.float64)
    return mat


@dataclass
class LSTMParams:
    W_ih: Tensor  # d_in x 4h, gate order i, f, g, o
    W_hh: Tensor  # h x 4h
    b: Tensor  # 4h

    @property
    def hidden(self) -> int:
        return self.W_hh.shape[0]


@dataclass
class BiLSTMParams:
    fwd: LSTMParams
    bwd: LSTMParams

    @property
    def out_dim(self) -> int:
        return self.fwd.hidden + self.bwd.hidden

    def tensors(self) -> dict[str, Tensor]:
        return {f"{d}.{k}": getattr(getattr(self, d), k) for d in ("fwd", "bwd") for k in ("W_ih", "W_hh", "b")}

    @classmethod
    def init(cls, d_in: int, d_out: int, rng: np.random.Generator, prefix: str = "lstm") -> "BiLSTMParams":
        if d_out % 2:
            raise ValueError(f"BiLSTM output dim {d_out} must be even")
        h = d_out // 2
        bound = 1.0 / np.sqrt(h)

        def one(tag):
            return LSTMParams(
                Tensor(rng.uniform(-bound, bound, (d_in, 4 * h)), requires_grad=True, name=f"{prefix}.{tag}.W_ih"),
                Tensor(rng.uniform(-bound, bound, (h, 4 * h)), requires_grad=True, name=f"{prefix}.{tag}.W_hh"),
                Tensor(rng.uniform(-bound, bound, 4 * h), requires_grad=True, name=f"{prefix}.{tag}.b"))

        return cls(one("fwd"), one("bwd"))


def _run_lstm(x: Tensor, p: LSTMParams) -> Tensor:
    """Left-to-right LSTM over a padded batch ``x`` (S x T x d_in); returns S x T x h."""
    S, T, d_in = x.shape
    h_dim = p.hidden
    xw = reshape(matmul(reshape(x, (S * T, d_in)), p.W_ih), (S, T, 4 * h_dim))
    xw = transpose(xw, (1, 0, 2))  # T x S x 4h
    h = Tensor(np.zeros((S, h_dim)))
    c = Tensor(np.zeros((S, h_dim)))
    outs = []
    for t in range(T):
        gates = xw[t] + matmul(h, p.W_hh) + p.b
        i = sigmoid(gates[:, :h_dim])
        f = sigmoid(gates[:, h_dim:2 * h_dim])
        g = tanh(gates[:, 2 * h_dim:3 * h_dim])
        o = sigmoid(gates[:, 3 * h_dim:])
        c = f * c + i * g
        h = o * tanh(c)
        outs.append(h)
    return transpose(stack_rows(outs), (1, 0, 2))


def encode_sentences(token_lists: Sequence[Sequence[str]], emb: EmbeddingTable,
                     params: BiLSTMParams) -> list[Tensor]:
    """BiLSTM over several sentences at once; one ``len x d`` tensor per sentence.

    Row j is ``[backward state at j ; forward state at j]``.  Padding sits at
    the end of each row so it never reaches a real position of the
    left-to-right pass; the right-to-left pass runs on per-sentence reversed
    tokens for the same reason.
    """
    if not token_lists or any(len(t) == 0 for t in token_lists):
        raise ValueError("encode: empty sentence")
    lens = [len(t) for t in token_lists]
    S, T = len(lens), max(lens)
    fwd_ids = np.zeros((S, T), dtype=np.int64)
    bwd_ids = np.zeros((S, T), dtype=np.int64)
    for s, toks in enumerate(token_lists):
        ids = emb.ids(toks)
        fwd_ids[s, :lens[s]] = ids
        bwd_ids[s, :lens[s]] = ids[::-1]
    d = emb.dim
    x_f = reshape(take_rows(emb.matrix, fwd_ids.ravel()), (S, T, d))
    x_b = reshape(take_rows(emb.matrix, bwd_ids.ravel()), (S, T, d))
    h_f = reshape(_run_lstm(x_f, params.fwd), (S * T, params.fwd.hidden))
    h_b = reshape(_run_lstm(x_b, params.bwd), (S * T, params.bwd.hidden))
    f_rows = np.concatenate([s * T + np.arange(n) for s, n in enumerate(lens)])
    b_rows = np.concatenate([s * T + np.arange(n)[::-1] for s, n in enumerate(lens)])
    tokens = concat([take_rows(h_b, b_rows), take_rows(h_f, f_rows)], axis=1)
    bounds = np.cumsum([0] + lens)
    return [tokens[int(lo):int(hi)] for lo, hi in zip(bounds[:-1], bounds[1:])]


def encode_sentence(tokens: Sequence[str], emb: EmbeddingTable, params: BiLSTMParams) -> Tensor:
    return encode_sentences([tokens], emb, params)[0]


def pooling_matrix(doc: Document, plan: NodePlan) -> np.ndarray:
    """Constant ``n x |tokens|`` averaging matrix mapping token rows to node rows."""
    offsets = np.cumsum([0] + [len(s) for s in doc.sentences])
    n_tok = int(offsets[-1])
    M = np.zeros((plan.n, n_tok))
    mention_rows: dict[int, list[int]] = {}
    for i, desc in enumerate(plan.nodes):
        if desc.kind is NodeKind.MENTION:
            m = desc.ref
            lo = offsets[m.sent]
            M[i, lo + m.start:lo + m.end] = 1.0 / (m.end - m.start)
            mention_rows.setdefault(m.entity_id, []).append(i)
        elif desc.kind in (NodeKind.MDP, NodeKind.TOKEN):
            s, t = desc.ref
            M[i, offsets[s] + t] = 1.0
    for i, desc in enumerate(plan.nodes):
        if desc.kind is NodeKind.ENTITY:
            rows = mention_rows.get(desc.ref)
            if not rows:
                raise ValueError(f"node plan has entity {desc.ref} without mention nodes")
            M[i] = M[rows].mean(axis=0)
    return M


def build_nodes(doc: Document, token_reps: Sequence[Tensor] | Tensor, plan: NodePlan) -> Tensor:
    """Initial node matrix U0 (n x d) in plan order."""
    if not isinstance(token_reps, Tensor):
        if len(token_reps) != len(doc.sentences):
            raise ValueError(f"doc {doc.doc_id!r}: {len(token_reps)} sentence encodings for "
                             f"{len(doc.sentences)} sentences")
        token_reps = concat(list(token_reps), axis=0)
    M = pooling_matrix(doc, plan)
    if M.shape[1] != token_reps.shape[0]:
        raise ValueError(f"doc {doc.doc_id!r}: plan covers {M.shape[1]} tokens, encodings {token_reps.shape[0]}")
    return matmul(Tensor(M), token_reps)
