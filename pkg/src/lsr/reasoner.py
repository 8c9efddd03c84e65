"""Dense GCN reasoning over induced structures, refinement, and the classifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .induction import InductionParams, SingularStructure, StructureMarginals, induce
from .numerics import (Tensor, clip, concat, dropout, log, matmul, mean, mul, relu, reshape, scale,
                       sigmoid, sub, take_rows, transpose)
from .numerics.tensor import ShapeError

PROB_EPS = 1e-7


@dataclass
class GCNLayer:
    W: Tensor  # d_out x d_in
    b: Tensor  # d_out


@dataclass
class BlockParams:
    induction: InductionParams
    layers: list[GCNLayer]
    W_comb: Tensor  # d x d, applied to concat of sub-layer outputs

    @classmethod
    def init(cls, d: int, l_sub: int, rng: np.random.Generator, prefix: str = "block",
             induction: InductionParams | None = None) -> "BlockParams":
        if d % l_sub:
            raise ValueError(f"hidden size {d} not divisible by {l_sub} sub-layers")
        sub_dim = d // l_sub
        layers = []
        for l in range(l_sub):
            d_in = d + l * sub_dim
            bound = 1.0 / np.sqrt(d_in)
            layers.append(GCNLayer(
                Tensor(rng.uniform(-bound, bound, (sub_dim, d_in)), requires_grad=True, name=f"{prefix}.gcn{l}.W"),
                Tensor(np.zeros(sub_dim), requires_grad=True, name=f"{prefix}.gcn{l}.b")))
        bound = 1.0 / np.sqrt(d)
        W_comb = Tensor(rng.uniform(-bound, bound, (d, d)), requires_grad=True, name=f"{prefix}.W_comb")
        ind = induction if induction is not None else InductionParams.init(d, rng, prefix=f"{prefix}.ind")
        return cls(ind, layers, W_comb)

    def tensors(self) -> dict[str, Tensor]:
        out = {f"ind.{k}": v for k, v in self.induction.tensors().items()}
        for l, layer in enumerate(self.layers):
            out[f"gcn{l}.W"] = layer.W
            out[f"gcn{l}.b"] = layer.b
        out["W_comb"] = self.W_comb
        return out


@dataclass
class ClassifierParams:
    W_e: Tensor  # d x k x d
    b_e: Tensor  # k

    @property
    def k(self) -> int:
        return self.b_e.shape[0]

    @classmethod
    def init(cls, d: int, k: int, rng: np.random.Generator) -> "ClassifierParams":
        bound = 1.0 / np.sqrt(d)
        return cls(Tensor(rng.uniform(-bound, bound, (d, k, d)), requires_grad=True, name="cls.W_e"),
                   Tensor(np.zeros(k), requires_grad=True, name="cls.b_e"))


@dataclass
class RefinementTrace:
    structures: list[StructureMarginals] = field(default_factory=list)
    nodes: list[Tensor] = field(default_factory=list)


def gcn_layer(A: Tensor, U_in: Tensor, W: Tensor, b: Tensor, dropout_rate: float = 0.0,
              train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """``u_i' = ReLU(sum_j A[i, j] W u_j + b)`` with inverted dropout on the output in train mode."""
    n = U_in.shape[0]
    if A.shape != (n, n) or W.shape[1] != U_in.shape[1] or b.shape != (W.shape[0],):
        raise ShapeError(f"gcn_layer: shape mismatch A{A.shape} U{U_in.shape} W{W.shape} b{b.shape}")
    out = relu(matmul(matmul(A, U_in), transpose(W)) + b)
    return dropout(out, dropout_rate, rng, train)


def dense_gcn_block(A: Tensor, U: Tensor, block: BlockParams, dropout_rate: float = 0.0,
                    train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Densely connected sub-layers over ``A``.

    Sub-layer l reads ``[U ; out_1 ; ... ; out_{l-1}]``.  The block returns
    ``(concat(out_1 .. out_L) + U) W_comb^T``: the input is added back so a
    node keeps its own features (``A`` has a zero diagonal).
    """
    d = block.W_comb.shape[0]
    if U.ndim != 2 or U.shape[1] != d:
        raise ShapeError(f"dense_gcn_block: node matrix {U.shape} for hidden size {d}")
    feats = [U]
    outs = []
    for layer in block.layers:
        x = feats[0] if len(feats) == 1 else concat(feats, axis=1)
        out = gcn_layer(A, x, layer.W, layer.b, dropout_rate, train, rng)
        outs.append(out)
        feats.append(out)
    h = outs[0] if len(outs) == 1 else concat(outs, axis=1)
    return matmul(h + U, transpose(block.W_comb))


def uniform_structure(n: int) -> StructureMarginals:
    """Frozen structure baseline: every off-diagonal edge weighted 1/n."""
    A = (1.0 - np.eye(n)) / n
    return StructureMarginals(Tensor(A), Tensor(np.full(n, 1.0 / n)), Tensor(0.0))


def refine(U0: Tensor, blocks: Sequence[BlockParams], dropout_rate: float = 0.0, train: bool = False,
           rng: np.random.Generator | None = None, structure: str = "induced") -> tuple[Tensor, RefinementTrace]:
    """Induce a structure from the current nodes, then reason over it; repeat per block."""
    if not blocks:
        raise ValueError("refine: need at least one block")
    trace = RefinementTrace()
    U = U0
    for t, block in enumerate(blocks, start=1):
        if structure == "uniform":
            st = uniform_structure(U.shape[0])
        else:
            try:
                st = induce(U, block.induction)
            except SingularStructure as exc:
                raise SingularStructure(str(exc), block=t) from None
        U = dense_gcn_block(st.A, U, block, dropout_rate, train, rng)
        trace.structures.append(st)
        trace.nodes.append(U)
    return U, trace


def classify(E: Tensor, pairs: Sequence[tuple[int, int]], params: ClassifierParams) -> Tensor:
    """Relation probabilities (len(pairs) x k) for ordered (head row, tail row) pairs.

    ``P(r | e_i, e_j) = sigmoid(e_i^T W_e[:, r, :] e_j + b_e[r])``.
    """
    m, d = E.shape
    for i, j in pairs:
        if i == j or not (0 <= i < m and 0 <= j < m):
            raise ValueError(f"classify: invalid entity pair ({i}, {j}) for {m} entities")
    k = params.k
    P = len(pairs)
    heads = take_rows(E, [i for i, _ in pairs])
    tails = take_rows(E, [j for _, j in pairs])
    hw = reshape(matmul(heads, reshape(params.W_e, (d, k * d))), (P, k, d))
    logits = reshape(matmul(hw, reshape(tails, (P, d, 1))), (P, k)) + params.b_e
    return sigmoid(logits)


def bce_loss(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean multi-label binary cross-entropy; probabilities clipped to [1e-7, 1 - 1e-7]."""
    if probs.shape != targets.shape:
        raise ShapeError(f"loss: probabilities {probs.shape} vs targets {targets.shape}")
    p = clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    y = Tensor(targets)
    ll = mul(y, log(p)) + mul(Tensor(1.0 - targets), log(sub(1.0, p)))
    return scale(mean(ll), -1.0)


def pair_targets(pairs: Sequence[tuple[int, int]], gold: set[tuple[int, int, int]], k: int) -> np.ndarray:
    """0/1 matrix over (pair, relation); ``gold`` holds (head, tail, r) in the same index space."""
    y = np.zeros((len(pairs), k))
    index = {p: i for i, p in enumerate(pairs)}
    for h, t, r in gold:
        if (h, t) in index:
            y[index[(h, t)], r] = 1.0
    return y
