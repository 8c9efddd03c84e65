"""Latent structure induction via the directed Matrix-Tree theorem.

Node ``i`` is the parent of node ``j`` with weight ``P[i, j] = exp(s[i, j])``
and ``j`` is the root with weight ``exp(s_root[j])``.  The induced adjacency
``A[i, j]`` is the marginal probability of the edge ``i -> j`` under the
distribution over rooted spanning arborescences, so every column satisfies
``root[j] + sum_i A[i, j] == 1``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .numerics import (SingularMatrix, Tensor, diag, diagonal, exp, inv_and_logdet, matmul, mul,
                       reshape, sum_, tanh, transpose)
from .numerics.tensor import ShapeError

JITTER = 1e-10
BRUTE_FORCE_MAX_N = 8


class SingularStructure(RuntimeError):
    def __init__(self, msg: str, block: int | None = None):
        super().__init__(msg if block is None else f"block {block}: {msg}")
        self.block = block


@dataclass
class InductionParams:
    W_p: Tensor  # d x d, parent projection
    W_c: Tensor  # d x d, child projection
    W_b: Tensor  # d x d, bilinear
    W_r: Tensor  # 1 x d, root

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, prefix: str = "ind") -> "InductionParams":
        bound = 1.0 / np.sqrt(d)

        def w(shape, tag):
            return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True, name=f"{prefix}.{tag}")

        return cls(w((d, d), "W_p"), w((d, d), "W_c"), w((d, d), "W_b"), w((1, d), "W_r"))

    def tensors(self) -> dict[str, Tensor]:
        return {"W_p": self.W_p, "W_c": self.W_c, "W_b": self.W_b, "W_r": self.W_r}


@dataclass
class StructureMarginals:
    A: Tensor  # n x n edge marginals, A[i, j] = P(i is the parent of j)
    root: Tensor  # n root marginals
    logZ: Tensor  # scalar log partition function (shift undone)


def _check_nodes(U: Tensor, d: int, op: str) -> None:
    if U.ndim != 2 or U.shape[1] != d:
        raise ShapeError(f"{op}: node matrix shape {U.shape} does not match parameter dim {d}")


def pair_scores(U: Tensor, params: InductionParams) -> Tensor:
    """``s[i, j] = tanh(W_p u_i)^T W_b tanh(W_c u_j)``; the diagonal is zeroed."""
    _check_nodes(U, params.W_p.shape[1], "pair_scores")
    parent = tanh(matmul(U, transpose(params.W_p)))
    child = tanh(matmul(U, transpose(params.W_c)))
    s = matmul(matmul(parent, params.W_b), transpose(child))
    n = U.shape[0]
    return mul(s, Tensor(1.0 - np.eye(n)))


def root_scores(U: Tensor, params: InductionParams) -> Tensor:
    """``s_root[i] = W_r u_i`` as a length-n vector."""
    _check_nodes(U, params.W_r.shape[1], "root_scores")
    return reshape(matmul(U, transpose(params.W_r)), (U.shape[0],))


def score_shift(s: Tensor, s_root: Tensor) -> np.ndarray:
    """Per-column shift ``c[j] = max(max_{i != j} s[i, j], s_root[j])``; constant, not differentiated.

    Every arborescence takes exactly one incoming edge per node, so scaling
    column j of the weights by ``exp(-c[j])`` scales all trees alike and
    leaves the marginals unchanged.  Each column then keeps a weight of 1,
    which stops a node's incoming weights from underflowing together.
    """
    n = s.shape[0]
    off = np.where(np.eye(n, dtype=bool), -np.inf, s.data)
    return np.maximum(off.max(axis=0), s_root.data)


def edge_weights(s: Tensor, shift: float | np.ndarray = 0.0) -> Tensor:
    """``P[i, j] = exp(s[i, j] - shift[j])`` off the diagonal, 0 on it (scalar shifts broadcast)."""
    n = s.shape[0]
    if s.shape != (n, n):
        raise ShapeError(f"edge_weights: expected square scores, got {s.shape}")
    return mul(exp(s - shift), Tensor(1.0 - np.eye(n)))


def root_weights(s_root: Tensor, shift: float | np.ndarray = 0.0) -> Tensor:
    return exp(s_root - shift)


def laplacian(P: Tensor, r: Tensor) -> tuple[Tensor, Tensor]:
    """Laplacian ``L`` and its root variant ``L_hat`` (first row = root weights ``r``)."""
    n = P.shape[0]
    L = diag(sum_(P, axis=0)) - P
    keep = np.ones((n, 1))
    keep[0] = 0.0
    first = np.zeros((n, 1))
    first[0] = 1.0
    L_hat = mul(L, Tensor(keep)) + mul(Tensor(first), reshape(r, (1, n)))
    return L, L_hat


def marginals_from_weights(P: Tensor, r: Tensor, shift: float | np.ndarray = 0.0) -> StructureMarginals:
    """Edge/root marginals and log-partition from non-negative weights.

    ``A[i, j] = (1 - [j = 0]) P[i, j] Linv[j, j] - (1 - [i = 0]) P[i, j] Linv[j, i]``
    and ``root[j] = r[j] Linv[j, 0]`` with ``Linv`` the inverse of ``L_hat``.
    One retry with a ``1e-10`` diagonal jitter precedes SingularStructure.
    ``shift`` (scalar or per column) is added back to ``logZ``.
    """
    n = P.shape[0]
    _, L_hat = laplacian(P, r)
    try:
        Linv, logdet, _ = inv_and_logdet(L_hat)
    except SingularMatrix:
        try:
            Linv, logdet, _ = inv_and_logdet(L_hat + Tensor(JITTER * np.eye(n)))
        except SingularMatrix as exc:
            raise SingularStructure(f"root-augmented Laplacian is singular: {exc}") from None
    not_first_col = np.ones((1, n))
    not_first_col[0, 0] = 0.0
    not_first_row = np.ones((n, 1))
    not_first_row[0, 0] = 0.0
    term1 = mul(P, mul(reshape(diagonal(Linv), (1, n)), Tensor(not_first_col)))
    term2 = mul(P, mul(transpose(Linv), Tensor(not_first_row)))
    A = term1 - term2
    root = mul(r, reshape(Linv[:, 0], (n,)))
    return StructureMarginals(A, root, logdet + float(np.broadcast_to(shift, (n,)).sum()))


def marginals(s: Tensor, s_root: Tensor) -> StructureMarginals:
    """Structure marginals straight from pair and root scores (overflow-safe)."""
    c = score_shift(s, s_root)
    return marginals_from_weights(edge_weights(s, c), root_weights(s_root, c), c)


def induce(U: Tensor, params: InductionParams) -> StructureMarginals:
    return marginals(pair_scores(U, params), root_scores(U, params))


@functools.lru_cache(maxsize=None)
def arborescences(n: int) -> np.ndarray:
    """Every rooted spanning arborescence of the complete digraph on n nodes.

    Row ``t`` gives each node's parent, with ``n`` standing for the root
    marker.  Candidates are all parent assignments; a row is kept when it has
    exactly one root and every node reaches it by following parents.
    """
    if not 1 <= n <= BRUTE_FORCE_MAX_N:
        raise ValueError(f"arborescences: n={n} outside [1, {BRUTE_FORCE_MAX_N}]")
    choices = [[p for p in range(n + 1) if p != j] for j in range(n)]
    kept = []
    total = n ** n
    chunk = 1 << 20
    radix = np.array([n ** (n - 1 - j) for j in range(n)], dtype=np.int64)
    table = np.array(choices, dtype=np.int8)
    for lo in range(0, total, chunk):
        code = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        digits = (code[:, None] // radix) % n
        par = table[np.arange(n), digits]
        par = par[(par == n).sum(axis=1) == 1]
        ext = np.concatenate([par, np.full((len(par), 1), n, dtype=np.int8)], axis=1)
        walk = ext.copy()
        for _ in range(n):
            walk = np.take_along_axis(ext, walk.astype(np.int64), axis=1)
        kept.append(par[(walk[:, :n] == n).all(axis=1)])
    return np.concatenate(kept).astype(np.int64)


def brute_force_marginals(P, r) -> StructureMarginals:
    """Marginals by explicit summation over every rooted spanning arborescence (n <= 8).

    Tree weight is ``r[root] * prod P[parent, child]``; ``logZ`` is the log
    of the summed weights.
    """
    P = np.asarray(P.data if isinstance(P, Tensor) else P, dtype=np.float64)
    r = np.asarray(r.data if isinstance(r, Tensor) else r, dtype=np.float64)
    n = len(r)
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute_force_marginals: n={n} exceeds {BRUTE_FORCE_MAX_N}")
    trees = arborescences(n)
    weights_ext = np.vstack([P, r[None, :]])  # row n holds root weights
    w = np.prod(weights_ext[trees, np.arange(n)], axis=1)
    Z = w.sum()
    ext = np.zeros((n + 1, n))
    for j in range(n):
        np.add.at(ext[:, j], trees[:, j], w)
    return StructureMarginals(Tensor(ext[:n] / Z), Tensor(ext[n] / Z), Tensor(np.log(Z)))
