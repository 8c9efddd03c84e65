"""LU factorisation with partial pivoting, and differentiable inverse/logdet."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .tensor import ShapeError, Tensor, _make, as_tensor

SINGULAR_RTOL = 1e-12


class SingularMatrix(np.linalg.LinAlgError):
    pass


class LUFactors(NamedTuple):
    lu: np.ndarray  # unit-lower L below the diagonal, U on and above
    perm: np.ndarray  # row i of P@A is row perm[i] of A
    parity: int

    @property
    def L(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(len(self.lu))

    @property
    def U(self) -> np.ndarray:
        return np.triu(self.lu)

    @property
    def P(self) -> np.ndarray:
        return np.eye(len(self.lu))[self.perm]


def _square(a: np.ndarray, op: str) -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"{op}: expected square matrix, got {a.shape}")
    return a


def lu_decompose(a) -> LUFactors:
    """Doolittle LU with partial pivoting: ``P @ A == L @ U``.

    Raises SingularMatrix when a pivot falls below ``1e-12 * max|A|``.
    """
    a = _square(np.array(a.data if isinstance(a, Tensor) else a, dtype=np.float64), "lu_decompose")
    n = a.shape[0]
    lu = a.copy()
    perm = np.arange(n)
    parity = 1
    scale = np.abs(a).max() if n else 0.0
    tol = SINGULAR_RTOL * scale
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= tol or scale == 0.0:
            raise SingularMatrix(f"lu_decompose: pivot {lu[p, k]:.3e} at column {k} below tolerance {tol:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            parity = -parity
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return LUFactors(lu, perm, parity)


def lu_solve(f: LUFactors, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for a vector or a matrix of right-hand sides."""
    lu = f.lu
    n = lu.shape[0]
    x = np.array(b, dtype=np.float64)[f.perm]
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def slogdet_lu(f: LUFactors) -> tuple[float, float]:
    d = np.diag(f.lu)
    sign = f.parity * float(np.prod(np.sign(d)))
    return sign, float(np.log(np.abs(d)).sum())


def inverse_and_logdet(a) -> tuple[np.ndarray, float, float]:
    """Plain-array ``(A^-1, log|det A|, sign det A)``."""
    f = lu_decompose(a)
    inv = lu_solve(f, np.eye(len(f.lu)))
    sign, logdet = slogdet_lu(f)
    return inv, logdet, sign


def inv(a: Tensor) -> Tensor:
    """Differentiable inverse; the backward rule is ``-A^-T G A^-T``."""
    a = as_tensor(a)
    _square(a.data, "inv")
    ainv, _, _ = inverse_and_logdet(a.data)

    def bw(g):
        return (-ainv.T @ g @ ainv.T,)

    return _make("inv", ainv, (a,), bw)


def logdet(a: Tensor) -> Tensor:
    """Differentiable ``log|det A|``; the gradient is ``A^-T``."""
    a = as_tensor(a)
    _square(a.data, "logdet")
    ainv, ld, _ = inverse_and_logdet(a.data)
    return _make("logdet", np.asarray(ld), (a,), lambda g: (g * ainv.T,))


def inv_and_logdet(a: Tensor) -> tuple[Tensor, Tensor, float]:
    """Both quantities from a single factorisation."""
    a = as_tensor(a)
    _square(a.data, "inv_and_logdet")
    ainv, ld, sign = inverse_and_logdet(a.data)
    inv_t = _make("inv", ainv, (a,), lambda g: (-ainv.T @ g @ ainv.T,))
    ld_t = _make("logdet", np.asarray(ld), (a,), lambda g: (g * ainv.T,))
    return inv_t, ld_t, sign
