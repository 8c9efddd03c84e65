"""float64 tensors, reverse-mode tape, LU-based linear algebra and Adam."""

from .gradcheck import GradCheckResult, grad_check
from .linalg import (SingularMatrix, LUFactors, inv, inv_and_logdet, inverse_and_logdet,
                     logdet, lu_decompose, lu_solve)
from .optim import AdamState, adam_step
from .tensor import (NonFiniteError, ShapeError, Tape, Tensor, add, as_tensor, backward, clip,
                     concat, diag, diagonal, dropout, exp, getitem, log, matmul, mean, mean_rows,
                     mul, relu, reshape, scale, sigmoid, stack_rows, sub, sum_, take_rows, tanh,
                     transpose)
