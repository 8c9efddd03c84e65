from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


@dataclass
class GradCheckResult:
    max_rel_err: float
    param_index: int
    coord: tuple[int, ...]
    analytic: float
    numeric: float


def rel_err(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-6,
               floor: float = 1e-8, max_coords: int | None = None,
               rng: np.random.Generator | None = None) -> GradCheckResult:
    """Compare tape gradients with central differences, coordinate by coordinate.

    ``f`` is re-evaluated with each parameter perturbed in place, so it must
    read the parameters' current ``data`` on every call.  ``max_coords`` caps
    the coordinates probed per parameter (sampled with ``rng``).
    """
    if not 1e-8 <= eps <= 1e-4:
        raise ValueError(f"grad_check: eps {eps} outside [1e-8, 1e-4]")
    with Tape() as tape:
        loss = f()
    grads = tape.backward(loss)
    worst = GradCheckResult(0.0, -1, (), 0.0, 0.0)
    for pi, p in enumerate(params):
        g = grads.get(p, np.zeros_like(p.data))
        coords = list(np.ndindex(*p.shape))
        if max_coords is not None and len(coords) > max_coords:
            rng = rng or np.random.default_rng(0)
            pick = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(pick)]
        for c in coords:
            orig = p.data[c]
            p.data[c] = orig + eps
            up = f().item()
            p.data[c] = orig - eps
            down = f().item()
            p.data[c] = orig
            num = (up - down) / (2 * eps)
            err = rel_err(float(g[c]), num, floor)
            if err > worst.max_rel_err or worst.param_index < 0:
                worst = GradCheckResult(err, pi, c, float(g[c]), num)
    return worst
