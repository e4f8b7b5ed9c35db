"""Collapse many constraints into one: hard max or the log-sum-exp surrogate."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .core import ConvexFn, Vector


def _values(gs: Sequence[ConvexFn], values_fn, x: Vector) -> np.ndarray:
    if values_fn is not None:
        return np.asarray(values_fn(x), dtype=float)
    return np.array([g.eval(x) for g in gs], dtype=float)


def max_aggregate(
    gs: Sequence[ConvexFn],
    values_fn: Optional[Callable[[Vector], np.ndarray]] = None,
) -> ConvexFn:
    """g(x) = max_i g_i(x); the subgradient comes from the lowest-index argmax.

    ``values_fn`` may supply all constraint values in one vectorized call;
    it must match the per-function evaluators exactly.
    """
    if len(gs) == 0:
        raise ValueError("cannot aggregate an empty constraint list")
    hints = [g.lipschitz_hint for g in gs]
    hint = max(hints) if all(h is not None for h in hints) else None

    def ev(x):
        return float(np.max(_values(gs, values_fn, x)))

    def sg(x):
        vals = _values(gs, values_fn, x)
        # np.argmax already breaks ties toward the lowest index
        return gs[int(np.argmax(vals))].subgrad(x)

    return ConvexFn(ev, sg, lipschitz_hint=hint)


def logsumexp_aggregate(
    gs: Sequence[ConvexFn],
    values_fn: Optional[Callable[[Vector], np.ndarray]] = None,
) -> ConvexFn:
    """Smooth upper bound g(x) = log sum_i exp g_i(x).

    Evaluation shifts by the max before exponentiating so large constraint
    values on the ball boundary cannot overflow. The subgradient is the
    softmax-weighted combination of the member subgradients; its norm is
    bounded by sqrt(m) * max_i Lipschitz(g_i).
    """
    if len(gs) == 0:
        raise ValueError("cannot aggregate an empty constraint list")
    m = len(gs)
    hints = [g.lipschitz_hint for g in gs]
    hint = np.sqrt(m) * max(hints) if all(h is not None for h in hints) else None

    def ev(x):
        vals = _values(gs, values_fn, x)
        top = float(np.max(vals))
        return top + float(np.log(np.sum(np.exp(vals - top))))

    def sg(x):
        vals = _values(gs, values_fn, x)
        w = np.exp(vals - np.max(vals))
        w /= w.sum()
        out = np.zeros_like(np.asarray(x, dtype=float))
        for w_i, g in zip(w, gs):
            if w_i > 0.0:
                out += w_i * np.asarray(g.subgrad(x), dtype=float)
        return out

    return ConvexFn(ev, sg, lipschitz_hint=hint)
