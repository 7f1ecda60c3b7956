from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NumericError, Tensor


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr: float, **kw) -> "AdamState":
        st = cls(lr=lr, **kw)
        st.m = [np.zeros_like(p.data) for p in params]
        st.v = [np.zeros_like(p.data) for p in params]
        return st


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              names: list[str] | None = None) -> None:
    """In-place bias-corrected Adam update of ``params``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(
            f"adam_step got {len(params)} params, {len(grads)} grads, {len(state.m)} moment slots"
        )
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape or state.m[i].shape != p.data.shape:
            raise ValueError(f"shape mismatch for parameter {i}: {p.data.shape} vs grad {g.shape}")
        if not np.all(np.isfinite(g)):
            label = names[i] if names else (p.name or f"#{i}")
            raise NumericError(f"non-finite gradient for parameter {label}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.m[i]
        v = state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
