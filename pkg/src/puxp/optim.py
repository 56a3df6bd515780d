"""Adam with bias correction over a ParameterStore."""

from __future__ import annotations

import numpy as np

from .errors import GradientError, ShapeError


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, store):
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in store}
        self.v = {p.name: np.zeros_like(p.data) for p in store}


def adam_step(store, state, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one Adam update in place; missing gradients count as zero.

    The step aborts (no parameter touched) if any gradient is non-finite,
    naming the offending parameter.
    """
    grads = {}
    for p in store:
        g = p.tensor.grad
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter {p.name} shape {p.data.shape}")
        if p.name not in state.m or state.m[p.name].shape != p.data.shape:
            raise ShapeError(f"optimizer state does not match parameter {p.name!r}")
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter {p.name!r}")
        grads[p.name] = g

    state.t += 1
    t = state.t
    for p in store:
        g = grads[p.name]
        m = state.m[p.name]
        v = state.v[p.name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state
