"""Adam with coupled L2 weight decay, and the exponential learning-rate schedule."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 1e-4
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(state, params):
    """Apply one Adam update in place to every parameter holding a gradient.

    ``weight_decay * value`` is added to each gradient before the moment
    updates (classic L2 regularisation, not decoupled decay). The whole step is
    refused if any gradient is non-finite.
    """
    params = [p for p in params if p.trainable]
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {p.name!r}; step aborted")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1 - b1**t
    corr2 = 1 - b2**t
    for p in params:
        key = id(p)
        g = np.zeros_like(p.data) if p.grad is None else p.grad
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m = state.first_moment.get(key)
        v = state.second_moment.get(key)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.first_moment[key] = m
        state.second_moment[key] = v
        update = state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
        p.data = (p.data - update).astype(p.data.dtype, copy=False)
    return state


def lr_schedule(epoch, total_epochs, lr_start=1e-4, lr_end=1e-5):
    """Geometric decay from ``lr_start`` at epoch 0 to ``lr_end`` at the last epoch."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if total_epochs == 1:
        return lr_start
    frac = epoch / (total_epochs - 1)
    return float(lr_start * (lr_end / lr_start) ** frac)
