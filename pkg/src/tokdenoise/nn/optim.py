"""Adam with bias correction plus the warmup / inverse-sqrt learning rate."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NumericError
from .tensor import Tensor


class Adam:
    """Standard Adam. The learning rate is passed per step (schedules live
    outside the optimizer)."""

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params: list[Tensor] = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise DimensionError(f"gradient shape {g.shape} vs parameter {p.data.shape}")
            if not np.isfinite(g).all():
                raise NumericError(f"non-finite gradient at optimizer step {t}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def warmup_lr(step: int, peak_lr: float, warmup_steps: int) -> float:
    """Linear ramp to peak_lr over warmup_steps, then inverse-sqrt decay."""
    if step < 1 or warmup_steps < 1:
        raise DimensionError("warmup_lr: step and warmup_steps must be >= 1")
    if step <= warmup_steps:
        return peak_lr * step / warmup_steps
    return peak_lr * np.sqrt(warmup_steps / step)
