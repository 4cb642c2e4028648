"""Adam optimizer and the linear warmup schedule."""

from __future__ import annotations

import numpy as np

from ucodec.kernels.tensor import Parameter


class Adam:
    """Adam with bias correction; moments live next to each parameter."""

    def __init__(self, params: list[Parameter], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.99, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            if p.grad is None:
                p.zero_grad()
            else:
                p.grad[...] = 0.0

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Moment buffers keyed by slot index, for checkpointing."""
        out: dict[str, np.ndarray] = {}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m.{i}"] = m
            out[f"v.{i}"] = v
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        for i in range(len(self.params)):
            self.m[i][...] = arrays[f"m.{i}"]
            self.v[i][...] = arrays[f"v.{i}"]


def warmup_lr(base_lr: float, step: int, warmup_steps: int) -> float:
    """Linear ramp to ``base_lr`` over ``warmup_steps``, constant after."""
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, step / warmup_steps)
