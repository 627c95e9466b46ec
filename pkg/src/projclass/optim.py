"""Plain SGD with classical momentum."""

from __future__ import annotations

import numpy as np

from .weights import StageWeights


class SgdMomentum:
    """v <- momentum*v - lr*g; w <- w + v. Velocity persists across steps."""

    def __init__(self, lr: float, momentum: float = 0.0):
        if lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.lr = lr
        self.momentum = momentum
        self._velocity: dict[str, np.ndarray] = {}

    def step(self, weights: StageWeights) -> StageWeights:
        """Apply one update in place using each tensor's accumulated grad."""
        for name, tensor, _role in weights.items():
            if tensor.grad is None:
                continue
            v = self._velocity.get(name)
            if v is None:
                v = np.zeros_like(tensor.data)
            v = self.momentum * v - self.lr * tensor.grad
            self._velocity[name] = v
            tensor.data += v
        return weights
