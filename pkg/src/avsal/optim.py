"""Adam optimizer with bias-corrected first/second moments."""

from __future__ import annotations

import numpy as np


class Adam:
    """Standard Adam update over an ordered list of tensors.

    step t:  m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g^2
             p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)

    Tensors with ``grad is None`` are skipped for that step (their
    moments do not advance).  A zero gradient leaves the parameter
    unchanged.
    """

    def __init__(self, tensors, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = list(tensors)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.tensors]
        self._v = [np.zeros_like(p.data) for p in self.tensors]

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.tensors):
            if p.grad is None:
                continue
            g = p.grad
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self._m[i] / c1
            v_hat = self._v[i] / c2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.tensors:
            p.grad = None
