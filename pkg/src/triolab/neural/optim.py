"""Bias-corrected adaptive-moment optimizer and global gradient-norm clipping."""

from __future__ import annotations

import numpy as np

from .autodiff import NonFiniteLossError
from .layers import ParamStore


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most max_norm.

    Returns the applied scale.  The scale is shaded by 1e-6 so the clipped norm
    stays below the bound even after float32 rounding of the products.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    norm = np.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return 1.0
    scale = max_norm / norm * (1.0 - 1e-6)
    for g in grads.values():
        g *= g.dtype.type(scale)
    return float(scale)


class Adam:
    """Standard adaptive-moment estimation over a ParamStore, updating in place."""

    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteLossError(f"non-finite gradient for {name!r}")
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, tensor in self.store.items():
            g = grads[name]
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            tensor.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            if not np.all(np.isfinite(tensor.data)):
                raise NonFiniteLossError(f"non-finite parameter after update: {name!r}")
