"""Parameter storage and the layer types used by the policy and inference nets."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, matmul, sigmoid, softplus, tanh

# strict positivity floor for std heads; sits slightly above 1e-4 so the
# bound still holds after float32 rounding
STD_FLOOR = 1.02e-4


class ParamStore:
    """Named parameter tensors with a stable iteration order.

    Shapes are fixed at registration; values are updated in place by the
    optimizer.  float32 by default, float64 for numerical tests.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = dtype
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=self.dtype).copy(), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Accumulated gradients; parameters the loss never touched get zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._params.items()
        }

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
        """Overwrite parameter values; every store entry must be present with its shape."""
        for name, t in self._params.items():
            key = prefix + name
            if key not in arrays:
                raise KeyError(f"checkpoint is missing tensor {key!r}")
            value = np.asarray(arrays[key], dtype=self.dtype)
            if value.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {key!r}: checkpoint {value.shape}, model {t.data.shape}"
                )
            t.data[...] = value


def glorot_uniform(rng: np.random.Generator, in_dim: int, out_dim: int, scale: float = 1.0) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(in_dim, out_dim)) * scale


class Dense:
    """Affine layer y = x @ w + b with an optional tanh."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator, activation: str | None = None, w_scale: float = 1.0):
        if activation not in (None, "tanh"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.activation = activation
        self.w = store.add(f"{name}.w", glorot_uniform(rng, in_dim, out_dim, w_scale))
        self.b = store.add(f"{name}.b", np.zeros(out_dim))

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.w) + self.b
        return tanh(y) if self.activation == "tanh" else y


class GruCell:
    """Gated recurrent cell: update gate z, reset gate r, tanh candidate."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, hidden_dim: int,
                 rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        self.dtype = store.dtype
        for gate in ("z", "r", "n"):
            setattr(self, f"w{gate}", store.add(f"{name}.w{gate}", glorot_uniform(rng, in_dim, hidden_dim)))
            setattr(self, f"u{gate}", store.add(f"{name}.u{gate}", glorot_uniform(rng, hidden_dim, hidden_dim)))
            setattr(self, f"b{gate}", store.add(f"{name}.b{gate}", np.zeros(hidden_dim)))

    def initial_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden_dim), dtype=self.dtype))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        z = sigmoid(matmul(x, self.wz) + matmul(h, self.uz) + self.bz)
        r = sigmoid(matmul(x, self.wr) + matmul(h, self.ur) + self.br)
        n = tanh(matmul(x, self.wn) + matmul(r * h, self.un) + self.bn)
        return (1.0 - z) * n + z * h


class GaussianHead:
    """Linear mean head plus a softplus std head with a strict positivity floor."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator):
        self.mean = Dense(store, f"{name}.mean", in_dim, out_dim, rng)
        self.std = Dense(store, f"{name}.std", in_dim, out_dim, rng)

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return self.mean(x), softplus(self.std(x)) + STD_FLOOR
