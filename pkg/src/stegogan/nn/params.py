from __future__ import annotations

import hashlib

import numpy as np


class ParamStore:
    """Named parameters, their gradient accumulators and non-trainable buffers.

    Frozen parameters (``trainable=False``) take part in the forward pass but
    never receive gradient and are skipped by optimizers and clipping.
    Buffers hold running statistics.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.trainable: dict[str, bool] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> np.ndarray:
        if name in self.params or name in self.buffers:
            raise KeyError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=self.dtype)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.trainable[name] = trainable
        return arr

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params or name in self.buffers:
            raise KeyError(f"duplicate buffer name {name!r}")
        arr = np.array(value, dtype=self.dtype)
        self.buffers[name] = arr
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def trainable_names(self) -> list[str]:
        return [k for k, t in self.trainable.items() if t]

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if self.trainable[name]:
            self.grads[name] += grad

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0)

    def scale_grads(self, factor: float) -> None:
        for g in self.grads.values():
            g *= factor

    def n_params(self, trainable_only: bool = True) -> int:
        return sum(p.size for k, p in self.params.items() if self.trainable[k] or not trainable_only)

    def state(self) -> dict[str, np.ndarray]:
        """Flat name -> array map of parameters and buffers (for checkpoints)."""
        out = {f"param/{k}": v for k, v in self.params.items()}
        out.update({f"buffer/{k}": v for k, v in self.buffers.items()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, v in state.items():
            kind, name = k.split("/", 1)
            target = self.params if kind == "param" else self.buffers
            if name not in target:
                raise KeyError(f"unexpected tensor {k!r}")
            if target[name].shape != v.shape:
                raise ValueError(f"shape mismatch for {k!r}: {target[name].shape} vs {v.shape}")
            target[name][...] = v
        missing = set(self.state()) - set(state)
        if missing:
            raise KeyError(f"missing tensors: {sorted(missing)}")

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def digest(self, name: str | None = None) -> str:
        h = hashlib.sha256()
        names = [name] if name else sorted(self.params)
        for k in names:
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.params[k]).tobytes())
        return h.hexdigest()
