from __future__ import annotations

import numpy as np

from .params import ParamStore


class RMSProp:
    """Momentum RMSProp, with an Adam variant behind ``mode="adam"``.

    rmsprop:  s <- decay*s + (1-decay)*g^2
              m <- momentum*m + lr*g / sqrt(s + eps)
              theta <- theta - m
    adam:     m <- momentum*m + (1-momentum)*g,  s as above,
              theta <- theta - lr * m_hat / (sqrt(s_hat) + eps)

    Always descends; callers who ascend pass the negated objective.
    """

    def __init__(self, store: ParamStore, lr=2e-4, momentum=0.5, decay=0.99, eps=1e-8, mode="rmsprop"):
        if not (0 <= momentum < 1 and 0 <= decay < 1):
            raise ValueError("momentum and decay must lie in [0, 1)")
        if mode not in ("rmsprop", "adam"):
            raise ValueError(f"unknown optimizer mode {mode!r}")
        self.store = store
        self.lr, self.momentum, self.decay, self.eps, self.mode = lr, momentum, decay, eps, mode
        self.t = 0
        self.sq = {k: np.zeros_like(store[k]) for k in store.trainable_names()}
        self.mom = {k: np.zeros_like(store[k]) for k in store.trainable_names()}

    def step(self) -> None:
        self.t += 1
        for k in self.store.trainable_names():
            if k not in self.sq:
                raise KeyError(f"optimizer has no buffer for {k!r}")
            g = self.store.grads[k]
            s, m = self.sq[k], self.mom[k]
            s *= self.decay
            s += (1 - self.decay) * g * g
            if self.mode == "rmsprop":
                m *= self.momentum
                m += self.lr * g / np.sqrt(s + self.eps)
                self.store.params[k] -= m
            else:
                m *= self.momentum
                m += (1 - self.momentum) * g
                m_hat = m / (1 - self.momentum ** self.t)
                s_hat = s / (1 - self.decay ** self.t)
                self.store.params[k] -= self.lr * m_hat / (np.sqrt(s_hat) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {f"sq/{k}": v for k, v in self.sq.items()}
        out.update({f"mom/{k}": v for k, v in self.mom.items()})
        out["t"] = np.array([self.t], dtype=np.int64)
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, v in state.items():
            if k == "t":
                self.t = int(v[0])
                continue
            kind, name = k.split("/", 1)
            buf = self.sq if kind == "sq" else self.mom
            if name not in buf:
                raise KeyError(f"optimizer state for unknown parameter {name!r}")
            buf[name][...] = v

