"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import NumericError
from .layers import LeakyReLU


def kink_signature(seq) -> Callable[[], bytes]:
    """Fingerprint of which side of zero every leaky-ReLU input fell on in the last forward."""
    relus = [layer for layer in seq.layers if isinstance(layer, LeakyReLU)]

    def signature():
        return b"".join(np.packbits(layer.cache[0] > 0).tobytes() for layer in relus)
    return signature


def grad_check_errors(loss_fn: Callable[[bool], float], arrays: Mapping[str, np.ndarray],
                      grads: Mapping[str, np.ndarray], eps: float = 1e-5, n_coords: int = 200,
                      seed: int = 0, floor: float = 1e-6, fingerprint: Callable[[], bytes] | None = None,
                      skipped: dict | None = None) -> dict[str, float]:
    """Per-array maximum relative error between analytic and numeric gradients.

    ``loss_fn(True)`` must return the scalar loss and leave d(loss)/d(array)
    in ``grads[name]`` for every checked array; ``loss_fn(False)`` only
    evaluates.  Arrays are perturbed in place and restored.  Up to
    ``n_coords`` coordinates per array are sampled (all of them when the
    array is smaller).  Relative error is |a - n| / max(|a|, |n|, floor).

    Central differences are meaningless across a kink of a piecewise-linear
    activation.  When ``fingerprint`` is given it is called after every
    evaluation; coordinates whose +/-eps evaluations change it are not
    scored, and their count per array is stored in ``skipped``.
    """
    base = loss_fn(True)
    ref = fingerprint() if fingerprint else None
    if not np.isfinite(base):
        raise NumericError(f"non-finite loss {base} in gradient check")
    analytic = {k: np.array(grads[k], dtype=np.float64) for k in arrays}
    rng = np.random.default_rng(seed)
    errors = {}
    for name, arr in arrays.items():
        if not arr.flags.c_contiguous:
            raise ValueError(f"{name}: array must be contiguous so perturbations reach the model")
        flat = arr.reshape(-1)
        idx = np.arange(flat.size) if flat.size <= n_coords else rng.choice(flat.size, n_coords, replace=False)
        worst = 0.0
        n_skip = 0
        for i in idx:
            old = flat[i]
            flat[i] = old + eps
            fp = loss_fn(False)
            crossed = fingerprint is not None and fingerprint() != ref
            flat[i] = old - eps
            fm = loss_fn(False)
            crossed = crossed or (fingerprint is not None and fingerprint() != ref)
            flat[i] = old
            if crossed:
                n_skip += 1
                continue
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
            num = (fp - fm) / (2 * eps)
            ana = analytic[name].reshape(-1)[i]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), floor))
        errors[name] = worst
        if skipped is not None:
            skipped[name] = n_skip
    return errors


def grad_check(loss_fn, arrays, grads, eps=1e-5, n_coords=200, seed=0, floor=1e-6, fingerprint=None) -> float:
    errs = grad_check_errors(loss_fn, arrays, grads, eps, n_coords, seed, floor, fingerprint)
    return max(errs.values()) if errs else 0.0
