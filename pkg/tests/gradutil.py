"""Finite-difference helpers shared by the layer and network tests."""
import numpy as np

from stegogan.nn import grad_check_errors, kink_signature


def check_module(module, store, x, seed=0, n_coords=200, train=True, seq=None, skipped=None):
    """Max relative error of d(sum(out * R))/d(input, params) for a forward/backward module.

    With ``seq`` (the module's Sequential) coordinates whose perturbation
    flips a leaky-ReLU input across zero are left out.
    """
    rng = np.random.default_rng(seed)
    out = module.forward(x, train=train, update_stats=False)
    r = rng.normal(size=out.shape)
    gx = np.zeros_like(x)

    def loss(compute_grad):
        y = module.forward(x, train=train, update_stats=False)
        if compute_grad:
            store.zero_grad()
            gx[...] = module.backward(r)
        return float(np.sum(y * r))

    arrays = {"input": x}
    grads = {"input": gx}
    for k in store.trainable_names():
        arrays[k] = store[k]
        grads[k] = store.grads[k]
    fingerprint = kink_signature(seq) if seq is not None else None
    return grad_check_errors(loss, arrays, grads, n_coords=n_coords, seed=seed, fingerprint=fingerprint,
                             skipped=skipped)
