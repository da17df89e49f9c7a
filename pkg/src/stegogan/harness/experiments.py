"""Detector experiments on real versus generated covers, and the S1-S3 seed conditions.

S1  covers generated with the seed the detector was trained on (fresh messages)
S2  covers generated with a different, randomly drawn seed
S3  the S2 seed after further generator training on real data
"""
from __future__ import annotations

import copy
from dataclasses import asdict

import numpy as np

from .. import keystream
from ..image_core import to_tensor
from ..stego_codec import stego_pixels
from ..trainer import SSGAN
from .detector import EvalReport, append_result, evaluate_detector, train_detector


def pair_arrays(covers, payload: float, key_policy: str, seed: int, dtype=np.float32):
    """Interleaved (cover, stego) tensor with labels 0, 1, 0, 1, ..."""
    stegos = stego_pixels(covers, payload, key_policy, seed)
    imgs = [im for pair in zip(covers, stegos) for im in pair]
    return to_tensor(imgs, dtype=dtype), np.tile([0, 1], len(covers))


def _load(model) -> SSGAN:
    return model if isinstance(model, SSGAN) else SSGAN.load(model)


def real_vs_generated(model, train_covers, test_covers, n_generated: int = 500, gen_seed: int = 1,
                      payload: float = 0.4, key_policy: str = "per-image", arch: str = "S", lr=None,
                      epochs: int = 5, seed: int = 0, spec=None, results_csv=None, run_id: str = ""
                      ) -> dict[str, EvalReport]:
    """Train a detector on real cover/stego pairs; score held-out real pairs and generated pairs."""
    model = _load(model)
    x_train, y_train = pair_arrays(train_covers, payload, key_policy, keystream.derive_seed(seed, 1))
    det, _ = train_detector(arch, (x_train, y_train), lr=lr, epochs=epochs, seed=seed, spec=spec)
    generated = model.generate(n_generated, gen_seed)
    corpora = {
        "real": pair_arrays(test_covers, payload, key_policy, keystream.derive_seed(seed, 2)),
        "generated": pair_arrays(generated, payload, key_policy, keystream.derive_seed(seed, 3)),
    }
    reports = {}
    for name, arrays in corpora.items():
        reports[name] = evaluate_detector(det, arrays, results_csv, run_id, corpus_id=f"{name}-pairs")
    return reports


def run_seed_experiments(model, real_data, n_images: int = 500, train_seed: int = 7, fresh_seed: int | None = None,
                         fine_tune_epochs: int = 2, payload: float = 0.4, key_policy: str = "per-image",
                         arch: str = "S_star", lr=None, epochs: int = 5, seed: int = 0, spec=None,
                         results_csv=None, run_id: str = "") -> dict[str, EvalReport]:
    """Train a detector on pairs generated from ``train_seed`` and evaluate under S1, S2 and S3.

    ``real_data`` is the (N, 3, 64, 64) tensor the generator keeps training on for S3.
    The fine-tuning runs on a copy; the given model is not modified.
    """
    model = _load(model)
    if fresh_seed is None:
        fresh_seed = int(np.random.default_rng([seed, train_seed]).integers(2**31))
    if fresh_seed == train_seed:
        raise ValueError("the fresh seed must differ from the training seed")
    msg = lambda label: keystream.derive_seed(seed, 0x5331, label)  # noqa: E731
    train_covers = model.generate(n_images, train_seed)
    det, _ = train_detector(arch, pair_arrays(train_covers, payload, key_policy, msg(0)), lr=lr, epochs=epochs,
                            seed=seed, spec=spec)
    tuned = copy.deepcopy(model)
    tuned.train(real_data, epochs=fine_tune_epochs)
    conditions = {
        "S1": pair_arrays(train_covers, payload, key_policy, msg(1)),
        "S2": pair_arrays(model.generate(n_images, fresh_seed), payload, key_policy, msg(2)),
        "S3": pair_arrays(tuned.generate(n_images, fresh_seed), payload, key_policy, msg(2)),
    }
    reports = {name: evaluate_detector(det, arrays, None, run_id, corpus_id=name) for name, arrays in conditions.items()}
    if results_csv:
        for name, rep in reports.items():
            rep.corpus = f"{name}(train_seed={train_seed},fresh_seed={fresh_seed},fine_tune_epochs={fine_tune_epochs})"
            append_result(results_csv, rep, run_id)
    return reports


def reports_table(reports: dict[str, EvalReport]) -> list[dict]:
    return [{"condition": k, **asdict(v)} for k, v in reports.items()]
