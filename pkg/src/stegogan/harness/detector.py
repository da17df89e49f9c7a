"""Standalone steganalysers (S and S*) trained with binary cross-entropy."""
from __future__ import annotations

import csv
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import CheckpointError, DataError, ShapeError
from ..networks import Steganalyser, SteganalyserSpec
from ..nn import RMSProp, load_checkpoint, save_checkpoint
from ..nn import functional as F

# optimiser settings per architecture: (learning rate, momentum, squared-gradient decay)
ARCH_DEFAULTS = {
    "S": (2e-4, 0.5, 0.99),
    "S_star": (5e-6, 0.9, 0.99),
}

RESULT_FIELDS = ("run_id", "detector", "corpus", "accuracy", "false_positive_rate", "false_negative_rate",
                 "n_samples", "wall_time")


@dataclass
class EvalReport:
    detector: str
    corpus: str
    accuracy: float
    false_positive_rate: float
    false_negative_rate: float
    n_samples: int
    wall_time: float = 0.0


class Detector:
    def __init__(self, arch: str = "S", spec: SteganalyserSpec | None = None, seed: int = 0, dtype=np.float32):
        if arch not in ARCH_DEFAULTS:
            raise DataError(f"unknown detector architecture {arch!r}; choose from {sorted(ARCH_DEFAULTS)}")
        self.arch, self.seed = arch, seed
        self.spec = spec or SteganalyserSpec()
        self.net = Steganalyser(self.spec, np.random.default_rng(seed), dtype)
        self.name = f"{arch}-seed{seed}"

    def predict_proba(self, x: np.ndarray, batch: int = 128) -> np.ndarray:
        if len(x) == 0:
            return np.zeros(0)
        return np.concatenate([self.net.prob(x[i:i + batch], train=False) for i in range(0, len(x), batch)])

    def save(self, path) -> None:
        tensors = {f"param/{k}": v for k, v in self.net.store.params.items()}
        meta = {"kind": "detector", "arch": self.arch, "seed": self.seed, "spec": asdict(self.spec),
                "name": self.name, "dtype": self.net.store.dtype.str}
        save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "Detector":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "detector":
            raise CheckpointError(f"{path}: not a detector checkpoint")
        det = cls(meta["arch"], SteganalyserSpec(**meta["spec"]), meta["seed"], np.dtype(meta["dtype"]))
        try:
            det.net.store.load_state(tensors)
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"{path}: incompatible detector ({exc})") from exc
        det.name = meta["name"]
        return det


def _as_arrays(corpus):
    """Accepts a CorpusManifest or an (x, y) pair."""
    if isinstance(corpus, tuple):
        x, y = corpus
        return np.asarray(x), np.asarray(y, dtype=np.int64), "arrays"
    return corpus.tensor(), np.asarray(corpus.labels, dtype=np.int64), corpus.name


def _pair_groups(y: np.ndarray) -> list[np.ndarray]:
    """Index groups kept together in a batch: (cover, stego) pairs when the corpus alternates."""
    if len(y) % 2 == 0 and np.all(y[0::2] == 0) and np.all(y[1::2] == 1):
        return [np.array([i, i + 1]) for i in range(0, len(y), 2)]
    return [np.array([i]) for i in range(len(y))]


def train_detector(arch: str, corpus, val_corpus=None, lr: float | None = None, epochs: int = 5, seed: int = 0,
                   batch_size: int = 32, spec: SteganalyserSpec | None = None, history_csv=None,
                   dtype=np.float32) -> tuple[Detector, list[dict]]:
    """Fit a detector with mean binary cross-entropy on P(stego).

    ``batch_size`` counts groups: cover/stego pairs stay in the same batch.
    Returns the detector and one history row per epoch.
    """
    x, y, name = _as_arrays(corpus)
    if len(np.unique(y)) < 2:
        raise DataError(f"corpus {name} must contain both covers and stegos")
    det = Detector(arch, spec, seed, dtype)
    base_lr, momentum, decay = ARCH_DEFAULTS[arch]
    opt = RMSProp(det.net.store, lr=base_lr if lr is None else lr, momentum=momentum, decay=decay)
    val = _as_arrays(val_corpus)[:2] if val_corpus is not None else None
    groups = _pair_groups(y)
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(groups))
        losses, correct = [], 0
        for start in range(0, len(order), batch_size):
            idx = np.concatenate([groups[g] for g in order[start:start + batch_size]])
            xb = np.asarray(x[idx], dtype=dtype)
            det.net.store.zero_grad()
            p = det.net.prob(xb)
            loss, grad = F.bce_loss(p, y[idx])
            det.net.prob_backward(grad)
            opt.step()
            losses.append(loss)
            correct += int(np.sum((p > 0.5) == (y[idx] == 1)))
        row = {"epoch": epoch, "train_loss": float(np.mean(losses)), "train_accuracy": correct / len(y)}
        if val is not None:
            row["val_accuracy"] = accuracy(det, *val)
        row["wall_time"] = time.perf_counter() - t0
        history.append(row)
    if history_csv:
        with open(history_csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(history[0]))
            w.writeheader()
            w.writerows(history)
    return det, history


def accuracy(det: Detector, x, y) -> float:
    pred = det.predict_proba(np.asarray(x)) > 0.5
    return float(np.mean(pred == (np.asarray(y) == 1)))


def evaluate_detector(det: Detector, corpus, results_csv=None, run_id: str = "", corpus_id: str | None = None
                      ) -> EvalReport:
    """Accuracy and error rates at threshold 0.5; optionally appends a row to ``results_csv``."""
    t0 = time.perf_counter()
    x, y, name = _as_arrays(corpus)
    if x.ndim != 4 or x.shape[1] != det.spec.in_channels:
        raise ShapeError(f"detector expects {det.spec.in_channels}-channel images, got {x.shape}")
    pred = det.predict_proba(x) > 0.5
    truth = y == 1
    n_cover, n_stego = int(np.sum(~truth)), int(np.sum(truth))
    report = EvalReport(
        detector=det.name,
        corpus=corpus_id or name,
        accuracy=float(np.mean(pred == truth)) if len(y) else 0.0,
        false_positive_rate=float(np.sum(pred & ~truth) / n_cover) if n_cover else 0.0,
        false_negative_rate=float(np.sum(~pred & truth) / n_stego) if n_stego else 0.0,
        n_samples=int(len(y)),
        wall_time=time.perf_counter() - t0,
    )
    if results_csv:
        append_result(results_csv, report, run_id)
    return report


def append_result(path, report: EvalReport, run_id: str) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        if new:
            w.writeheader()
        w.writerow({"run_id": run_id, **asdict(report)})
