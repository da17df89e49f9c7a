"""Experiment configuration: training hyperparameters plus the three architectures.

The on-disk form is YAML with one section per dataclass::

    training: {alpha: 0.85, epochs: 3, ...}
    generator: {base_width: 16}
    discriminator: {base_width: 16}
    steganalyser: {widths: [8, 16, 32, 64], hidden: 128}
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import UsageError
from .networks import DiscriminatorSpec, GeneratorSpec, SteganalyserSpec

LOSS_MODES = ("log-gan", "wgan-critic")


@dataclass
class TrainingConfig:
    alpha: float = 0.85
    gamma_g: float = 2e-4
    gamma_d: float = 2e-4
    gamma_s: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.99
    optimizer: str = "rmsprop"
    batch_size: int = 64
    g_steps: int = 2
    d_steps: int = 1
    s_steps: int = 1
    loss_mode: str = "log-gan"
    g_loss: str = "saturating"
    clip_c: float = 0.01
    payload: float = 0.4
    key_policy: str = "per-image"
    master_seed: int = 0
    epochs: int = 1
    dtype: str = "float32"
    prob_eps: float = 1e-7

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"alpha must lie in [0, 1], got {self.alpha}")
        # zero rates are allowed so an update can be made a no-op in tests
        if min(self.gamma_g, self.gamma_d, self.gamma_s) < 0:
            raise UsageError("learning rates must be non-negative")
        if min(self.g_steps, self.d_steps, self.s_steps, self.batch_size, self.epochs) < 1:
            raise UsageError("step counts, batch size and epochs must be >= 1")
        if self.loss_mode not in LOSS_MODES:
            raise UsageError(f"loss_mode must be one of {LOSS_MODES}")
        if self.g_loss not in ("saturating", "non-saturating"):
            raise UsageError("g_loss must be 'saturating' or 'non-saturating'")
        if self.optimizer not in ("rmsprop", "adam"):
            raise UsageError("optimizer must be 'rmsprop' or 'adam'")
        if not 0 < self.payload <= 1:
            raise UsageError("payload must lie in (0, 1]")
        if self.clip_c <= 0:
            raise UsageError("clip_c must be positive")
        if self.dtype not in ("float32", "float64"):
            raise UsageError("dtype must be float32 or float64")


@dataclass
class ExperimentConfig:
    training: TrainingConfig = field(default_factory=TrainingConfig)
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    discriminator: DiscriminatorSpec = field(default_factory=DiscriminatorSpec)
    steganalyser: SteganalyserSpec = field(default_factory=SteganalyserSpec)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExperimentConfig":
        d = d or {}
        parts = {}
        for f in fields(cls):
            section = d.get(f.name) or {}
            if not isinstance(section, dict):
                raise UsageError(f"config section {f.name!r} must be a mapping")
            klass = f.default_factory().__class__
            known = {g.name for g in fields(klass)}
            unknown = set(section) - known
            if unknown:
                raise UsageError(f"unknown keys in [{f.name}]: {sorted(unknown)}")
            try:
                parts[f.name] = klass(**section)
            except TypeError as exc:
                raise UsageError(str(exc)) from exc
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise UsageError(f"unknown config sections: {sorted(extra)}")
        return cls(**parts)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(yaml.safe_load(fh))
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise UsageError(f"malformed config {path}: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


def desk_config(**training) -> ExperimentConfig:
    """Narrow networks sized for single-core CPU runs."""
    return ExperimentConfig(
        training=TrainingConfig(**training),
        generator=GeneratorSpec(base_width=16),
        discriminator=DiscriminatorSpec(base_width=16),
        steganalyser=SteganalyserSpec(widths=[8, 16, 32, 64], hidden=128),
    )
