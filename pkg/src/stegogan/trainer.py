"""The three-player game between generator G, realism discriminator D and steganalyser S.

Joint value (maximised by D and S, minimised by G)::

    J = alpha * (E log D(x) + E log(1 - D(G(z))))
        + (1 - alpha) * (E log S(Stego(G(z))) + E log(1 - S(G(z))))

Each player differentiates J with respect to its own weights only.  The
embedding Stego(.) quantizes to 8 bits and is not differentiable, so the
generator's S-gradient flows through log(1 - S(G(z))) alone.  In
``wgan-critic`` mode the D term becomes the critic estimate
E D(x) - E D(G(z)) with weight clipping; the S term keeps its log form.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from . import keystream
from .config import ExperimentConfig
from .errors import CheckpointError, NumericError, UsageError
from .image_core import PixelImage, from_tensor
from .networks import (Discriminator, DiscriminatorSpec, Generator, GeneratorSpec, NoiseSpec, Steganalyser,
                       SteganalyserSpec, clip_weights)
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.optim import RMSProp
from .stego_codec import stego_batch

PLAYERS = ("G", "D", "S")


@dataclass
class LossReport:
    epoch: int
    batch: int
    j_total: float
    j_adversarial: float
    j_stego: float
    d_accuracy: float
    s_accuracy: float
    wall_time: float = 0.0

    METRIC_FIELDS = ("epoch", "batch", "j_total", "j_adversarial", "j_stego", "d_accuracy", "s_accuracy")

    def metrics(self) -> dict:
        """Everything except wall time (which is never reproducible)."""
        d = asdict(self)
        d.pop("wall_time")
        return d


def _mean_log(p, eps):
    return float(np.mean(np.log(np.clip(p, eps, 1 - eps))))


def joint_loss(d_real, d_fake, s_stego, s_cover, alpha, eps=1e-7):
    """Returns (j_total, j_adversarial, j_stego)."""
    if not 0.0 <= alpha <= 1.0:
        raise UsageError(f"alpha must lie in [0, 1], got {alpha}")
    j_adv = _mean_log(d_real, eps) + _mean_log(1 - np.asarray(d_fake), eps)
    j_stego = _mean_log(s_stego, eps) + _mean_log(1 - np.asarray(s_cover), eps)
    return alpha * j_adv + (1 - alpha) * j_stego, j_adv, j_stego


def _dlog(p, eps, sign):
    """d/dp of mean(log p) (sign=+1) or mean(log(1-p)) (sign=-1); zero where clamped."""
    n = p.size
    clamped = (p < eps) | (p > 1 - eps)
    pc = np.clip(p, eps, 1 - eps)
    g = 1.0 / (n * pc) if sign > 0 else -1.0 / (n * (1 - pc))
    return np.where(clamped, 0.0, g).astype(p.dtype)


def _check_finite(name, *values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite values in {name}")


class SSGAN:
    def __init__(self, config: ExperimentConfig | None = None):
        self.config = config or ExperimentConfig()
        tc = self.config.training
        self.dtype = np.dtype(tc.dtype)
        init_ss, noise_ss, shuffle_ss = np.random.SeedSequence(tc.master_seed).spawn(3)
        init_rng = np.random.default_rng(init_ss)
        dspec = self.config.discriminator
        dspec.head = "critic" if tc.loss_mode == "wgan-critic" else "sigmoid"
        self.G = Generator(self.config.generator, init_rng, self.dtype)
        self.D = Discriminator(dspec, init_rng, self.dtype)
        self.S = Steganalyser(self.config.steganalyser, init_rng, self.dtype)
        self.noise = NoiseSpec(self.config.generator.z_dim)
        self.noise_rng = np.random.default_rng(noise_ss)
        self.shuffle_rng = np.random.default_rng(shuffle_ss)
        self.codec_counter = 0
        self.epoch = 0
        opt = dict(momentum=tc.beta1, decay=tc.beta2, mode=tc.optimizer)
        self.opt = {
            "G": RMSProp(self.G.store, lr=tc.gamma_g, **opt),
            "D": RMSProp(self.D.store, lr=tc.gamma_d, **opt),
            "S": RMSProp(self.S.store, lr=tc.gamma_s, **opt),
        }

    @property
    def tc(self):
        return self.config.training

    @property
    def critic(self) -> bool:
        return self.tc.loss_mode == "wgan-critic"

    def players(self):
        return {"G": self.G, "D": self.D, "S": self.S}

    def sample_noise(self, n: int) -> np.ndarray:
        return self.noise.sample(self.noise_rng, n, self.dtype)

    def _codec_seed(self) -> int:
        self.codec_counter += 1
        return keystream.derive_seed(self.tc.master_seed, 0x5354, self.codec_counter)

    # -- players' updates -------------------------------------------------

    def step_d(self, real: np.ndarray, z: np.ndarray) -> dict:
        """One ascent step for D on E log D(x) + E log(1 - D(G(z))) (or the critic gap)."""
        eps = self.tc.prob_eps
        fake = self.G.forward(z, train=True, update_stats=False)
        self.D.store.zero_grad()
        d_real = self.D.forward(real)
        if self.critic:
            self.D.backward(np.full_like(d_real, -1.0 / d_real.size))
        else:
            self.D.backward(-_dlog(d_real, eps, +1))
        d_fake = self.D.forward(fake)
        if self.critic:
            self.D.backward(np.full_like(d_fake, 1.0 / d_fake.size))
        else:
            self.D.backward(-_dlog(d_fake, eps, -1))
        _check_finite("discriminator step", d_real, d_fake, *self.D.store.grads.values())
        self.opt["D"].step()
        if self.critic:
            clip_weights(self.D.store, self.tc.clip_c)
            threshold = 0.0
            j_adv = float(np.mean(d_real) - np.mean(d_fake))
        else:
            threshold = 0.5
            j_adv = _mean_log(d_real, eps) + _mean_log(1 - d_fake, eps)
        acc = (np.sum(d_real > threshold) + np.sum(d_fake <= threshold)) / (d_real.size + d_fake.size)
        return {"d_real": d_real, "d_fake": d_fake, "j_adversarial": j_adv, "d_accuracy": float(acc)}

    def step_s(self, z: np.ndarray, payload: float | None = None) -> dict:
        """One ascent step for S on E log S(Stego(G(z))) + E log(1 - S(G(z)))."""
        eps = self.tc.prob_eps
        payload = self.tc.payload if payload is None else payload
        cover = self.G.forward(z, train=True, update_stats=False)
        stego = stego_batch(cover, payload, self.tc.key_policy, self._codec_seed())
        self.S.store.zero_grad()
        s_stego = self.S.prob(stego)
        self.S.prob_backward(-_dlog(s_stego, eps, +1))
        s_cover = self.S.prob(cover)
        self.S.prob_backward(-_dlog(s_cover, eps, -1))
        _check_finite("steganalyser step", s_stego, s_cover, *self.S.store.grads.values())
        self.opt["S"].step()
        acc = (np.sum(s_stego > 0.5) + np.sum(s_cover <= 0.5)) / (s_stego.size + s_cover.size)
        j_stego = _mean_log(s_stego, eps) + _mean_log(1 - s_cover, eps)
        return {"s_stego": s_stego, "s_cover": s_cover, "j_stego": j_stego, "s_accuracy": float(acc)}

    def generator_backward(self, z: np.ndarray, w_adv: float, w_stego: float, update_stats=True) -> np.ndarray:
        """Fill G's gradients for w_adv*L_adv + w_stego*E log(1 - S(G(z))) and return G(z).

        L_adv is E log(1 - D(G(z))) in log-gan mode and -E D(G(z)) in critic mode.
        With ``g_loss="non-saturating"`` the log terms log(1 - p) become -log p,
        which has the same fixed point but does not vanish when D or S is confident.
        D and S are evaluated in train mode without touching their running statistics.
        """
        eps = self.tc.prob_eps
        self.G.store.zero_grad()
        fake = self.G.forward(z, train=True, update_stats=update_stats)
        d_fake = self.D.forward(fake, train=True, update_stats=False)
        nonsat = self.tc.g_loss == "non-saturating"
        if self.critic:
            dd = np.full_like(d_fake, -w_adv / d_fake.size)
        elif nonsat:
            dd = -w_adv * _dlog(d_fake, eps, +1)
        else:
            dd = w_adv * _dlog(d_fake, eps, -1)
        grad = self.D.backward(dd)
        s_cover = self.S.prob(fake, train=True)
        ds = -w_stego * _dlog(s_cover, eps, +1) if nonsat else w_stego * _dlog(s_cover, eps, -1)
        grad = grad + self.S.prob_backward(ds)
        self.G.backward(grad)
        _check_finite("generator step", fake, *self.G.store.grads.values())
        return fake

    def step_g(self, z: np.ndarray, alpha: float | None = None) -> dict:
        """One descent step for G on the differentiable part of J."""
        alpha = self.tc.alpha if alpha is None else alpha
        if not 0.0 <= alpha <= 1.0:
            raise UsageError(f"alpha must lie in [0, 1], got {alpha}")
        fake = self.generator_backward(z, alpha, 1.0 - alpha)
        self.opt["G"].step()
        return {"fake": fake}

    def gan_generator_step(self, z: np.ndarray) -> None:
        """Plain two-player generator update (no steganalyser anywhere)."""
        eps = self.tc.prob_eps
        self.G.store.zero_grad()
        fake = self.G.forward(z, train=True, update_stats=True)
        d_fake = self.D.forward(fake, train=True, update_stats=False)
        if self.critic:
            dd = np.full_like(d_fake, -1.0 / d_fake.size)
        elif self.tc.g_loss == "non-saturating":
            dd = -_dlog(d_fake, eps, +1)
        else:
            dd = _dlog(d_fake, eps, -1)
        self.G.backward(self.D.backward(dd))
        self.opt["G"].step()

    # -- loops ------------------------------------------------------------

    def train_batch(self, real: np.ndarray, epoch: int, batch: int) -> LossReport:
        t0 = time.perf_counter()
        n = real.shape[0]
        d_out = s_out = None
        for _ in range(self.tc.d_steps):
            d_out = self.step_d(real, self.sample_noise(n))
        for _ in range(self.tc.s_steps):
            s_out = self.step_s(self.sample_noise(n))
        for _ in range(self.tc.g_steps):
            self.step_g(self.sample_noise(n))
        a = self.tc.alpha
        j_adv, j_stego = d_out["j_adversarial"], s_out["j_stego"]
        report = LossReport(epoch, batch, a * j_adv + (1 - a) * j_stego, j_adv, j_stego,
                            d_out["d_accuracy"], s_out["s_accuracy"], time.perf_counter() - t0)
        if not np.isfinite([report.j_total, report.j_adversarial, report.j_stego]).all():
            raise NumericError(f"non-finite loss at epoch {epoch} batch {batch}: {report}")
        return report

    def train_epoch(self, data: np.ndarray, callback=None) -> list[LossReport]:
        """One pass over ``data`` (an (N, 3, 64, 64) tensor) in shuffled mini-batches."""
        if len(data) == 0:
            raise UsageError("empty training set")
        order = self.shuffle_rng.permutation(len(data))
        bs = self.tc.batch_size
        reports = []
        for b, start in enumerate(range(0, len(data), bs)):
            real = np.asarray(data[order[start:start + bs]], dtype=self.dtype)
            rep = self.train_batch(real, self.epoch, b)
            reports.append(rep)
            if callback:
                callback(rep)
        self.epoch += 1
        return reports

    def train(self, data: np.ndarray, epochs: int | None = None, callback=None) -> list[LossReport]:
        reports = []
        for _ in range(self.tc.epochs if epochs is None else epochs):
            reports += self.train_epoch(data, callback)
        return reports

    # -- sampling ---------------------------------------------------------

    def generate_tensor(self, n: int, seed: int, batch: int = 64) -> np.ndarray:
        rng = np.random.default_rng(seed)
        z = self.noise.sample(rng, n, self.dtype)
        out = [self.G.forward(z[i:i + batch], train=False, update_stats=False) for i in range(0, n, batch)]
        if not out:
            return np.zeros((0, self.G.spec.out_channels, 64, 64), dtype=self.dtype)
        return np.concatenate(out)

    def generate(self, n: int, seed: int) -> list[PixelImage]:
        """Quantized samples from seeded noise; G runs with its running statistics."""
        if n == 0:
            return []
        return from_tensor(self.generate_tensor(n, seed))

    # -- persistence ------------------------------------------------------

    def state(self) -> tuple[dict, dict]:
        tensors = {}
        for name, net in self.players().items():
            tensors.update({f"{name}/{k}": v for k, v in net.store.state().items()})
            tensors.update({f"opt_{name}/{k}": v for k, v in self.opt[name].state().items()})
        meta = {
            "kind": "ssgan",
            "config": self.config.to_dict(),
            "master_seed": self.tc.master_seed,
            "epoch": self.epoch,
            "codec_counter": self.codec_counter,
            "noise_rng": self.noise_rng.bit_generator.state,
            "shuffle_rng": self.shuffle_rng.bit_generator.state,
        }
        return tensors, meta

    def save(self, path) -> None:
        tensors, meta = self.state()
        save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "SSGAN":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "ssgan":
            raise CheckpointError(f"{path}: not an SSGAN checkpoint")
        try:
            model = cls(ExperimentConfig.from_dict(meta["config"]))
            for name, net in model.players().items():
                pre = f"{name}/"
                net.store.load_state({k[len(pre):]: v for k, v in tensors.items() if k.startswith(pre)})
                pre = f"opt_{name}/"
                model.opt[name].load_state({k[len(pre):]: v for k, v in tensors.items() if k.startswith(pre)})
        except (KeyError, ValueError, UsageError) as exc:
            raise CheckpointError(f"{path}: incompatible checkpoint ({exc})") from exc
        model.epoch = meta["epoch"]
        model.codec_counter = meta["codec_counter"]
        model.noise_rng.bit_generator.state = meta["noise_rng"]
        model.shuffle_rng.bit_generator.state = meta["shuffle_rng"]
        return model


def generate(checkpoint, n: int, seed: int) -> list[PixelImage]:
    model = checkpoint if isinstance(checkpoint, SSGAN) else SSGAN.load(checkpoint)
    return model.generate(n, seed)
