"""Command-line entry point: ``stegogan <command> [--config FILE] [--seed N] [--out DIR] ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
The thread count of the BLAS backend is taken from ``STEGOGAN_THREADS``
(default 1, which keeps every run bitwise reproducible).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from ..config import ExperimentConfig, desk_config
from ..errors import StegoganError, UsageError
from ..image_core import load_image_any, make_grid, save_png
from ..stego_codec import bits_to_bytes, bytes_to_bits, capacity, get_embedder
from ..trainer import SSGAN
from . import experiments
from .data import CorpusManifest, build_stego_corpus, prepare_dataset
from .detector import Detector, evaluate_detector, train_detector
from .synthetic import KINDS, write_corpus
from .timing import append_timing_log, timing_report, write_metrics

THREADS_ENV = "STEGOGAN_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else desk_config()
    if args.seed is not None:
        cfg.training.master_seed = args.seed
    return cfg


def _seed(args, default=0) -> int:
    return default if args.seed is None else args.seed


def _out(args, *parts) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, *parts)


def _print(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True, default=str))


# -- commands ---------------------------------------------------------------

def cmd_synth_data(args):
    paths = write_corpus(args.out, args.n, args.kind, _seed(args))
    _print({"images": len(paths), "dir": args.out})


def cmd_prepare_data(args):
    train, test = prepare_dataset(args.src, args.out, args.crop, args.split, _seed(args), args.grayscale)
    _print({"train": len(train), "test": len(test), "out": args.out})


def cmd_build_stego(args):
    m = build_stego_corpus(CorpusManifest.load(args.manifest), args.out, args.payload, args.key_policy,
                           _seed(args), args.embedder)
    _print({"entries": len(m), "manifest": os.path.join(args.out, f"{m.split}_pairs.json")})


def cmd_train_ssgan(args):
    cfg = _config(args)
    if args.epochs is not None:
        cfg.training.epochs = args.epochs
    data = CorpusManifest.load(args.manifest).tensor(np.dtype(cfg.training.dtype))
    model = SSGAN.load(args.resume) if args.resume else SSGAN(cfg)
    run_id = args.run_id or f"ssgan-seed{model.tc.master_seed}"
    reports = model.train(data, cfg.training.epochs)
    model.save(_out(args, "ssgan.ckpt"))
    model.config.save(_out(args, "config.yaml"))
    write_metrics(_out(args, "metrics.csv"), reports)
    append_timing_log(_out(args, "timing.csv"), reports, run_id)
    save_png(make_grid(model.generate(64, args.sample_seed)), _out(args, "samples.png"))
    _print({"batches": len(reports), "last": reports[-1].metrics() if reports else None, "out": args.out})


def cmd_train_detector(args):
    val = CorpusManifest.load(args.val) if args.val else None
    spec = _config(args).steganalyser
    det, history = train_detector(args.arch, CorpusManifest.load(args.manifest), val, args.lr, args.epochs,
                                  _seed(args), args.batch_size, spec, _out(args, "detector_history.csv"))
    det.save(_out(args, "detector.ckpt"))
    _print({"history": history, "out": args.out})


def cmd_evaluate(args):
    det = Detector.load(args.detector)
    manifest = CorpusManifest.load(args.manifest)
    rep = evaluate_detector(det, manifest, _out(args, "results.csv"), args.run_id or det.name)
    _print(asdict(rep))


def cmd_generate(args):
    imgs = SSGAN.load(args.checkpoint).generate(args.n, _seed(args))
    for i, img in enumerate(imgs):
        save_png(img, _out(args, f"gen_{i:06d}.png"))
    if imgs:
        save_png(make_grid(imgs), _out(args, "grid.png"))
    _print({"images": len(imgs), "out": args.out})


def _message(args) -> bytes:
    if args.message_file:
        with open(args.message_file, "rb") as fh:
            return fh.read()
    if args.message is None:
        raise UsageError("give --message or --message-file")
    return args.message.encode()


def cmd_embed(args):
    cover = load_image_any(args.cover)
    bits = bytes_to_bits(_message(args))
    stego = get_embedder(args.embedder).embed(cover, bits, args.key)
    path = args.output or _out(args, "stego.png")
    save_png(stego, path)
    _print({"bits": int(bits.size), "capacity_at_1bpp": capacity(cover, 1.0), "stego": path})


def cmd_extract(args):
    stego = load_image_any(args.stego)
    data = bits_to_bytes(get_embedder(args.embedder).extract(stego, args.key, 8 * args.n_bytes))
    if args.output:
        with open(args.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode(errors="replace") + "\n")


def cmd_seed_experiments(args):
    real = CorpusManifest.load(args.manifest).tensor()
    run_id = args.run_id or f"seed-exp-{_seed(args)}"
    reports = experiments.run_seed_experiments(
        args.checkpoint, real, args.n_images, args.train_seed, args.fresh_seed, args.fine_tune_epochs,
        arch=args.arch, lr=args.lr, epochs=args.epochs, seed=_seed(args), spec=_config(args).steganalyser,
        results_csv=_out(args, "results.csv"), run_id=run_id)
    _print({k: asdict(v) for k, v in reports.items()})


def cmd_timing_report(args):
    table = timing_report(args.logs, _out(args, "timing_report.csv"), args.reference)
    _print(table)


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", default="out", help="output directory")
    p = _Parser(prog="stegogan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("synth-data", cmd_synth_data, "write a procedural image corpus")
    sp.add_argument("--kind", choices=sorted(KINDS), default="smooth")
    sp.add_argument("--n", type=int, default=2000)

    sp = add("prepare-data", cmd_prepare_data, "center-crop and split a folder of images")
    sp.add_argument("src")
    sp.add_argument("--crop", type=int, default=64)
    sp.add_argument("--split", type=float, default=0.9)
    sp.add_argument("--grayscale", action="store_true")

    sp = add("build-stego", cmd_build_stego, "pair every cover with a stego image")
    sp.add_argument("manifest")
    sp.add_argument("--payload", type=float, default=0.4)
    sp.add_argument("--key-policy", choices=["per-image", "fixed"], default="per-image")
    sp.add_argument("--embedder", default="lsb-matching")

    sp = add("train-ssgan", cmd_train_ssgan, "train the three-player game on a cover manifest")
    sp.add_argument("manifest")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--resume", help="checkpoint to continue from")
    sp.add_argument("--run-id")
    sp.add_argument("--sample-seed", type=int, default=0)

    sp = add("train-detector", cmd_train_detector, "train a standalone steganalyser")
    sp.add_argument("manifest")
    sp.add_argument("--arch", choices=["S", "S_star"], default="S")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--epochs", type=int, default=5)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--val", help="validation manifest")

    sp = add("evaluate", cmd_evaluate, "score a detector on a labelled manifest")
    sp.add_argument("detector")
    sp.add_argument("manifest")
    sp.add_argument("--run-id")

    sp = add("generate", cmd_generate, "sample images from an SSGAN checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("--n", type=int, default=64)

    for name, fn, help_ in (("embed", cmd_embed, "hide a message in a cover"),
                            ("extract", cmd_extract, "recover a message from a stego image")):
        sp = add(name, fn, help_)
        sp.add_argument("stego" if name == "extract" else "cover")
        sp.add_argument("--key", type=int, required=True)
        sp.add_argument("--embedder", default="lsb-matching")
        sp.add_argument("--output", help="output file")
        if name == "embed":
            sp.add_argument("--message")
            sp.add_argument("--message-file")
        else:
            sp.add_argument("--n-bytes", type=int, required=True)

    sp = add("seed-experiments", cmd_seed_experiments, "S1-S3 detector experiments on generated covers")
    sp.add_argument("checkpoint")
    sp.add_argument("manifest", help="real covers used for the extra generator training")
    sp.add_argument("--n-images", type=int, default=500)
    sp.add_argument("--train-seed", type=int, default=7)
    sp.add_argument("--fresh-seed", type=int)
    sp.add_argument("--fine-tune-epochs", type=int, default=2)
    sp.add_argument("--arch", choices=["S", "S_star"], default="S_star")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--epochs", type=int, default=5)
    sp.add_argument("--run-id")

    sp = add("timing-report", cmd_timing_report, "per-run and per-epoch wall time from run logs")
    sp.add_argument("logs", nargs="*")
    sp.add_argument("--reference", action="store_true", help="append the reference seven-epoch totals (SSGAN 227.5, SGAN 240.3 min)")
    return p


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    from threadpoolctl import threadpool_limits

    try:
        args = build_parser().parse_args(argv)
        with threadpool_limits(limits=_threads()):
            args.fn(args)
    except StegoganError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
