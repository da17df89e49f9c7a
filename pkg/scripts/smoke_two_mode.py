"""Train the desk-scale game on the two-mode corpus and log D accuracy per batch.

    python scripts/smoke_two_mode.py --batches 200 --out runs/smoke
"""
import argparse
import os

import numpy as np

from stegogan.config import desk_config
from stegogan.harness.synthetic import two_mode_images
from stegogan.harness.timing import append_timing_log, write_metrics
from stegogan.image_core import make_grid, save_png, to_tensor
from stegogan.trainer import SSGAN


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--batches", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-mode", default="log-gan")
    p.add_argument("--out", default="runs/smoke")
    args = p.parse_args()
    os.makedirs(args.out, exist_ok=True)
    model = SSGAN(desk_config(batch_size=args.batch_size, master_seed=args.seed, loss_mode=args.loss_mode))
    data = to_tensor(two_mode_images(args.batches * args.batch_size, args.seed))
    reports = []
    for b in range(args.batches):
        real = data[b * args.batch_size:(b + 1) * args.batch_size]
        reports.append(model.train_batch(real, 0, b))
        if b % 10 == 0:
            r = reports[-1]
            print(f"batch {b:4d}  j_total {r.j_total:+.4f}  d_acc {r.d_accuracy:.3f}  s_acc {r.s_accuracy:.3f}")
    tail = np.mean([r.d_accuracy for r in reports[-20:]])
    print(f"mean D accuracy over the last 20 batches: {tail:.3f}")
    write_metrics(os.path.join(args.out, "metrics.csv"), reports)
    append_timing_log(os.path.join(args.out, "timing.csv"), reports, f"smoke-seed{args.seed}")
    save_png(make_grid(model.generate(64, 0)), os.path.join(args.out, "samples.png"))
    model.save(os.path.join(args.out, "ssgan.ckpt"))


if __name__ == "__main__":
    main()
