"""Synthetic end-to-end run: generate, train with the desk config, evaluate on the val split."""

import argparse
import logging
import time
from pathlib import Path

from spos_gebd.data import SynthConfig, generate
from spos_gebd.desk import desk_model_config, desk_train_config
from spos_gebd.model import BoundaryModel
from spos_gebd.training import train_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    ap.add_argument("--train-videos", type=int, default=200)
    ap.add_argument("--val-videos", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fcn", default=None, help="comma-separated FCN widths, last must equal channels")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    train = generate(SynthConfig(videos=args.train_videos, seed=args.seed, id_prefix="train"))
    val = generate(SynthConfig(videos=args.val_videos, seed=args.seed + 1, id_prefix="val"))
    fcn = tuple(int(v) for v in args.fcn.split(",")) if args.fcn else None
    model = BoundaryModel(desk_model_config(seed=args.seed, fcn_channels=fcn))
    cfg = desk_train_config(epochs=args.epochs, seed=args.seed)

    args.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    report = train_loop(train, model, cfg, val, args.out / "model.ckpt", args.out / "report.txt")
    print(f"trained in {time.perf_counter() - start:.1f}s")
    if report.final_eval is not None:
        print(report.final_eval.to_table())


if __name__ == "__main__":
    main()
