"""Train every ablation variant for one epoch on a small synthetic set and tabulate the report rows."""

import argparse
import tempfile
from pathlib import Path

from spos_gebd import cli
from spos_gebd.desk import ABLATION_GRID, desk_cli_flags


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--videos", type=int, default=8)
    ap.add_argument("--epochs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None, help="keep checkpoints and reports here")
    args = ap.parse_args()

    root = args.out or Path(tempfile.mkdtemp(prefix="ablation-"))
    common = ["--frames", "100", "--channels", "32"]
    cli.main(["gen-data", "--out", str(root / "train"), "--videos", str(args.videos), *common])
    cli.main(["gen-data", "--out", str(root / "val"), "--videos", str(max(1, args.videos // 4)), "--seed", "1", *common])

    rows = []
    for i, (label, flags) in enumerate(ABLATION_GRID):
        report = root / f"variant{i:02d}.report.txt"
        rc = cli.main([
            "train",
            "--features", str(root / "train" / "features"), "--annos", str(root / "train" / "annotations.json"),
            "--val-features", str(root / "val" / "features"), "--val-annos", str(root / "val" / "annotations.json"),
            *desk_cli_flags(epochs=args.epochs), *flags,
            "--out", str(root / f"variant{i:02d}.ckpt"), "--report", str(report),
        ])
        last = report.read_text().splitlines()[-1] if rc == 0 else "error"
        rows.append(f"{label:<28}{last}")
    print("# variant\tepoch\tmean_loss\tval_f1@0.05\tval_avg_f1\tlr")
    print("\n".join(rows))
    print(f"artifacts in {root}")


if __name__ == "__main__":
    main()
