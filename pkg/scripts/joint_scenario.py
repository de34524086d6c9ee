"""Leave-one-trial-out joint-angle regression on the garment ladder.

    python3 scripts/joint_scenario.py configs/joint_clean.yaml --folds 1 2
"""

import argparse
import time

from fibresense import harness
from fibresense.cli import build_dataset
from fibresense.config import load_run_config


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--folds", type=int, nargs="*", default=None, help="held-out trials (default all)")
    args = p.parse_args()
    t0 = time.perf_counter()
    cfg = load_run_config(args.config)
    ds = build_dataset(cfg)
    rep = harness.run_joint_scenario(ds, cfg.train, cfg.arch, ranges=cfg.protocol.ranges, folds=args.folds)
    for f in rep.folds:
        print(f"trial {f.test_trial:2d}  best epoch {f.best_epoch:4d}  " + "  ".join(
            f"{j} {f.metrics[j].rmse:.2f} deg" for j in harness.JOINTS))
    print("pooled: " + "  ".join(
        f"{j} rmse {rep.metrics[j].rmse:.2f} deg, spearman {rep.spearman[j]:.4f}" for j in harness.JOINTS))
    print(f"{time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
