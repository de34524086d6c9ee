"""Staircase strain reconstruction with the MLP and the least-squares inversion.

    python3 scripts/strain_validation.py configs/strain_60db.yaml configs/strain_clean.yaml
"""

import argparse
import time

from fibresense import harness
from fibresense.cli import build_dataset
from fibresense.config import load_run_config


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("configs", nargs="+")
    p.add_argument("--lsq", choices=["rc", "strain", "none"], default="strain")
    p.add_argument("--stride", type=int, default=10, help="invert every n-th test frame")
    args = p.parse_args()
    for path in args.configs:
        t0 = time.perf_counter()
        cfg = load_run_config(path)
        ds = build_dataset(cfg)
        rep = harness.run_strain_validation(
            ds, cfg.train, cfg.arch, ladder=cfg.model, exc_cfg=cfg.excitation,
            lsq_param=None if args.lsq == "none" else args.lsq, lsq_stride=args.stride)
        print(f"{path}: {len(ds)} frames, {time.perf_counter() - t0:.0f} s, best epoch {rep.history.best_epoch}")
        for name, m in rep.metrics.items():
            line = f"  {name:>9}  MLP rmse {m.rmse:.4f}%  r2 {m.r2:.5f}"
            if rep.lsq_metrics:
                line += f"  |  LSQ rmse {rep.lsq_metrics[name].rmse:.4f}%"
            print(line)
        if rep.lsq_metrics:
            print(f"  LSQ: {rep.lsq_failures} unconverged, {rep.lsq_clamps} clamped")


if __name__ == "__main__":
    main()
