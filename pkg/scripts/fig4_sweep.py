"""ΔC_p family of the bench ladder and the tone-band comparison.

Writes ``fig4_delta_cp.csv`` and prints the low-frequency collapse, the
segment ordering at 100 kHz, the highest frequency up to which each
segment's ΔC_p still rises with strain, and the discrimination score of a
few candidate tone sets.

    python3 scripts/fig4_sweep.py --out runs/fig4
"""

import argparse
from pathlib import Path

import numpy as np

from fibresense.harness import fig4_rows
from fibresense.io import write_csv
from fibresense.ladder import delta_cp, discrimination_score, paper_ladder

BANDS = {
    "bench 12.5-100k": [12.5e3, 25e3, 50e3, 100e3],
    "low 1-8k": [1e3, 2e3, 4e3, 8e3],
    "mid 5-40k": [5e3, 10e3, 20e3, 40e3],
    "high 125k-1M": [125e3, 250e3, 500e3, 1e6],
}


def single(model, i, level, freqs):
    eps = np.zeros(model.n)
    eps[i] = level
    return delta_cp(model, eps, freqs)


def monotone_limit(model, i, grid, levels):
    """Highest grid frequency below which ΔC_p rises strictly with strain."""
    curves = np.array([single(model, i, lv, grid) for lv in levels])
    rising = np.all(np.diff(curves, axis=0) > 0, axis=0)
    bad = np.flatnonzero(~rising)
    return grid[-1] if bad.size == 0 else grid[bad[0] - 1] if bad[0] > 0 else float("nan")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/fig4")
    p.add_argument("--points", type=int, default=241)
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = paper_ladder()
    grid = np.logspace(3, 6, args.points)
    write_csv(out / "fig4_delta_cp.csv", ["freq_hz", "segment", "strain", "delta_cp_farad"],
              fig4_rows(model, grid))

    at_1k = np.array([single(model, i, 0.4, [1e3])[0] for i in range(model.n)])
    print(f"spread at 1 kHz, 40% strain: {np.ptp(at_1k) / at_1k.mean():.3%}")
    at_100k = np.array([single(model, i, 0.4, [100e3])[0] for i in range(model.n)])
    print("dCp at 100 kHz, 40% strain [pF]:", np.round(at_100k * 1e12, 3).tolist())
    levels = np.linspace(0, 0.4, 41)
    for i, label in enumerate(model.labels):
        print(f"segment {label}: dCp rises with strain up to {monotone_limit(model, i, grid, levels) / 1e3:.1f} kHz")
    for name, tones in BANDS.items():
        print(f"discrimination {name}: {discrimination_score(model, tones):.4f}")


if __name__ == "__main__":
    main()
