"""Decoy age distribution of generated chains against the recency scale.

Decoys are drawn with weight exp(-age / scale), so on a long, busy chain
their median age should sit near scale * ln 2.
"""

from __future__ import annotations

import argparse
import math

import numpy as np

from artforge.synth import DAY, GenConfig, decoy_ages, generate_chain


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--txs", type=int, default=1000)
    ap.add_argument("--scale-days", type=float, default=2.0)
    args = ap.parse_args(argv)

    scale = args.scale_days * DAY
    print(f"{'seed':>5} {'decoys':>7} {'median_h':>9} {'mean_h':>8}")
    medians = []
    for seed in range(args.seeds):
        cfg = GenConfig(n_background_txs=args.txs, rng_seed=seed, decoy_recency_scale=scale)
        ages = decoy_ages(generate_chain(cfg))
        medians.append(float(np.median(ages)))
        print(f"{seed:>5} {len(ages):>7} {medians[-1] / 3600:9.1f} {ages.mean() / 3600:8.1f}")
    print(f"scale*ln2 = {scale * math.log(2) / 3600:.1f} h; mean of medians = {np.mean(medians) / 3600:.1f} h")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
