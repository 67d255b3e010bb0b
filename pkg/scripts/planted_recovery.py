"""Planted-pattern recovery sweep: full default pipeline over several master seeds.

    python3 scripts/planted_recovery.py --seeds 1-10 --workers 4
"""

from __future__ import annotations

import argparse
import tempfile
import time

from artforge import pipeline as pl


def seed_range(text: str) -> list[int]:
    lo, _, hi = text.partition("-")
    return list(range(int(lo), int(hi or lo) + 1))


def recover(seed: int, out: str, workers: int = 1, **overrides) -> dict:
    cfg = pl.PipelineConfig.from_dict({"seed": seed, "out": out, "workers": workers, **overrides})
    pl.run_synth(cfg)
    pl.run_sample_negatives(cfg)
    pl.run_features(cfg)
    return pl.run_train(cfg).report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=seed_range, default=seed_range("1-10"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--n-hops", type=int, default=2)
    args = ap.parse_args(argv)

    print(f"{'seed':>5} {'tp':>3} {'fp':>3} {'tn':>3} {'fn':>3} {'prec':>6} {'rec':>6} {'f1':>6} {'sec':>5}")
    f1s = []
    for seed in args.seeds:
        t0 = time.perf_counter()
        with tempfile.TemporaryDirectory() as out:
            r = recover(seed, out, args.workers, n_hops=args.n_hops)
        f1s.append(r["f1"])
        print(f"{seed:>5} {r['tp']:>3} {r['fp']:>3} {r['tn']:>3} {r['fn']:>3} "
              f"{r['precision']:6.3f} {r['recall']:6.3f} {r['f1']:6.3f} {time.perf_counter() - t0:5.1f}")
    print(f"mean f1 {sum(f1s) / len(f1s):.3f} over {len(f1s)} seeds")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
