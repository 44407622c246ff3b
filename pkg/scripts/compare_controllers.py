#!/usr/bin/env python3
"""Compare the curriculum controller against static baselines, seed by seed.

Each mode trains on the same data with the same seeds; only the negative
selection policy differs:

  oracle        rule-based three-phase controller
  fixed-window  one static difficulty band for the whole run
  linear        scripted sweep easy -> hard, no feedback
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from litrain.curriculum import PhaseConfig
from litrain.losses import LossConfig
from litrain.synth import SynthConfig, gen_synthetic_dataset
from litrain.training import TrainConfig, run_training

MODES = ("oracle", "fixed-window", "linear")


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="7,11,13", help="comma-separated run seeds")
    ap.add_argument("--steps", type=int, default=132)
    ap.add_argument("--tau", type=float, default=0.15)
    ap.add_argument("--lr", type=float, default=0.003)
    return ap.parse_args()


def run_one(seed: int, mode: str, args) -> tuple[float, float, int]:
    dataset = gen_synthetic_dataset(SynthConfig(seed=seed))
    cfg = TrainConfig(
        loss=LossConfig(tau=args.tau),
        phases=PhaseConfig(12, 2, 40, 40),
        mode=mode,
        steps=args.steps,
        eval_every=0,
        lr=args.lr,
        seed=seed,
    )
    log = run_training(dataset, cfg).log
    return log.evals[0].ndcg, log.evals[-1].ndcg, len(log.reviews)


def main():
    args = parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]

    print(f"{'seed':>5}  {'mode':<13} {'warm nDCG@5':>11}  {'final nDCG@5':>12}  {'gain':>7}  reviews")
    totals = {m: 0.0 for m in MODES}
    for seed in seeds:
        for mode in MODES:
            t0 = time.perf_counter()
            first, last, n_reviews = run_one(seed, mode, args)
            dt = time.perf_counter() - t0
            totals[mode] += last - first
            print(f"{seed:>5}  {mode:<13} {first:>11.4f}  {last:>12.4f}  "
                  f"{last - first:>+7.4f}  {n_reviews:>7}  ({dt:.1f}s)")

    print("\nmean gain over seeds:")
    for mode in MODES:
        print(f"  {mode:<13} {totals[mode] / len(seeds):+.4f}")


if __name__ == "__main__":
    main()
