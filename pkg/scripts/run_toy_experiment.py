#!/usr/bin/env python3
"""Run the tuned desk-scale training recipe end to end and dump its artifacts.

Generates a 200-doc synthetic corpus, warm-starts the projection, trains 132
steps under the rule-based curriculum controller, then verifies the decision
log replays cleanly. Writes trajectory.jsonl, model.ckpt, and trajectory.svg
into --out-dir.
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from litrain.curriculum import PhaseConfig, action_letter
from litrain.losses import LossConfig
from litrain.persist import save_checkpoint, write_jsonl
from litrain.plotting import render_trajectory_svg
from litrain.synth import SynthConfig, gen_synthetic_dataset
from litrain.training import TrainConfig, log_to_records, replay_decisions, run_training


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--steps", type=int, default=132)
    ap.add_argument("--tau", type=float, default=0.15)
    ap.add_argument("--lr", type=float, default=0.003)
    ap.add_argument("--mode", default="oracle",
                    choices=["oracle", "fixed-window", "linear"])
    ap.add_argument("--out-dir", default="runs/toy")
    return ap.parse_args()


def main():
    args = parse_args()
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = gen_synthetic_dataset(SynthConfig(seed=args.seed))
    cfg = TrainConfig(
        loss=LossConfig(tau=args.tau),
        phases=PhaseConfig(12, 2, 40, 40),
        mode=args.mode,
        steps=args.steps,
        eval_every=50,
        lr=args.lr,
        seed=args.seed,
    )

    t0 = time.perf_counter()
    result = run_training(dataset, cfg)
    elapsed = time.perf_counter() - t0
    log = result.log

    n_warm = len(log.warmup_losses)
    print(f"warm-up: {n_warm} batches, loss {log.warmup_losses[0]:.4f} -> {log.warmup_losses[-1]:.4f}")
    print(f"trained {len(log.steps)} steps in {elapsed:.1f}s ({args.mode} mode)")

    if log.reviews:
        print("\nreviews:")
        for r in log.reviews:
            move = f"{action_letter(r.current)} -> {action_letter(r.action)}"
            flag = "  CALIBRATION FAILURE" if r.calibration_failure else ""
            print(f"  step {r.step:>3}  {r.phase.value:<12} {move}  "
                  f"avg_loss {r.avg_loss:.4f}  ({r.source}){flag}")

    print("\nheld-out nDCG@5:")
    for e in log.evals:
        print(f"  step {e.step:>3}: {e.ndcg:.4f}  ({e.n_queries} queries)")

    findings = replay_decisions(log.reviews, cfg.phases, cfg.space)
    print(f"\nreplay: {len(findings)} findings over {len(log.reviews)} reviews")
    for f in findings:
        print(f"  step {f.step}: {f.severity}")

    write_jsonl(out / "trajectory.jsonl", log_to_records(log))
    save_checkpoint(str(out / "model.ckpt"), result.params.projection, len(log.steps))
    (out / "trajectory.svg").write_text(render_trajectory_svg(log, m=len(cfg.space)))
    print(f"\nartifacts in {out}/: trajectory.jsonl, model.ckpt, trajectory.svg")
    return 1 if findings else 0


if __name__ == "__main__":
    sys.exit(main())
