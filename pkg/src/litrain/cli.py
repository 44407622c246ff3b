"""Command-line entry point.

Subcommands cover the whole pipeline: gen-data, warmup, mine-pool, train,
replay, plot, hnqs-gen, mva. Every subcommand takes --config (INI) plus
repeatable --set section.key=value overrides; flags win over the file.

Exit codes: 0 success; 1 usage errors; 2 data or parse errors (including
replay divergences); 3 curriculum calibration failure surfaced at end of a
training run.
"""

from __future__ import annotations

import argparse
import sys

from . import config as config_mod
from . import plotting
from .curriculum import action_letter
from .errors import DataError, UsageError
from .hnqs import generate_record, hnqs_to_record
from .mining import pool_to_record
from .mva import MvaParams, build_composite, load_png, save_png
from .persist import load_checkpoint, read_jsonl, save_checkpoint, write_jsonl
from .synth import dataset_from_records, dataset_to_records, derive_seed, gen_synthetic_dataset
from .training import (
    evaluate_ndcg,
    init_params,
    log_from_records,
    log_to_records,
    mine_pools,
    replay_decisions,
    run_training,
    run_warmup,
)
from .encoder import ToyEncoderParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CALIBRATION = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract here is exit 1."""

    def error(self, message):
        raise UsageError(message)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="INI run configuration")
    p.add_argument(
        "--set",
        metavar="SECTION.KEY=VALUE",
        action="append",
        default=[],
        dest="overrides",
        help="override one config key (repeatable; wins over --config)",
    )


def _run_config(args) -> config_mod.RunConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        dotted, value = item.split("=", 1)
        overrides[dotted.strip()] = value
    if getattr(args, "mock_controller", None):
        overrides.setdefault("controller.mock_script", args.mock_controller)
        overrides.setdefault("controller.mode", "mock")
    return config_mod.load_run_config(args.config, overrides)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="litrain",
        description="Late-interaction training engine with a difficulty-curriculum controller.",
        epilog="\n".join(config_mod.schema_help_lines()),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-data", help="generate the synthetic dataset file")
    _add_config_args(p)
    p.add_argument("--out", metavar="FILE", help="output path (default: [data] dataset)")

    p = sub.add_parser("warmup", help="run the in-batch warm-up and save a checkpoint")
    _add_config_args(p)
    p.add_argument("--dataset", metavar="FILE", help="dataset path (default: [data] dataset)")
    p.add_argument("--out", metavar="FILE", default="warmup.ckpt", help="checkpoint output")

    p = sub.add_parser("mine-pool", help="mine hard-negative candidate pools")
    _add_config_args(p)
    p.add_argument("--dataset", metavar="FILE", help="dataset path (default: [data] dataset)")
    p.add_argument("--checkpoint", metavar="FILE", required=True, help="encoder checkpoint")
    p.add_argument("--out", metavar="FILE", default="pools.jsonl", help="pool output")

    p = sub.add_parser("train", help="full pipeline: warm-up, mining, curriculum training")
    _add_config_args(p)
    p.add_argument("--dataset", metavar="FILE", help="dataset path (default: [data] dataset)")
    p.add_argument("--out-trajectory", metavar="FILE", default="trajectory.jsonl")
    p.add_argument("--out-checkpoint", metavar="FILE", default="model.ckpt")
    p.add_argument("--mock-controller", metavar="FILE",
                   help="script of canned controller responses (implies mock mode)")

    p = sub.add_parser("replay", help="re-run the rule engine over a logged run")
    _add_config_args(p)
    p.add_argument("--trajectory", metavar="FILE", required=True, help="trajectory or decision log")

    p = sub.add_parser("plot", help="render a trajectory log to SVG")
    _add_config_args(p)
    p.add_argument("--trajectory", metavar="FILE", required=True)
    p.add_argument("--out", metavar="FILE", required=True, help="SVG output path")

    p = sub.add_parser("hnqs-gen", help="generate hard-negative query variants (mock generator)")
    _add_config_args(p)
    p.add_argument("--questions", metavar="FILE", required=True,
                   help="text file, one positive question per line")
    p.add_argument("--out", metavar="FILE", default="hnqs.jsonl")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("mva", help="build the multi-view composite of one image")
    p.add_argument("--in", dest="infile", metavar="FILE", required=True)
    p.add_argument("--out", metavar="FILE", required=True)
    p.add_argument("--angle", type=float, default=None, help="rotation in degrees (default: seeded draw)")
    p.add_argument("--factor", type=float, default=0.5, help="downsample factor in (0, 1]")
    p.add_argument("--seed", type=int, default=0)

    return parser


def _load_dataset(args, rc: config_mod.RunConfig):
    path = getattr(args, "dataset", None) or rc.dataset_path
    return dataset_from_records(read_jsonl(path))


def _cmd_gen_data(args) -> int:
    rc = _run_config(args)
    ds = gen_synthetic_dataset(rc.synth)
    out = args.out or rc.dataset_path
    n = write_jsonl(out, dataset_to_records(ds))
    print(f"wrote {out}: {len(ds.docs)} docs, {len(ds.queries)} queries ({n} records)")
    return EXIT_OK


def _cmd_warmup(args) -> int:
    rc = _run_config(args)
    ds = _load_dataset(args, rc)
    params = init_params(ds.config.d_in, rc.train.d_out, derive_seed(rc.train.seed, "init"))
    params, losses = run_warmup(
        params, ds, rc.train.warmup_epochs, rc.train.warmup_lr,
        rc.train.warmup_tau, rc.train.warmup_batch_size, rc.train.seed,
    )
    save_checkpoint(args.out, params.projection, step=0)
    ndcg, n = evaluate_ndcg(params, ds, rc.train.eval_k)
    print(f"warm-up: {len(losses)} batches, loss {losses[0]:.4f} -> {losses[-1]:.4f}; "
          f"nDCG@{rc.train.eval_k} {ndcg:.4f} on {n} held-out queries")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_mine_pool(args) -> int:
    rc = _run_config(args)
    ds = _load_dataset(args, rc)
    projection, _step = load_checkpoint(args.checkpoint)
    params = ToyEncoderParams(projection=projection)
    n = rc.train.pool_n if rc.train.pool_n > 0 else min(200, len(ds.docs) - 1)
    pools = mine_pools(params, ds, n)
    write_jsonl(args.out, (pool_to_record(p) for p in pools.values()))
    print(f"wrote {args.out}: {len(pools)} pools of up to {n} candidates")
    return EXIT_OK


def _cmd_train(args) -> int:
    rc = _run_config(args)
    ds = _load_dataset(args, rc)
    result = run_training(ds, rc.train)
    write_jsonl(args.out_trajectory, log_to_records(result.log))
    save_checkpoint(args.out_checkpoint, result.params.projection, step=rc.train.steps)
    evals = result.log.evals
    print(f"trained {rc.train.steps} steps ({rc.train.mode} mode): "
          f"nDCG@{rc.train.eval_k} {evals[0].ndcg:.4f} -> {evals[-1].ndcg:.4f}, "
          f"{len(result.log.reviews)} reviews")
    print(f"wrote {args.out_trajectory} and {args.out_checkpoint}")
    if result.log.any_calibration_failure():
        bad = [r.step for r in result.log.reviews if r.calibration_failure]
        print(f"curriculum calibration failure at review step(s) {bad}", file=sys.stderr)
        return EXIT_CALIBRATION
    return EXIT_OK


def _cmd_replay(args) -> int:
    rc = _run_config(args)
    log = log_from_records(read_jsonl(args.trajectory))
    findings = replay_decisions(log.reviews, rc.train.phases, rc.train.space)
    divergences = [f for f in findings if f.severity == "divergence"]
    flags = [f for f in findings if f.severity == "llm_inconsistency"]
    for f in findings:
        print(f"step {f.step}: {f.severity}: logged {action_letter(f.logged_action)}, "
              f"rules say {action_letter(f.oracle_action)} ({f.source})")
    print(f"replayed {len(log.reviews)} reviews: {len(divergences)} divergences, "
          f"{len(flags)} llm inconsistencies")
    return EXIT_DATA if divergences else EXIT_OK


def _cmd_plot(args) -> int:
    rc = _run_config(args)
    log = log_from_records(read_jsonl(args.trajectory))
    svg = plotting.render_trajectory_svg(log, m=len(rc.train.space))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {args.out} ({len(log.steps)} steps, {len(log.reviews)} reviews)")
    return EXIT_OK


def _cmd_hnqs_gen(args) -> int:
    with open(args.questions, "r", encoding="utf-8") as fh:
        questions = [line.strip() for line in fh if line.strip()]
    if not questions:
        raise DataError(f"{args.questions}: no questions found")
    records = []
    for i, q in enumerate(questions):
        records.append(hnqs_to_record(generate_record(f"q{i:04d}", q, seed=args.seed)))
    write_jsonl(args.out, records)
    print(f"wrote {args.out}: {len(records)} records x 20 variants (mock generator)")
    return EXIT_OK


def _cmd_mva(args) -> int:
    img = load_png(args.infile)
    params = MvaParams(angle=args.angle, downsample_factor=args.factor, seed=args.seed)
    composite = build_composite(img, params)
    save_png(composite, args.out)
    print(f"wrote {args.out}: {composite.width}x{composite.height} "
          f"from {img.width}x{img.height}")
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "warmup": _cmd_warmup,
    "mine-pool": _cmd_mine_pool,
    "train": _cmd_train,
    "replay": _cmd_replay,
    "plot": _cmd_plot,
    "hnqs-gen": _cmd_hnqs_gen,
    "mva": _cmd_mva,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
