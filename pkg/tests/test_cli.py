"""End-to-end command-line pipeline in a temp dir, one exit code at a time."""

import numpy as np
import pytest

from litrain.cli import EXIT_CALIBRATION, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from litrain.mva import RasterImage, save_png
from litrain.persist import read_jsonl, write_jsonl

SMALL_DATA = [
    "--set", "data.num_docs=30",
    "--set", "data.num_queries=12",
    "--set", "data.num_topics=4",
    "--set", "data.seed=5",
]

TOY_TRAIN = [
    "--set", "loss.tau=0.15",
    "--set", "train.lr=0.01",
    "--set", "train.steps=12",
    "--set", "train.batch_size=4",
    "--set", "train.eval_every=0",
    "--set", "curriculum.exploration_steps=4",
    "--set", "curriculum.exploration_review_every=2",
    "--set", "curriculum.transition_steps=4",
    "--set", "curriculum.lockin_review_every=4",
]


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def gen_data(workdir, extra=()):
    rc = main(["gen-data", "--out", "data.jsonl", *SMALL_DATA, *extra])
    assert rc == EXIT_OK
    return "data.jsonl"


def test_no_command_prints_help_and_fails(capsys):
    assert main([]) == EXIT_USAGE
    assert "gen-data" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(capsys):
    assert main(["gen-data", "--bogus"]) == EXIT_USAGE


def test_bad_override_value_is_usage_error(workdir, capsys):
    assert main(["gen-data", "--set", "data.num_docs=lots"]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_missing_dataset_is_data_error(workdir, capsys):
    assert main(["warmup", "--dataset", "absent.jsonl", "--out", "w.ckpt"]) == EXIT_DATA


def test_gen_data_writes_loadable_corpus(workdir, capsys):
    path = gen_data(workdir)
    records = list(read_jsonl(path))
    kinds = {r["kind"] for r in records}
    assert kinds == {"meta", "doc", "query"}
    assert "wrote data.jsonl" in capsys.readouterr().out


def test_full_pipeline_through_replay_and_plot(workdir, capsys):
    path = gen_data(workdir)

    assert main(["warmup", "--dataset", path, "--out", "warm.ckpt", *SMALL_DATA]) == EXIT_OK
    assert (workdir / "warm.ckpt").exists()

    assert main([
        "mine-pool", "--dataset", path, "--checkpoint", "warm.ckpt",
        "--out", "pools.jsonl", *SMALL_DATA,
    ]) == EXIT_OK
    pools = list(read_jsonl("pools.jsonl"))
    assert len(pools) == 10  # 12 queries, 0.2 holdout -> 10 train pools
    n_docs = sum(1 for r in read_jsonl(path) if r["kind"] == "doc")
    assert all(len(p["entries"]) == n_docs - 1 for p in pools)

    assert main([
        "train", "--dataset", path, "--out-trajectory", "traj.jsonl",
        "--out-checkpoint", "model.ckpt", *SMALL_DATA, *TOY_TRAIN,
    ]) == EXIT_OK
    out = capsys.readouterr().out
    assert "trained 12 steps (oracle mode)" in out
    steps = [r for r in read_jsonl("traj.jsonl") if r["kind"] == "step"]
    assert len(steps) == 12

    assert main(["replay", "--trajectory", "traj.jsonl", *SMALL_DATA, *TOY_TRAIN]) == EXIT_OK
    assert "0 divergences" in capsys.readouterr().out

    assert main(["plot", "--trajectory", "traj.jsonl", "--out", "traj.svg", *TOY_TRAIN]) == EXIT_OK
    svg = (workdir / "traj.svg").read_text()
    assert svg.startswith("<svg")


def test_replay_flags_tampered_trajectory(workdir, capsys):
    path = gen_data(workdir)
    main(["train", "--dataset", path, "--out-trajectory", "traj.jsonl",
          "--out-checkpoint", "m.ckpt", *SMALL_DATA, *TOY_TRAIN])
    records = list(read_jsonl("traj.jsonl"))
    for rec in records:
        if rec["kind"] == "review" and rec["source"] == "oracle":
            rec["action"] = "P" if rec["action"] != "P" else "A"
            break
    write_jsonl("tampered.jsonl", records)
    assert main(["replay", "--trajectory", "tampered.jsonl", *SMALL_DATA, *TOY_TRAIN]) == EXIT_DATA
    assert "divergence" in capsys.readouterr().out


def test_train_exit_three_on_calibration_failure(workdir, capsys):
    path = gen_data(workdir)
    # reference-scale temperature at toy score gaps: every review window is far
    # above the exploration band, no anchor window exists
    args = [a if a != "loss.tau=0.15" else "loss.tau=0.02" for a in TOY_TRAIN]
    rc = main(["train", "--dataset", path, "--out-trajectory", "t.jsonl",
               "--out-checkpoint", "m.ckpt", *SMALL_DATA, *args])
    assert rc == EXIT_CALIBRATION
    assert "calibration failure" in capsys.readouterr().err


def test_train_with_mock_controller_script(workdir, capsys):
    path = gen_data(workdir)
    script = workdir / "answers.txt"
    script.write_text("---\n".join(["<answer>B</answer>\n"] * 4))
    rc = main(["train", "--dataset", path, "--out-trajectory", "traj.jsonl",
               "--out-checkpoint", "m.ckpt", "--mock-controller", str(script),
               *SMALL_DATA, *TOY_TRAIN])
    assert rc in (EXIT_OK, EXIT_CALIBRATION)  # scripted B regardless of state
    reviews = [r for r in read_jsonl("traj.jsonl") if r["kind"] == "review"]
    assert reviews[0]["source"] == "llm"
    assert reviews[0]["action"] == "B"


def test_hnqs_gen_round_trip(workdir, capsys):
    (workdir / "questions.txt").write_text(
        "What was the total revenue in 2021?\nHow many staff were hired?\n"
    )
    assert main(["hnqs-gen", "--questions", "questions.txt", "--out", "h.jsonl", "--seed", "7"]) == EXIT_OK
    records = list(read_jsonl("h.jsonl"))
    assert len(records) == 2
    assert all(len(r["variants"]) == 20 for r in records)
    assert records[0]["generator"] == "mock"


def test_hnqs_gen_empty_questions_file_is_data_error(workdir):
    (workdir / "empty.txt").write_text("\n\n")
    assert main(["hnqs-gen", "--questions", "empty.txt", "--out", "h.jsonl"]) == EXIT_DATA


def test_mva_command_builds_composite(workdir, capsys):
    rng = np.random.default_rng(0)
    img = RasterImage(pixels=rng.integers(0, 256, size=(12, 10, 3), dtype=np.uint8))
    save_png(img, "in.png")
    assert main(["mva", "--in", "in.png", "--out", "comp.png", "--angle", "90", "--factor", "0.5"]) == EXIT_OK
    out = capsys.readouterr().out
    # 10 + 5 + 12 wide, max(12, 6, 10) tall
    assert "27x12" in out


def test_help_epilog_lists_config_schema(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    assert "[curriculum]" in out and "[controller]" in out
