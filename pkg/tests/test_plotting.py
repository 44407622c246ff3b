from litrain.curriculum import PhaseConfig, default_action_space
from litrain.losses import LossConfig
from litrain.plotting import render_trajectory_svg
from litrain.synth import SynthConfig, gen_synthetic_dataset
from litrain.training import TrainConfig, TrajectoryLog, run_training


def small_log():
    ds = gen_synthetic_dataset(SynthConfig(num_docs=30, num_queries=12, seed=1))
    cfg = TrainConfig(
        loss=LossConfig(tau=0.15),
        phases=PhaseConfig(4, 2, 4, 4),
        steps=12,
        lr=0.01,
        batch_size=4,
        eval_every=0,
        seed=1,
    )
    return run_training(ds, cfg).log


def test_svg_well_formed_and_deterministic():
    log = small_log()
    svg = render_trajectory_svg(log)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.endswith("\n")
    assert svg == render_trajectory_svg(log)


def test_svg_draws_both_series_and_phase_boundaries():
    svg = render_trajectory_svg(small_log())
    assert svg.count("<polyline") >= 1  # loss line
    assert 'stroke="#2a6fb0"' in svg  # action staircase path
    # phases flip twice in the 4/2/4/4 layout -> two dashed boundaries
    assert svg.count("stroke-dasharray") >= 2


def test_svg_empty_log_renders_axes_only():
    svg = render_trajectory_svg(TrajectoryLog())
    assert "<svg" in svg and "</svg>" in svg
    assert "<polyline" not in svg


def test_svg_letters_on_axis():
    svg = render_trajectory_svg(small_log())
    for letter in ("A", "E", "I", "M"):
        assert f">{letter}<" in svg
