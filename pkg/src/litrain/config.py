"""Run configuration: an INI file with typed sections plus flag overrides.

Every key has a schema entry (section, name, type, default, help), which is
the single source of truth for parsing, for override validation, and for the
CLI help text. Unknown sections or keys are rejected outright — a typo in a
config must fail, not silently fall back to a default.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass

from .controller import DEFAULT_API_KEY_ENV, LlmEndpointConfig
from .curriculum import ActionSpace, PhaseConfig, default_action_space, space_from_bounds
from .errors import DataError, UsageError
from .losses import LossConfig
from .synth import SynthConfig
from .training import MODES, TrainConfig

# (section, key, type, default, help); type "json" holds a JSON literal string
SCHEMA: tuple[tuple[str, str, str, str, str], ...] = (
    ("loss", "tau", "float", "0.02", "margin-loss temperature"),
    ("loss", "alpha", "float", "1.0", "weight of the document->query direction"),
    ("loss", "beta", "float", "1.0", "weight of the augmented-view terms"),
    ("loss", "k", "int", "2", "hard negatives per anchor and direction"),
    ("curriculum", "exploration_steps", "int", "60", "length of the exploration phase"),
    ("curriculum", "exploration_review_every", "int", "2", "exploration review cadence"),
    ("curriculum", "transition_steps", "int", "200", "length of the transition phase"),
    ("curriculum", "lockin_review_every", "int", "200", "lock-in review cadence"),
    ("curriculum", "intervals", "json", "", "override action table: JSON [[low, high], ...]; empty = default 16 actions"),
    ("controller", "mode", "str", "oracle", "oracle | llm | mock | fixed-window | linear"),
    ("controller", "url", "str", "", "chat-completion endpoint URL (llm mode)"),
    ("controller", "model_name", "str", "", "model name sent to the endpoint"),
    ("controller", "api_key_env_var", "str", DEFAULT_API_KEY_ENV, "env var holding the API key"),
    ("controller", "timeout", "float", "60", "endpoint timeout in seconds"),
    ("controller", "max_retries", "int", "2", "retries after a failed controller call"),
    ("controller", "mock_script", "str", "", "canned-response file (mock mode)"),
    ("controller", "fixed_low", "float", "0.80", "fixed-window baseline: interval low"),
    ("controller", "fixed_high", "float", "0.98", "fixed-window baseline: interval high"),
    ("data", "dataset", "str", "dataset.jsonl", "dataset file path"),
    ("data", "num_docs", "int", "200", "number of base documents"),
    ("data", "num_queries", "int", "80", "number of queries (first N docs become positives)"),
    ("data", "num_topics", "int", "6", "latent topics"),
    ("data", "d_in", "int", "12", "raw token dimension"),
    ("data", "doc_tokens_min", "int", "4", "min tokens per document"),
    ("data", "doc_tokens_max", "int", "8", "max tokens per document"),
    ("data", "query_tokens_min", "int", "2", "min tokens per query"),
    ("data", "query_tokens_max", "int", "4", "max tokens per query"),
    ("data", "noise_scale", "float", "0.3", "query-token noise"),
    ("data", "near_dup_rate", "float", "0.5", "fraction of positives given a near-duplicate distractor"),
    ("data", "near_dup_eps", "float", "0.05", "distractor perturbation size"),
    ("data", "holdout_fraction", "float", "0.2", "held-out query fraction for evals"),
    ("data", "seed", "int", "0", "dataset generation seed"),
    ("train", "steps", "int", "460", "curriculum training steps"),
    ("train", "lr", "float", "0.05", "learning rate"),
    ("train", "batch_size", "int", "8", "pairs per step"),
    ("train", "warmup_epochs", "int", "1", "in-batch warm-up epochs"),
    ("train", "warmup_lr", "float", "0.05", "warm-up learning rate"),
    ("train", "warmup_tau", "float", "0.1", "warm-up InfoNCE temperature"),
    ("train", "warmup_batch_size", "int", "16", "warm-up batch size"),
    ("train", "pool_n", "int", "0", "candidate pool size (0 = min(200, corpus-1))"),
    ("train", "eval_every", "int", "50", "steps between held-out evals (0 = end only)"),
    ("train", "eval_k", "int", "5", "nDCG cutoff"),
    ("train", "aug_noise", "float", "0.05", "augmented-view token noise"),
    ("train", "d_out", "int", "8", "embedding dimension"),
    ("train", "seed", "int", "0", "training seed (init, batches, views)"),
)

_SCHEMA_BY_KEY = {(s, k): (typ, default) for s, k, typ, default, _ in SCHEMA}


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig
    train: TrainConfig
    dataset_path: str


def schema_help_lines() -> list[str]:
    lines = ["configuration keys (defaults in parentheses):"]
    section = None
    for sec, key, _typ, default, help_text in SCHEMA:
        if sec != section:
            lines.append(f"  [{sec}]")
            section = sec
        shown = default if default != "" else "''"
        lines.append(f"    {key} ({shown}): {help_text}")
    return lines


def _parse_value(section: str, key: str, raw: str):
    try:
        typ, _ = _SCHEMA_BY_KEY[(section, key)]
    except KeyError:
        raise UsageError(f"unknown config key [{section}] {key}") from None
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "json":
            return json.loads(raw) if raw else None
        return raw
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None


def load_run_config(path: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read an INI file (optional) and apply 'section.key=value' overrides.

    Overrides win over the file; the file wins over schema defaults.
    """
    values = {(s, k): _parse_value(s, k, default) for s, k, _t, default, _h in SCHEMA}

    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path, encoding="utf-8")
        if not read:
            raise DataError(f"config file not found: {path}")
        known_sections = {s for s, *_ in SCHEMA}
        for section in parser.sections():
            if section not in known_sections:
                raise UsageError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                values[(section, key)] = _parse_value(section, key, raw)

    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise UsageError(f"override must look like section.key=value, got {dotted!r}")
        section, key = dotted.split(".", 1)
        values[(section, key)] = _parse_value(section, key, raw)

    return _assemble(values)


def _assemble(v: dict) -> RunConfig:
    synth = SynthConfig(
        num_docs=v[("data", "num_docs")],
        num_queries=v[("data", "num_queries")],
        num_topics=v[("data", "num_topics")],
        d_in=v[("data", "d_in")],
        doc_tokens=(v[("data", "doc_tokens_min")], v[("data", "doc_tokens_max")]),
        query_tokens=(v[("data", "query_tokens_min")], v[("data", "query_tokens_max")]),
        noise_scale=v[("data", "noise_scale")],
        near_dup_rate=v[("data", "near_dup_rate")],
        near_dup_eps=v[("data", "near_dup_eps")],
        holdout_fraction=v[("data", "holdout_fraction")],
        seed=v[("data", "seed")],
    )
    loss = LossConfig(
        tau=v[("loss", "tau")],
        alpha=v[("loss", "alpha")],
        beta=v[("loss", "beta")],
        k=v[("loss", "k")],
    )
    phases = PhaseConfig(
        exploration_steps=v[("curriculum", "exploration_steps")],
        exploration_review_every=v[("curriculum", "exploration_review_every")],
        transition_steps=v[("curriculum", "transition_steps")],
        lockin_review_every=v[("curriculum", "lockin_review_every")],
    )
    space = _space_from_config(v[("curriculum", "intervals")])
    mode = v[("controller", "mode")]
    if mode not in MODES:
        raise UsageError(f"controller mode must be one of {MODES}, got {mode!r}")
    endpoint = None
    if mode == "llm":
        url = v[("controller", "url")]
        if not url:
            raise UsageError("llm mode requires [controller] url")
        endpoint = LlmEndpointConfig(
            url=url,
            model_name=v[("controller", "model_name")],
            api_key_env_var=v[("controller", "api_key_env_var")],
            timeout=v[("controller", "timeout")],
            max_retries=v[("controller", "max_retries")],
        )
    mock_script = v[("controller", "mock_script")] or None
    train = TrainConfig(
        loss=loss,
        phases=phases,
        space=space,
        mode=mode,
        steps=v[("train", "steps")],
        lr=v[("train", "lr")],
        batch_size=v[("train", "batch_size")],
        warmup_epochs=v[("train", "warmup_epochs")],
        warmup_lr=v[("train", "warmup_lr")],
        warmup_tau=v[("train", "warmup_tau")],
        warmup_batch_size=v[("train", "warmup_batch_size")],
        pool_n=v[("train", "pool_n")],
        eval_every=v[("train", "eval_every")],
        eval_k=v[("train", "eval_k")],
        aug_noise=v[("train", "aug_noise")],
        d_out=v[("train", "d_out")],
        fixed_low=v[("controller", "fixed_low")],
        fixed_high=v[("controller", "fixed_high")],
        seed=v[("train", "seed")],
        endpoint=endpoint,
        mock_script=mock_script,
    )
    return RunConfig(synth=synth, train=train, dataset_path=v[("data", "dataset")])


def _space_from_config(intervals) -> ActionSpace:
    if intervals is None:
        return default_action_space()
    if not isinstance(intervals, list) or not all(
        isinstance(p, list) and len(p) == 2 for p in intervals
    ):
        raise UsageError("intervals override must be a JSON list of [low, high] pairs")
    return space_from_bounds([(float(lo), float(hi)) for lo, hi in intervals])
